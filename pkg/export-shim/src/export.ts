#!/usr/bin/env node
/**
 * Export a trained audio model checkpoint into the peakscope toolkit's
 * on-disk interchange: a stack config JSON, one weight NPY per layer
 * (batchnorm folded to per-channel scale/shift), and optionally per-utterance
 * activation tensors tapped at a named layer, with a corpus manifest carrying
 * the tap's true frame geometry.
 *
 * Usage:
 *   node dist/export.js --checkpoint ckpt.json --tap conv2 --out exported \
 *       --wav-list wavs.txt
 *   node dist/export.js --checkpoint ckpt.json --tap conv2 --out exported \
 *       --weights-only
 *
 * The folded/unfolded equivalence is verified on a probe input before
 * anything is written; a checkpoint that fails it exports nothing.
 *
 * Exit codes: 0 success, 1 validation failure, 2 I/O failure. A wav that
 * cannot be read or featurized is logged to stderr and skipped; the job
 * continues with the rest of the list.
 */

import * as fs from 'node:fs';
import * as path from 'node:path';
import { pathToFileURL } from 'node:url';
import { loadCheckpoint, type Checkpoint } from './checkpoint.js';
import { assertFoldEquivalence } from './fold.js';
import { flattenFrames, forwardTo, receptiveFieldMs, tapEnd, timeGeometry, zeros } from './forward.js';
import { DEFAULT_MEL, melspec, readWav, type MelConfig, type Spectrogram } from './frontend.js';
import { writeNpy } from './npy.js';
import { manifestJson, type ManifestEntry } from './manifest.js';
import { stackConfigJson, weightFiles } from './stackconfig.js';

export interface ExportJob {
  checkpoint: string;
  tap: string;
  out: string;
  /** Wav paths to featurize; empty for a weights-only export. */
  wavs: string[];
  weightsOnly: boolean;
}

export interface ExportResult {
  layersWritten: number;
  exported: string[];
  failed: string[];
}

function writeTextAtomic(target: string, text: string): void {
  const tmp = `${target}.tmp`;
  fs.writeFileSync(tmp, text);
  fs.renameSync(tmp, target);
}

export function melConfigOf(ckpt: Checkpoint): MelConfig {
  return {
    ...DEFAULT_MEL,
    sample_rate: ckpt.frontend.sample_rate,
    window_ms: ckpt.frontend.window_ms,
    shift_ms: ckpt.frontend.shift_ms,
    n_fft: ckpt.frontend.n_fft,
    n_mels: ckpt.frontend.n_mels,
  };
}

/** Stack config plus one weight NPY per weighted layer, under outDir. */
export function exportWeights(ckpt: Checkpoint, outDir: string): number {
  const weightsDir = path.join(outDir, 'weights');
  fs.mkdirSync(weightsDir, { recursive: true });
  writeTextAtomic(path.join(outDir, 'stack.json'), stackConfigJson(ckpt));
  const files = weightFiles(ckpt);
  for (const wf of files) {
    writeNpy(path.join(weightsDir, `${wf.layerName}.npy`), wf.tensor);
  }
  return files.length;
}

/** Featurize one wav and run the model to the tap's activation block. */
export function tapActivations(
  ckpt: Checkpoint,
  tap: string,
  spec: Spectrogram,
): { frames: number; width: number; data: Float64Array } {
  const x = zeros(1, spec.nFrames, spec.nMels);
  x.data.set(spec.frames);
  const tapped = forwardTo(ckpt.modules, x, tap);
  const end = tapEnd(ckpt.modules, tap);
  if (ckpt.modules[end].kind === 'ReLU') {
    for (const v of tapped.data) {
      if (v < 0) throw new Error('post-relu tap produced negative values');
    }
  }
  return flattenFrames(tapped);
}

export function runExport(job: ExportJob): ExportResult {
  const ckpt = loadCheckpoint(job.checkpoint);
  tapEnd(ckpt.modules, job.tap); // validate the tap name before any work
  assertFoldEquivalence(ckpt);

  fs.mkdirSync(job.out, { recursive: true });
  const layersWritten = exportWeights(ckpt, job.out);
  const result: ExportResult = { layersWritten, exported: [], failed: [] };
  if (job.weightsOnly) return result;

  const actDir = path.join(job.out, 'activations');
  fs.mkdirSync(actDir, { recursive: true });
  const cfg = melConfigOf(ckpt);
  const entries: ManifestEntry[] = [];
  const seen = new Set<string>();
  for (const wav of job.wavs) {
    const id = path.basename(wav).replace(/\.[^.]*$/, '');
    try {
      if (seen.has(id)) throw new Error(`duplicate utterance id '${id}'`);
      const spec = melspec(readWav(wav), cfg);
      const act = tapActivations(ckpt, job.tap, spec);
      writeNpy(path.join(actDir, `${id}.npy`), {
        descr: '<f4',
        shape: [act.frames, act.width],
        data: act.data,
      });
      seen.add(id);
      entries.push({ id, activations: `activations/${id}.npy`, wav: path.resolve(wav) });
      result.exported.push(id);
    } catch (err) {
      const msg = err instanceof Error ? err.message : String(err);
      console.error(`skipping ${wav}: ${msg}`);
      result.failed.push(id);
    }
  }
  const geo = timeGeometry(ckpt, job.tap);
  writeTextAtomic(
    path.join(job.out, 'manifest.json'),
    manifestJson({
      frame_shift_ms: geo.shift_ms,
      frame_offset_ms: geo.offset_ms,
      utterances: entries,
    }),
  );
  return result;
}

interface Args {
  checkpoint?: string;
  tap?: string;
  out?: string;
  wavList?: string;
  weightsOnly?: boolean;
  help?: boolean;
}

function parseArgs(argv: string[]): Args {
  const args: Args = {};
  for (let i = 0; i < argv.length; i++) {
    switch (argv[i]) {
      case '--checkpoint':
        args.checkpoint = argv[++i];
        break;
      case '--tap':
        args.tap = argv[++i];
        break;
      case '--out':
        args.out = argv[++i];
        break;
      case '--wav-list':
        args.wavList = argv[++i];
        break;
      case '--weights-only':
        args.weightsOnly = true;
        break;
      case '--help':
      case '-h':
        args.help = true;
        break;
      default:
        console.error(`unknown argument: ${argv[i]}`);
        console.error('use --help for usage');
        process.exit(1);
    }
  }
  return args;
}

function printHelp(): void {
  console.log(`Export a model checkpoint to the toolkit interchange format.

Usage:
  export --checkpoint <ckpt.json> --tap <layer> --out <dir> --wav-list <list.txt>
  export --checkpoint <ckpt.json> --tap <layer> --out <dir> --weights-only

Arguments:
  --checkpoint <file>  checkpoint JSON (required)
  --tap <layer>        layer whose activation block to export (required)
  --out <dir>          output directory (required)
  --wav-list <file>    text file with one wav path per line, resolved
                       relative to the list file; lines starting with '#'
                       and blank lines are skipped
  --weights-only       export the stack config and weights, no activations
  --help, -h           show this message

Output layout:
  <out>/stack.json            layer list in the toolkit's schema
  <out>/weights/<name>.npy    one float32 tensor per weighted layer
  <out>/activations/<id>.npy  frames x features, post-activation
  <out>/manifest.json         utterance index with tap frame geometry`);
}

function readWavList(listPath: string): string[] {
  const base = path.dirname(path.resolve(listPath));
  return fs
    .readFileSync(listPath, 'utf8')
    .split('\n')
    .map((line) => line.trim())
    .filter((line) => line.length > 0 && !line.startsWith('#'))
    .map((line) => path.resolve(base, line));
}

function main(): void {
  const args = parseArgs(process.argv.slice(2));
  if (args.help) {
    printHelp();
    process.exit(0);
  }
  if (!args.checkpoint || !args.tap || !args.out) {
    console.error('error: --checkpoint, --tap and --out are required');
    console.error('use --help for usage');
    process.exit(1);
  }
  if (!args.weightsOnly && !args.wavList) {
    console.error('error: need --wav-list unless --weights-only is given');
    process.exit(1);
  }

  try {
    const wavs = args.wavList ? readWavList(args.wavList) : [];
    const job: ExportJob = {
      checkpoint: args.checkpoint,
      tap: args.tap,
      out: args.out,
      wavs,
      weightsOnly: Boolean(args.weightsOnly),
    };
    const result = runExport(job);
    const ckpt = loadCheckpoint(args.checkpoint);
    const geo = timeGeometry(ckpt, args.tap);
    const rf = receptiveFieldMs(ckpt, args.tap);
    console.log(`wrote ${result.layersWritten} weight tensors to ${args.out}`);
    console.log(
      `${args.tap}: shift ${geo.shift_ms} ms, offset ${geo.offset_ms} ms, receptive field ${rf} ms`,
    );
    if (!job.weightsOnly) {
      console.log(`exported ${result.exported.length} of ${job.wavs.length} utterances`);
    }
  } catch (err) {
    const code = (err as NodeJS.ErrnoException).code;
    const msg = err instanceof Error ? err.message : String(err);
    console.error(`error: ${msg}`);
    process.exit(code === 'ENOENT' || code === 'EACCES' || code === 'EISDIR' ? 2 : 1);
  }
}

const isMain =
  process.argv[1] !== undefined &&
  pathToFileURL(fs.realpathSync(process.argv[1])).href === import.meta.url;
if (isMain) main();

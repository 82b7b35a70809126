/**
 * Cross-tool checks against the Python toolkit: every exported tensor must
 * parse under its strict NPY reader, the manifest must load with the tap's
 * frame geometry intact, and the toolkit's forward pass over the exported
 * stack must reproduce the exported activations.
 */

import { spawnSync } from 'node:child_process';
import * as fs from 'node:fs';
import * as os from 'node:os';
import * as path from 'node:path';
import { afterAll, describe, expect, it } from 'vitest';
import { runExport, melConfigOf } from '../src/export.js';
import { loadCheckpoint } from '../src/checkpoint.js';
import { melspec, readWav } from '../src/frontend.js';
import { writeNpy } from '../src/npy.js';
import { writeCheckpoint, writeWav } from './fixtures.js';

function python(script: string, ...args: string[]) {
  return spawnSync('python3', ['-c', script, ...args], { encoding: 'utf8' });
}

const toolkitAvailable = python('import peakscope').status === 0;

describe.skipIf(!toolkitAvailable)('toolkit interchange', () => {
  const tmp = fs.mkdtempSync(path.join(os.tmpdir(), 'integ-'));
  afterAll(() => fs.rmSync(tmp, { recursive: true, force: true }));

  const ckptPath = path.join(tmp, 'ckpt.json');
  writeCheckpoint(ckptPath, 4);
  const utts: Array<[string, number, number]> = [
    ['utt1', 11, 1.0],
    ['utt2', 22, 1.2],
    ['utt3', 33, 1.5],
  ];
  for (const [id, seed, seconds] of utts) {
    writeWav(path.join(tmp, `${id}.wav`), seed, seconds);
  }
  const out = path.join(tmp, 'exported');
  const result = runExport({
    checkpoint: ckptPath,
    tap: 'conv2',
    out,
    wavs: utts.map(([id]) => path.join(tmp, `${id}.wav`)),
    weightsOnly: false,
  });

  it('exported all three utterances', () => {
    expect(result.exported).toEqual(['utt1', 'utt2', 'utt3']);
    expect(result.failed).toEqual([]);
  });

  it('writes tensors the strict reader accepts', { timeout: 30_000 }, () => {
    const res = python(
      `
import sys
from pathlib import Path
from peakscope.tensorio import read_tensor

out = Path(sys.argv[1])
for name in sorted(p.relative_to(out).as_posix() for p in out.rglob("*.npy")):
    t = read_tensor(out / name)
    print(name, t.dtype.str, "x".join(map(str, t.shape)))
`,
      out,
    );
    expect(res.stderr).toBe('');
    expect(res.status).toBe(0);
    const lines = res.stdout.trim().split('\n');
    expect(lines).toHaveLength(8); // 5 weight tensors + 3 activation tensors
    expect(lines).toContain('weights/conv1.npy <f4 8x1x40');
    expect(lines).toContain('weights/bn1.npy <f4 2x8');
    expect(lines).toContain('activations/utt1.npy <f4 98x16');
    expect(lines).toContain('activations/utt3.npy <f4 148x16');
  });

  it('writes a manifest the toolkit loads with true tap geometry', { timeout: 30_000 }, () => {
    const res = python(
      `
import sys
from peakscope.tensorio import read_manifest

corpus = read_manifest(sys.argv[1])
print(corpus.frame_shift_ms, corpus.frame_offset_ms, ",".join(corpus.ids()))
`,
      path.join(out, 'manifest.json'),
    );
    expect(res.stderr).toBe('');
    expect(res.status).toBe(0);
    expect(res.stdout.trim()).toBe('10.0 12.5 utt1,utt2,utt3');
  });

  it('matches the toolkit forward pass on every utterance', { timeout: 60_000 }, () => {
    // Hand the toolkit the exact features the export ran on, in float64,
    // so the only differences left are arithmetic order and the float32
    // quantization of the stored activations.
    const ckpt = loadCheckpoint(ckptPath);
    const cfg = melConfigOf(ckpt);
    const featsDir = path.join(tmp, 'features');
    fs.mkdirSync(featsDir, { recursive: true });
    for (const [id] of utts) {
      const spec = melspec(readWav(path.join(tmp, `${id}.wav`)), cfg);
      writeNpy(path.join(featsDir, `${id}.npy`), {
        descr: '<f8',
        shape: [spec.nFrames, spec.nMels],
        data: spec.frames,
      });
    }
    const res = python(
      `
import sys
import numpy as np
from peakscope.convnet import forward, load_stack
from peakscope.tensorio import read_manifest, read_tensor

out, feats = sys.argv[1], sys.argv[2]
stack = load_stack(out + "/stack.json", out + "/weights")
corpus = read_manifest(out + "/manifest.json")
for entry in corpus.entries:
    frames = read_tensor(feats + "/" + entry.utterance_id + ".npy")
    amap = forward(stack, (frames, 10.0, 12.5), "relu2")
    assert amap.frame_shift_ms == corpus.frame_shift_ms
    assert amap.frame_offset_ms == corpus.frame_offset_ms
    ref = read_tensor(corpus.path(entry.activations)).astype(np.float64)
    assert amap.values.shape == ref.shape, (amap.values.shape, ref.shape)
    print(entry.utterance_id, float(np.abs(amap.values - ref).max()), float((ref > 0).mean()))
`,
      out,
      featsDir,
    );
    expect(res.stderr).toBe('');
    expect(res.status).toBe(0);
    const rows = res.stdout
      .trim()
      .split('\n')
      .map((line) => {
        const [id, diff, active] = line.split(' ');
        return { id, diff: parseFloat(diff), active: parseFloat(active) };
      });
    expect(rows.map((r) => r.id)).toEqual(['utt1', 'utt2', 'utt3']);
    for (const { id, diff, active } of rows) {
      expect(diff, `toolkit mismatch on ${id}`).toBeLessThan(1e-4);
      // a meaningful comparison needs live activations, not a dead relu
      expect(active, `dead activations on ${id}`).toBeGreaterThan(0.05);
    }
  });
});

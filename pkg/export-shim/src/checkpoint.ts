/**
 * Checkpoint loading for the audio branch of a trained model.
 *
 * Checkpoints are JSON: a frontend block describing the feature geometry and
 * an ordered module list with float32 weights stored as base64. Module names
 * follow the training framework's dotted paths, which have drifted across
 * releases; LAYER_TABLE below pins every spelling we accept to the short
 * layer name the export uses.
 */

import * as fs from 'node:fs';

/**
 * Known framework names -> exported layer names. Names not listed here fall
 * back to the last dotted segment, so only genuinely irregular spellings
 * need an entry.
 */
const LAYER_TABLE: Record<string, string> = {
  'audio_model.conv1': 'conv1',
  'audio_model.bn1': 'bn1',
  'audio_model.conv2': 'conv2',
  'audio_model.conv3': 'conv3',
  'audio_model.conv4': 'conv4',
  'audio_model.conv5': 'conv5',
  'module.audio_model.conv1': 'conv1',
  'module.audio_model.bn1': 'bn1',
  'module.audio_model.conv2': 'conv2',
  'module.audio_model.conv3': 'conv3',
  'module.audio_model.conv4': 'conv4',
  'module.audio_model.conv5': 'conv5',
  'audio.batchnorm1': 'bn1',
};

export interface FrontendSpec {
  sample_rate: number;
  window_ms: number;
  shift_ms: number;
  n_fft: number;
  n_mels: number;
}

export interface Conv2dModule {
  kind: 'Conv2d';
  name: string;
  in_channels: number;
  out_channels: number;
  kernel: [number, number];
  stride: [number, number];
  pad: [number, number];
  /** (out, in, k_t, k_f) C-order. */
  weight: Float64Array;
}

export interface Conv1dModule {
  kind: 'Conv1d';
  name: string;
  in_channels: number;
  out_channels: number;
  kernel: number;
  stride: number;
  pad: number;
  /** (out, in, k) C-order. */
  weight: Float64Array;
}

export interface BatchNorm2dModule {
  kind: 'BatchNorm2d';
  name: string;
  channels: number;
  eps: number;
  gamma: Float64Array;
  beta: Float64Array;
  running_mean: Float64Array;
  running_var: Float64Array;
}

export interface ReLUModule {
  kind: 'ReLU';
  name: string;
}

export interface MaxPool2dModule {
  kind: 'MaxPool2d';
  name: string;
  /** Pooling along time only. */
  width: number;
  stride: number;
}

export type Module =
  | Conv2dModule
  | Conv1dModule
  | BatchNorm2dModule
  | ReLUModule
  | MaxPool2dModule;

export interface Checkpoint {
  frontend: FrontendSpec;
  modules: Module[];
}

export function exportName(frameworkName: string): string {
  const pinned = LAYER_TABLE[frameworkName];
  if (pinned !== undefined) return pinned;
  const parts = frameworkName.split('.');
  return parts[parts.length - 1];
}

function floatsFromBase64(b64: string, what: string): Float64Array {
  const raw = Buffer.from(b64, 'base64');
  if (raw.length % 4 !== 0) {
    throw new Error(`${what}: base64 payload is ${raw.length} bytes, not a float32 array`);
  }
  const out = new Float64Array(raw.length / 4);
  for (let i = 0; i < out.length; i++) out[i] = raw.readFloatLE(i * 4);
  return out;
}

function intPair(v: unknown, what: string): [number, number] {
  if (!Array.isArray(v) || v.length !== 2 || !v.every((x) => Number.isInteger(x))) {
    throw new Error(`${what} must be a pair of integers`);
  }
  return [v[0], v[1]];
}

function expectCount(arr: Float64Array, n: number, what: string): Float64Array {
  if (arr.length !== n) throw new Error(`${what}: expected ${n} values, got ${arr.length}`);
  return arr;
}

/* eslint-disable @typescript-eslint/no-explicit-any */
function parseModule(raw: any): Module {
  const frameworkName = String(raw.name ?? '');
  if (!frameworkName) throw new Error('module record has no name');
  const name = exportName(frameworkName);
  const kind = String(raw.kind ?? '');
  switch (kind) {
    case 'Conv2d': {
      const kernel = intPair(raw.kernel, `${name}: kernel`);
      const stride = intPair(raw.stride ?? [1, 1], `${name}: stride`);
      const pad = intPair(raw.pad ?? [0, 0], `${name}: pad`);
      const inC = raw.in_channels | 0;
      const outC = raw.out_channels | 0;
      const weight = expectCount(
        floatsFromBase64(String(raw.weight ?? ''), `${name}: weight`),
        outC * inC * kernel[0] * kernel[1],
        `${name}: weight`,
      );
      return { kind, name, in_channels: inC, out_channels: outC, kernel, stride, pad, weight };
    }
    case 'Conv1d': {
      const kernel = raw.kernel | 0;
      const inC = raw.in_channels | 0;
      const outC = raw.out_channels | 0;
      const weight = expectCount(
        floatsFromBase64(String(raw.weight ?? ''), `${name}: weight`),
        outC * inC * kernel,
        `${name}: weight`,
      );
      return {
        kind,
        name,
        in_channels: inC,
        out_channels: outC,
        kernel,
        stride: raw.stride === undefined ? 1 : raw.stride | 0,
        pad: raw.pad === undefined ? 0 : raw.pad | 0,
        weight,
      };
    }
    case 'BatchNorm2d': {
      const channels = raw.channels | 0;
      return {
        kind,
        name,
        channels,
        eps: Number(raw.eps ?? 1e-5),
        gamma: expectCount(floatsFromBase64(String(raw.gamma ?? ''), `${name}: gamma`), channels, `${name}: gamma`),
        beta: expectCount(floatsFromBase64(String(raw.beta ?? ''), `${name}: beta`), channels, `${name}: beta`),
        running_mean: expectCount(
          floatsFromBase64(String(raw.running_mean ?? ''), `${name}: running_mean`),
          channels,
          `${name}: running_mean`,
        ),
        running_var: expectCount(
          floatsFromBase64(String(raw.running_var ?? ''), `${name}: running_var`),
          channels,
          `${name}: running_var`,
        ),
      };
    }
    case 'ReLU':
      return { kind, name };
    case 'MaxPool2d':
      return {
        kind,
        name,
        width: raw.width | 0,
        stride: raw.stride === undefined ? raw.width | 0 : raw.stride | 0,
      };
    default:
      throw new Error(`unsupported layer kinds: ${name} (${kind || 'missing kind'})`);
  }
}
/* eslint-enable @typescript-eslint/no-explicit-any */

export function loadCheckpoint(path: string): Checkpoint {
  const doc = JSON.parse(fs.readFileSync(path, 'utf8'));
  if (doc.format !== 'davenet-audio-v1') {
    throw new Error(`unrecognized checkpoint format ${JSON.stringify(doc.format)}`);
  }
  const fe = doc.frontend ?? {};
  const frontend: FrontendSpec = {
    sample_rate: fe.sample_rate | 0 || 16000,
    window_ms: Number(fe.window_ms ?? 25.0),
    shift_ms: Number(fe.shift_ms ?? 10.0),
    n_fft: fe.n_fft | 0 || 512,
    n_mels: fe.n_mels | 0 || 40,
  };
  if (!Array.isArray(doc.modules) || doc.modules.length === 0) {
    throw new Error('checkpoint has no modules');
  }

  // Collect every unsupported kind before failing so the error names them all.
  const modules: Module[] = [];
  const unsupported: string[] = [];
  for (const raw of doc.modules) {
    try {
      modules.push(parseModule(raw));
    } catch (err) {
      const msg = err instanceof Error ? err.message : String(err);
      if (msg.startsWith('unsupported layer kinds:')) {
        unsupported.push(msg.slice('unsupported layer kinds:'.length).trim());
      } else {
        throw err;
      }
    }
  }
  if (unsupported.length > 0) {
    throw new Error(`unsupported layer kinds: ${unsupported.join(', ')}`);
  }
  return { frontend, modules };
}

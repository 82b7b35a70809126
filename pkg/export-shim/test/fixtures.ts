/**
 * Shared test fixtures: a deterministic five-weight-layer checkpoint in the
 * JSON schema the loader expects, and synthetic PCM16 wav files.
 */

import * as fs from 'node:fs';

/** Small deterministic PRNG so fixtures are stable across runs. */
export function mulberry32(seed: number): () => number {
  let a = seed >>> 0;
  return () => {
    a = (a + 0x6d2b79f5) >>> 0;
    let t = a;
    t = Math.imul(t ^ (t >>> 15), t | 1);
    t ^= t + Math.imul(t ^ (t >>> 7), t | 61);
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

function randomF32Base64(n: number, rng: () => number, lo: number, hi: number): string {
  const arr = new Float32Array(n);
  for (let i = 0; i < n; i++) arr[i] = lo + (hi - lo) * rng();
  return Buffer.from(arr.buffer, arr.byteOffset, arr.byteLength).toString('base64');
}

/**
 * A checkpoint whose audio branch mirrors the usual shape: a full-height
 * spectral conv collapsing the freq axis, batchnorm, then temporal convs
 * with one pooling stage. Five weighted layers. The conv2 activation block
 * spans 11 input frames, a 125 ms receptive field at 10 ms shift.
 */
export function makeCheckpoint(seed: number): Record<string, unknown> {
  const rng = mulberry32(seed);
  const conv = (n: number) => randomF32Base64(n, rng, -0.1, 0.1);
  return {
    format: 'davenet-audio-v1',
    frontend: { sample_rate: 16000, window_ms: 25.0, shift_ms: 10.0, n_fft: 512, n_mels: 40 },
    modules: [
      {
        name: 'audio_model.conv1',
        kind: 'Conv2d',
        in_channels: 1,
        out_channels: 8,
        kernel: [1, 40],
        stride: [1, 1],
        pad: [0, 0],
        weight: conv(8 * 1 * 1 * 40),
      },
      {
        name: 'audio.batchnorm1',
        kind: 'BatchNorm2d',
        channels: 8,
        eps: 1e-5,
        gamma: randomF32Base64(8, rng, 0.5, 1.5),
        beta: randomF32Base64(8, rng, -0.5, 0.5),
        running_mean: randomF32Base64(8, rng, -1.0, 1.0),
        running_var: randomF32Base64(8, rng, 0.5, 2.0),
      },
      { name: 'audio_model.relu1', kind: 'ReLU' },
      {
        name: 'audio_model.conv2',
        kind: 'Conv2d',
        in_channels: 8,
        out_channels: 16,
        kernel: [11, 1],
        stride: [1, 1],
        pad: [5, 0],
        weight: conv(16 * 8 * 11 * 1),
      },
      { name: 'audio_model.relu2', kind: 'ReLU' },
      { name: 'audio_model.pool2', kind: 'MaxPool2d', width: 4, stride: 2 },
      {
        name: 'audio_model.conv3',
        kind: 'Conv2d',
        in_channels: 16,
        out_channels: 24,
        kernel: [17, 1],
        stride: [1, 1],
        pad: [0, 0],
        weight: conv(24 * 16 * 17 * 1),
      },
      { name: 'audio_model.relu3', kind: 'ReLU' },
      {
        name: 'audio_model.conv4',
        kind: 'Conv1d',
        in_channels: 24,
        out_channels: 32,
        kernel: 9,
        stride: 1,
        pad: 4,
        weight: conv(32 * 24 * 9),
      },
      { name: 'audio_model.relu4', kind: 'ReLU' },
    ],
  };
}

export function writeCheckpoint(path: string, seed = 1): void {
  fs.writeFileSync(path, JSON.stringify(makeCheckpoint(seed), null, 2) + '\n');
}

/**
 * Write a mono PCM16 wav: a sequence of short two-tone notes at varying
 * levels, so spectra change over time and conv activations have real
 * dynamic range instead of a stationary hum.
 */
export function writeWav(path: string, seed: number, seconds = 1.2, rate = 16000): void {
  const rng = mulberry32(seed);
  const n = Math.round(seconds * rate);
  const note = Math.round(0.12 * rate);
  const pcm = Buffer.alloc(n * 2);
  let f1 = 0;
  let f2 = 0;
  let amp = 0;
  for (let i = 0; i < n; i++) {
    if (i % note === 0) {
      f1 = 150 + 400 * rng();
      f2 = 800 + 2700 * rng();
      amp = 0.15 + 0.6 * rng();
    }
    const t = i / rate;
    const v =
      amp * (0.7 * Math.sin(2 * Math.PI * f1 * t) + 0.3 * Math.sin(2 * Math.PI * f2 * t)) +
      0.01 * (rng() - 0.5);
    pcm.writeInt16LE(Math.max(-32768, Math.min(32767, Math.round(v * 32767))), i * 2);
  }
  const header = Buffer.alloc(44);
  header.write('RIFF', 0, 'latin1');
  header.writeUInt32LE(36 + pcm.length, 4);
  header.write('WAVE', 8, 'latin1');
  header.write('fmt ', 12, 'latin1');
  header.writeUInt32LE(16, 16);
  header.writeUInt16LE(1, 20); // PCM
  header.writeUInt16LE(1, 22); // mono
  header.writeUInt32LE(rate, 24);
  header.writeUInt32LE(rate * 2, 28); // byte rate
  header.writeUInt16LE(2, 32); // block align
  header.writeUInt16LE(16, 34); // bits
  header.write('data', 36, 'latin1');
  header.writeUInt32LE(pcm.length, 40);
  fs.writeFileSync(path, Buffer.concat([header, pcm]));
}

/**
 * Audio ingestion and log mel-filterbank features.
 *
 * The arithmetic mirrors the toolkit's feature extractor bin for bin:
 * preemphasis, Hamming window, zero-padded power FFT, HTK-scale triangular
 * mel filters with unit area in Hz, floor, natural log. Activations exported
 * from these features line up with what the toolkit computes from the same
 * audio to well under the equivalence tolerance.
 */

import * as fs from 'node:fs';
import FFT from 'fft.js';

export interface Waveform {
  samples: Float64Array;
  sampleRate: number;
}

export interface MelConfig {
  sample_rate: number;
  window_ms: number;
  shift_ms: number;
  n_fft: number;
  n_mels: number;
  fmin: number;
  fmax: number;
  preemphasis: number;
  log_floor: number;
}

export const DEFAULT_MEL: MelConfig = {
  sample_rate: 16000,
  window_ms: 25.0,
  shift_ms: 10.0,
  n_fft: 512,
  n_mels: 40,
  fmin: 20.0,
  fmax: 8000.0,
  preemphasis: 0.97,
  log_floor: 1e-10,
};

/** Read a mono PCM16 RIFF/WAVE file, scaling samples by 1/32768. */
export function readWav(path: string): Waveform {
  const blob = fs.readFileSync(path);
  if (blob.length < 12 || blob.toString('latin1', 0, 4) !== 'RIFF' || blob.toString('latin1', 8, 12) !== 'WAVE') {
    throw new Error(`${path}: not a RIFF/WAVE file`);
  }
  let pos = 12;
  let rate = 0;
  let channels = 0;
  let bits = 0;
  let data: Buffer | null = null;
  while (pos + 8 <= blob.length) {
    const tag = blob.toString('latin1', pos, pos + 4);
    const size = blob.readUInt32LE(pos + 4);
    const body = blob.subarray(pos + 8, pos + 8 + size);
    if (tag === 'fmt ') {
      const fmt = body.readUInt16LE(0);
      if (fmt !== 1) throw new Error(`${path}: PCM required, got format tag ${fmt}`);
      channels = body.readUInt16LE(2);
      rate = body.readUInt32LE(4);
      bits = body.readUInt16LE(14);
    } else if (tag === 'data') {
      data = body;
    }
    pos += 8 + size + (size % 2); // chunks are word-aligned
  }
  if (rate === 0 || data === null) throw new Error(`${path}: missing fmt or data chunk`);
  if (channels !== 1) throw new Error(`${path}: mono required, got ${channels} channels`);
  if (bits !== 16) throw new Error(`${path}: PCM16 required, got ${bits}-bit`);
  const n = Math.floor(data.length / 2);
  if (n === 0) throw new Error(`${path}: empty waveform`);
  const samples = new Float64Array(n);
  for (let i = 0; i < n; i++) samples[i] = data.readInt16LE(i * 2) / 32768.0;
  return { samples, sampleRate: rate };
}

function hzToMel(f: number): number {
  return 2595.0 * Math.log10(1.0 + f / 700.0);
}

function melToHz(m: number): number {
  return 700.0 * (Math.pow(10.0, m / 2595.0) - 1.0);
}

/** n_mels x (n_fft/2 + 1) triangular filters, each with unit area in Hz. */
export function melFilterbank(cfg: MelConfig): Float64Array[] {
  const nBins = Math.floor(cfg.n_fft / 2) + 1;
  const melLo = hzToMel(cfg.fmin);
  const melHi = hzToMel(cfg.fmax);
  const edges = new Float64Array(cfg.n_mels + 2);
  for (let i = 0; i < edges.length; i++) {
    edges[i] = melToHz(melLo + ((melHi - melLo) * i) / (cfg.n_mels + 1));
  }
  const rows: Float64Array[] = [];
  for (let m = 0; m < cfg.n_mels; m++) {
    const lo = edges[m];
    const mid = edges[m + 1];
    const hi = edges[m + 2];
    const row = new Float64Array(nBins);
    for (let b = 0; b < nBins; b++) {
      const hz = (b * cfg.sample_rate) / cfg.n_fft;
      const tri = Math.max(0.0, Math.min((hz - lo) / (mid - lo), (hi - hz) / (hi - mid)));
      row[b] = tri * (2.0 / (hi - lo));
    }
    rows.push(row);
  }
  return rows;
}

export interface Spectrogram {
  /** frames x n_mels, C-order. */
  frames: Float64Array;
  nFrames: number;
  nMels: number;
  config: MelConfig;
}

export function melspec(wave: Waveform, cfg: MelConfig = DEFAULT_MEL): Spectrogram {
  if (wave.sampleRate !== cfg.sample_rate) {
    throw new Error(`waveform rate ${wave.sampleRate} != config rate ${cfg.sample_rate}`);
  }
  if ((cfg.n_fft & (cfg.n_fft - 1)) !== 0) {
    throw new Error(`n_fft must be a power of two, got ${cfg.n_fft}`);
  }
  const win = Math.round((cfg.window_ms * cfg.sample_rate) / 1000.0);
  const shift = Math.round((cfg.shift_ms * cfg.sample_rate) / 1000.0);
  if (cfg.n_fft < win) throw new Error(`n_fft ${cfg.n_fft} < window of ${win} samples`);
  let x = wave.samples;
  if (x.length < win) {
    throw new Error(`waveform of ${x.length} samples shorter than one ${win}-sample window`);
  }
  if (cfg.preemphasis > 0) {
    const y = new Float64Array(x.length);
    y[0] = x[0];
    for (let i = 1; i < x.length; i++) y[i] = x[i] - cfg.preemphasis * x[i - 1];
    x = y;
  }
  const hamming = new Float64Array(win);
  for (let i = 0; i < win; i++) hamming[i] = 0.54 - 0.46 * Math.cos((2 * Math.PI * i) / (win - 1));

  const nFrames = 1 + Math.floor((x.length - win) / shift);
  const nBins = Math.floor(cfg.n_fft / 2) + 1;
  const bank = melFilterbank(cfg);
  const fft = new FFT(cfg.n_fft);
  const spectrum = fft.createComplexArray();
  const padded = new Float64Array(cfg.n_fft);
  const power = new Float64Array(nBins);
  const out = new Float64Array(nFrames * cfg.n_mels);
  for (let t = 0; t < nFrames; t++) {
    padded.fill(0);
    for (let i = 0; i < win; i++) padded[i] = x[t * shift + i] * hamming[i];
    fft.realTransform(spectrum, padded);
    fft.completeSpectrum(spectrum);
    for (let b = 0; b < nBins; b++) {
      const re = spectrum[2 * b];
      const im = spectrum[2 * b + 1];
      power[b] = re * re + im * im;
    }
    for (let m = 0; m < cfg.n_mels; m++) {
      let acc = 0;
      const row = bank[m];
      for (let b = 0; b < nBins; b++) acc += row[b] * power[b];
      out[t * cfg.n_mels + m] = Math.log(Math.max(acc, cfg.log_floor));
    }
  }
  return { frames: out, nFrames, nMels: cfg.n_mels, config: cfg };
}

/**
 * Reference forward pass over checkpoint modules.
 *
 * Feature maps are (channels, time, freq) in C order. Straightforward loops,
 * no blocking: the point is a trustworthy mirror of the training framework's
 * arithmetic for equivalence checks and activation export, not speed.
 */

import type { Checkpoint, Module } from './checkpoint.js';

export interface Fmap {
  channels: number;
  time: number;
  freq: number;
  /** (channels, time, freq) C-order. */
  data: Float64Array;
}

export function zeros(channels: number, time: number, freq: number): Fmap {
  return { channels, time, freq, data: new Float64Array(channels * time * freq) };
}

export function at(m: Fmap, c: number, t: number, f: number): number {
  return m.data[(c * m.time + t) * m.freq + f];
}

function conv2d(
  x: Fmap,
  outC: number,
  inC: number,
  kernel: [number, number],
  stride: [number, number],
  pad: [number, number],
  weight: Float64Array,
): Fmap {
  if (x.channels !== inC) {
    throw new Error(`conv2d expects ${inC} input channels, got ${x.channels}`);
  }
  const [kt, kf] = kernel;
  const [st, sf] = stride;
  const [pt, pf] = pad;
  const outT = Math.floor((x.time + 2 * pt - kt) / st) + 1;
  const outF = Math.floor((x.freq + 2 * pf - kf) / sf) + 1;
  if (outT < 1 || outF < 1) {
    throw new Error(`conv2d output would be ${outT}x${outF} for input ${x.time}x${x.freq}`);
  }
  const y = zeros(outC, outT, outF);
  for (let oc = 0; oc < outC; oc++) {
    for (let ot = 0; ot < outT; ot++) {
      for (let of = 0; of < outF; of++) {
        let acc = 0;
        for (let ic = 0; ic < inC; ic++) {
          for (let dt = 0; dt < kt; dt++) {
            const t = ot * st + dt - pt;
            if (t < 0 || t >= x.time) continue;
            for (let df = 0; df < kf; df++) {
              const f = of * sf + df - pf;
              if (f < 0 || f >= x.freq) continue;
              acc +=
                weight[((oc * inC + ic) * kt + dt) * kf + df] *
                x.data[(ic * x.time + t) * x.freq + f];
            }
          }
        }
        y.data[(oc * outT + ot) * outF + of] = acc;
      }
    }
  }
  return y;
}

export function applyModule(x: Fmap, mod: Module): Fmap {
  switch (mod.kind) {
    case 'Conv2d':
      return conv2d(x, mod.out_channels, mod.in_channels, mod.kernel, mod.stride, mod.pad, mod.weight);
    case 'Conv1d': {
      // A 1-d conv over time is a 2-d conv with unit frequency extent; by the
      // time one appears the freq axis has collapsed to 1.
      if (x.freq !== 1) {
        throw new Error(`conv1d needs a collapsed freq axis, got freq=${x.freq}`);
      }
      return conv2d(
        x,
        mod.out_channels,
        mod.in_channels,
        [mod.kernel, 1],
        [mod.stride, 1],
        [mod.pad, 0],
        mod.weight,
      );
    }
    case 'BatchNorm2d': {
      if (x.channels !== mod.channels) {
        throw new Error(`batchnorm expects ${mod.channels} channels, got ${x.channels}`);
      }
      const y = zeros(x.channels, x.time, x.freq);
      const plane = x.time * x.freq;
      for (let c = 0; c < x.channels; c++) {
        const scale = mod.gamma[c] / Math.sqrt(mod.running_var[c] + mod.eps);
        const shift = mod.beta[c] - mod.running_mean[c] * scale;
        for (let i = 0; i < plane; i++) {
          y.data[c * plane + i] = x.data[c * plane + i] * scale + shift;
        }
      }
      return y;
    }
    case 'ReLU': {
      const y = zeros(x.channels, x.time, x.freq);
      for (let i = 0; i < x.data.length; i++) y.data[i] = Math.max(0, x.data[i]);
      return y;
    }
    case 'MaxPool2d': {
      const outT = Math.floor((x.time - mod.width) / mod.stride) + 1;
      if (outT < 1) throw new Error(`maxpool output would be empty for ${x.time} frames`);
      const y = zeros(x.channels, outT, x.freq);
      for (let c = 0; c < x.channels; c++) {
        for (let ot = 0; ot < outT; ot++) {
          for (let f = 0; f < x.freq; f++) {
            let best = -Infinity;
            for (let d = 0; d < mod.width; d++) {
              best = Math.max(best, at(x, c, ot * mod.stride + d, f));
            }
            y.data[(c * outT + ot) * x.freq + f] = best;
          }
        }
      }
      return y;
    }
  }
}

/**
 * Index of the last module in the tap layer's activation block: the named
 * layer plus any immediately following BatchNorm2d/ReLU. Activations are
 * taken after the nonlinearity but before any pooling.
 */
export function tapEnd(modules: Module[], tap: string): number {
  const idx = modules.findIndex((m) => m.name === tap);
  if (idx < 0) {
    const names = modules.map((m) => m.name).join(', ');
    throw new Error(`tap layer '${tap}' not in checkpoint (have: ${names})`);
  }
  let end = idx;
  while (end + 1 < modules.length) {
    const kind = modules[end + 1].kind;
    if (kind === 'BatchNorm2d' || kind === 'ReLU') end += 1;
    else break;
  }
  return end;
}

/** Run the model up to and including the tap layer's activation block. */
export function forwardTo(modules: Module[], x: Fmap, tap: string): Fmap {
  const end = tapEnd(modules, tap);
  let cur = x;
  for (let i = 0; i <= end; i++) cur = applyModule(cur, modules[i]);
  return cur;
}

/** Run the complete module list. */
export function forwardAll(modules: Module[], x: Fmap): Fmap {
  let cur = x;
  for (const mod of modules) cur = applyModule(cur, mod);
  return cur;
}

/** Collapse (C, T, F) to (T, C*F) with channel-major columns. */
export function flattenFrames(m: Fmap): { frames: number; width: number; data: Float64Array } {
  const width = m.channels * m.freq;
  const out = new Float64Array(m.time * width);
  for (let t = 0; t < m.time; t++) {
    for (let c = 0; c < m.channels; c++) {
      for (let f = 0; f < m.freq; f++) {
        out[t * width + c * m.freq + f] = at(m, c, t, f);
      }
    }
  }
  return { frames: m.time, width, data: out };
}

export interface TimeGeometry {
  shift_ms: number;
  offset_ms: number;
  window_ms: number;
  /** Receptive field span in input frames at the tap. */
  span: number;
}

/**
 * Frame timing at the tap layer, composed layer by layer from the frontend
 * geometry. Offsets move by the left context a kernel consumes; shifts
 * multiply by strides; the span recurrence mirrors the toolkit's.
 */
export function timeGeometry(ckpt: Checkpoint, tap: string): TimeGeometry {
  const end = tapEnd(ckpt.modules, tap);
  let shift = ckpt.frontend.shift_ms;
  let offset = ckpt.frontend.window_ms / 2;
  let span = 1;
  let jump = 1;
  for (let i = 0; i <= end; i++) {
    const mod = ckpt.modules[i];
    if (mod.kind === 'Conv2d') {
      const [kt] = mod.kernel;
      const [st] = mod.stride;
      const [pt] = mod.pad;
      offset += ((kt - 1) / 2 - pt) * shift;
      span += (kt - 1) * jump;
      jump *= st;
      shift *= st;
    } else if (mod.kind === 'Conv1d') {
      offset += ((mod.kernel - 1) / 2 - mod.pad) * shift;
      span += (mod.kernel - 1) * jump;
      jump *= mod.stride;
      shift *= mod.stride;
    } else if (mod.kind === 'MaxPool2d') {
      offset += ((mod.width - 1) / 2) * shift;
      span += (mod.width - 1) * jump;
      jump *= mod.stride;
      shift *= mod.stride;
    }
  }
  return { shift_ms: shift, offset_ms: offset, window_ms: ckpt.frontend.window_ms, span };
}

/** Receptive field extent in milliseconds at the tap layer. */
export function receptiveFieldMs(ckpt: Checkpoint, tap: string): number {
  const geo = timeGeometry(ckpt, tap);
  return (geo.span - 1) * ckpt.frontend.shift_ms + ckpt.frontend.window_ms;
}

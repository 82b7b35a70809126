/**
 * Batchnorm folding. The toolkit consumes batchnorm in inference form, a
 * per-channel scale and shift, so the four raw vectors in a checkpoint are
 * collapsed here:
 *
 *   scale = gamma / sqrt(running_var + eps)
 *   shift = beta - running_mean * scale
 *
 * assertFoldEquivalence reruns the full model both ways on a probe input
 * and refuses the export if they disagree, so a bad fold can never reach
 * disk.
 */

import type { BatchNorm2dModule, Checkpoint, Module } from './checkpoint.js';
import { forwardAll, zeros, type Fmap } from './forward.js';

export interface FoldedNorm {
  name: string;
  channels: number;
  scale: Float64Array;
  shift: Float64Array;
}

export function foldBatchNorm(mod: BatchNorm2dModule): FoldedNorm {
  const scale = new Float64Array(mod.channels);
  const shift = new Float64Array(mod.channels);
  for (let c = 0; c < mod.channels; c++) {
    scale[c] = mod.gamma[c] / Math.sqrt(mod.running_var[c] + mod.eps);
    shift[c] = mod.beta[c] - mod.running_mean[c] * scale[c];
  }
  return { name: mod.name, channels: mod.channels, scale, shift };
}

/** Replace a batchnorm with the affine module its folded form computes. */
function asAffine(folded: FoldedNorm): BatchNorm2dModule {
  const gamma = Float64Array.from(folded.scale);
  const beta = Float64Array.from(folded.shift);
  return {
    kind: 'BatchNorm2d',
    name: folded.name,
    channels: folded.channels,
    eps: 0,
    gamma,
    beta,
    running_mean: new Float64Array(folded.channels),
    running_var: new Float64Array(folded.channels).fill(1),
  };
}

function probeInput(ckpt: Checkpoint, frames: number): Fmap {
  const x = zeros(1, frames, ckpt.frontend.n_mels);
  // Deterministic non-trivial probe: a fixed quasi-random fill.
  let state = 0x9e3779b9;
  for (let i = 0; i < x.data.length; i++) {
    state = (state * 1664525 + 1013904223) >>> 0;
    x.data[i] = state / 0xffffffff - 0.5;
  }
  return x;
}

/**
 * Run the model with raw and folded batchnorms on a probe input and check
 * the outputs agree to within tol. Throws if they do not.
 */
export function assertFoldEquivalence(ckpt: Checkpoint, tol = 1e-5, frames = 64): void {
  const foldedModules: Module[] = ckpt.modules.map((m) =>
    m.kind === 'BatchNorm2d' ? asAffine(foldBatchNorm(m)) : m,
  );
  const x = probeInput(ckpt, frames);
  const raw = forwardAll(ckpt.modules, x);
  const folded = forwardAll(foldedModules, x);
  if (raw.data.length !== folded.data.length) {
    throw new Error('fold check: output shapes diverged');
  }
  let worst = 0;
  for (let i = 0; i < raw.data.length; i++) {
    worst = Math.max(worst, Math.abs(raw.data[i] - folded.data[i]));
  }
  if (!(worst <= tol)) {
    throw new Error(`fold check failed: max |raw - folded| = ${worst.toExponential(3)} > ${tol}`);
  }
}

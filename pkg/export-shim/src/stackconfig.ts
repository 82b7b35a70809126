/**
 * Conversion from checkpoint modules to the toolkit's stack description:
 * a JSON layer list plus one weight tensor per weighted layer. Batchnorms
 * go out in folded form, (2, channels) with scale in row 0 and shift in
 * row 1, and a conv2d kernel's trailing (k_t, k_f) axes are flattened
 * row-major to keep weight files within the 3-axis tensor interchange.
 */

import type { Checkpoint, Module } from './checkpoint.js';
import { foldBatchNorm } from './fold.js';
import type { Tensor } from './npy.js';

type LayerRecord =
  | {
      name: string;
      kind: 'conv2d' | 'conv1d';
      in_channels: number;
      out_channels: number;
      kernel: number[];
      stride: number[];
      pad: number[];
    }
  | { name: string; kind: 'maxpool_time'; width: number; stride: number }
  | { name: string; kind: 'batchnorm'; channels: number }
  | { name: string; kind: 'relu' };

function layerRecord(mod: Module): LayerRecord {
  switch (mod.kind) {
    case 'Conv2d':
      return {
        name: mod.name,
        kind: 'conv2d',
        in_channels: mod.in_channels,
        out_channels: mod.out_channels,
        kernel: [...mod.kernel],
        stride: [...mod.stride],
        pad: [...mod.pad],
      };
    case 'Conv1d':
      return {
        name: mod.name,
        kind: 'conv1d',
        in_channels: mod.in_channels,
        out_channels: mod.out_channels,
        kernel: [mod.kernel],
        stride: [mod.stride],
        pad: [mod.pad],
      };
    case 'BatchNorm2d':
      return { name: mod.name, kind: 'batchnorm', channels: mod.channels };
    case 'ReLU':
      return { name: mod.name, kind: 'relu' };
    case 'MaxPool2d':
      return { name: mod.name, kind: 'maxpool_time', width: mod.width, stride: mod.stride };
  }
}

export function stackConfigJson(ckpt: Checkpoint): string {
  return JSON.stringify(ckpt.modules.map(layerRecord), null, 2) + '\n';
}

export interface WeightFile {
  layerName: string;
  tensor: Tensor;
}

/** One float32 tensor per weighted layer, in the on-disk layout above. */
export function weightFiles(ckpt: Checkpoint): WeightFile[] {
  const files: WeightFile[] = [];
  for (const mod of ckpt.modules) {
    if (mod.kind === 'Conv2d') {
      files.push({
        layerName: mod.name,
        tensor: {
          descr: '<f4',
          shape: [mod.out_channels, mod.in_channels, mod.kernel[0] * mod.kernel[1]],
          data: Float64Array.from(mod.weight),
        },
      });
    } else if (mod.kind === 'Conv1d') {
      files.push({
        layerName: mod.name,
        tensor: {
          descr: '<f4',
          shape: [mod.out_channels, mod.in_channels, mod.kernel],
          data: Float64Array.from(mod.weight),
        },
      });
    } else if (mod.kind === 'BatchNorm2d') {
      const folded = foldBatchNorm(mod);
      const data = new Float64Array(2 * mod.channels);
      data.set(folded.scale, 0);
      data.set(folded.shift, mod.channels);
      files.push({
        layerName: mod.name,
        tensor: { descr: '<f4', shape: [2, mod.channels], data },
      });
    }
  }
  return files;
}

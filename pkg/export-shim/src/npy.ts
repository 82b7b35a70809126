/**
 * Strict NPY v1.0 subset: little-endian float32/float64, C order, 1-3 axes,
 * header padded to a 64-byte boundary. This is the tensor interchange the
 * peakscope toolkit reads; anything outside the subset is rejected here so
 * a file we write is guaranteed to parse there.
 */

import * as fs from 'node:fs';

const MAGIC = Buffer.from('\x93NUMPY\x01\x00', 'latin1');

export type Descr = '<f4' | '<f8';

export interface Tensor {
  descr: Descr;
  shape: number[];
  /** C-order values; length must equal the product of shape. */
  data: Float64Array;
}

function checkShape(shape: number[]): number {
  if (shape.length < 1 || shape.length > 3) {
    throw new Error(`tensor must have 1-3 axes, got ${shape.length}`);
  }
  let count = 1;
  for (const n of shape) {
    if (!Number.isInteger(n) || n < 1) {
      throw new Error(`every axis must be a positive integer, got shape (${shape.join(', ')})`);
    }
    count *= n;
  }
  return count;
}

/** Serialize a tensor to NPY bytes. */
export function encodeNpy(tensor: Tensor): Buffer {
  const count = checkShape(tensor.shape);
  if (tensor.data.length !== count) {
    throw new Error(`data length ${tensor.data.length} does not match shape (${tensor.shape.join(', ')})`);
  }
  const shapeTxt =
    tensor.shape.length === 1 ? `(${tensor.shape[0]},)` : `(${tensor.shape.join(', ')})`;
  let header = `{'descr': '${tensor.descr}', 'fortran_order': False, 'shape': ${shapeTxt}, }`;
  const total = MAGIC.length + 2 + header.length + 1;
  const pad = (64 - (total % 64)) % 64;
  header = header + ' '.repeat(pad) + '\n';

  const itemSize = tensor.descr === '<f4' ? 4 : 8;
  const payload = Buffer.alloc(count * itemSize);
  if (tensor.descr === '<f4') {
    for (let i = 0; i < count; i++) payload.writeFloatLE(Math.fround(tensor.data[i]), i * 4);
  } else {
    for (let i = 0; i < count; i++) payload.writeDoubleLE(tensor.data[i], i * 8);
  }

  const head = Buffer.alloc(MAGIC.length + 2 + header.length);
  MAGIC.copy(head, 0);
  head.writeUInt16LE(header.length, MAGIC.length);
  head.write(header, MAGIC.length + 2, 'latin1');
  return Buffer.concat([head, payload]);
}

/** Parse NPY bytes, enforcing the same subset the toolkit's reader does. */
export function decodeNpy(blob: Buffer): Tensor {
  if (blob.length < MAGIC.length + 2 || !blob.subarray(0, 6).equals(MAGIC.subarray(0, 6))) {
    throw new Error('not an NPY file (bad magic)');
  }
  if (blob[6] !== 1 || blob[7] !== 0) {
    throw new Error(`unsupported NPY version ${blob[6]}.${blob[7]} (only 1.0)`);
  }
  const hlen = blob.readUInt16LE(8);
  if (blob.length < 10 + hlen) throw new Error('truncated header');
  const header = blob.subarray(10, 10 + hlen).toString('latin1');

  // The header is a Python dict literal; accept the canonical field order
  // with flexible spacing, nothing more.
  const m = header.match(
    /^\{\s*'descr':\s*'([^']+)'\s*,\s*'fortran_order':\s*(True|False)\s*,\s*'shape':\s*\(([^)]*)\)\s*,?\s*\}\s*$/,
  );
  if (!m) throw new Error('malformed header dict');
  const [, descr, fortran, shapeTxt] = m;
  if (fortran !== 'False') throw new Error('unsupported layout (fortran_order must be False)');
  if (descr !== '<f4' && descr !== '<f8') {
    throw new Error(`unsupported dtype descr '${descr}' (only '<f4'/'<f8')`);
  }
  const shape = shapeTxt
    .split(',')
    .map((s) => s.trim())
    .filter((s) => s.length > 0)
    .map((s) => {
      if (!/^\d+$/.test(s)) throw new Error(`unsupported shape (${shapeTxt})`);
      return parseInt(s, 10);
    });
  const count = checkShape(shape);

  const itemSize = descr === '<f4' ? 4 : 8;
  const payload = blob.subarray(10 + hlen);
  if (payload.length !== count * itemSize) {
    throw new Error(`payload is ${payload.length} bytes, expected ${count * itemSize}`);
  }
  const data = new Float64Array(count);
  if (descr === '<f4') {
    for (let i = 0; i < count; i++) data[i] = payload.readFloatLE(i * 4);
  } else {
    for (let i = 0; i < count; i++) data[i] = payload.readDoubleLE(i * 8);
  }
  return { descr, shape, data };
}

export function readNpy(path: string): Tensor {
  return decodeNpy(fs.readFileSync(path));
}

/** Write atomically: temp file in the same directory, then rename. */
export function writeNpy(path: string, tensor: Tensor): void {
  const tmp = `${path}.tmp`;
  fs.writeFileSync(tmp, encodeNpy(tensor));
  fs.renameSync(tmp, path);
}

/**
 * SECD tensor files, little-endian:
 * magic "SECD" | u16 version=1 | u8 dtype=1 (f32) | u8 ndim | ndim*u32 dims | f32 payload.
 */

import * as fs from "fs";

export const MAGIC = "SECD";
export const VERSION = 1;
export const DTYPE_F32 = 1;

export function encodeTensor(dims: number[], data: Float32Array): Buffer {
  const count = dims.reduce((a, b) => a * b, 1);
  if (count !== data.length) {
    throw new Error(`shape [${dims}] needs ${count} values, got ${data.length}`);
  }
  const header = Buffer.alloc(8 + 4 * dims.length);
  header.write(MAGIC, 0, "ascii");
  header.writeUInt16LE(VERSION, 4);
  header.writeUInt8(DTYPE_F32, 6);
  header.writeUInt8(dims.length, 7);
  dims.forEach((d, i) => header.writeUInt32LE(d, 8 + 4 * i));
  const payload = Buffer.alloc(4 * data.length);
  for (let i = 0; i < data.length; i++) payload.writeFloatLE(data[i], 4 * i);
  return Buffer.concat([header, payload]);
}

export function writeTensor(path: string, dims: number[], data: Float32Array): void {
  fs.writeFileSync(path, encodeTensor(dims, data));
}

/** Strict reader, used by the tests to verify what extraction wrote. */
export function readTensor(path: string): { dims: number[]; data: Float32Array } {
  const blob = fs.readFileSync(path);
  if (blob.length < 8) throw new Error(`${path}: shorter than the header`);
  if (blob.toString("ascii", 0, 4) !== MAGIC) throw new Error(`${path}: bad magic`);
  if (blob.readUInt16LE(4) !== VERSION) throw new Error(`${path}: unsupported version`);
  if (blob.readUInt8(6) !== DTYPE_F32) throw new Error(`${path}: unsupported dtype`);
  const ndim = blob.readUInt8(7);
  const dims: number[] = [];
  for (let i = 0; i < ndim; i++) dims.push(blob.readUInt32LE(8 + 4 * i));
  const count = dims.reduce((a, b) => a * b, 1);
  const start = 8 + 4 * ndim;
  if (blob.length !== start + 4 * count) {
    throw new Error(`${path}: payload length mismatch for shape [${dims}]`);
  }
  const data = new Float32Array(count);
  for (let i = 0; i < count; i++) data[i] = blob.readFloatLE(start + 4 * i);
  return { dims, data };
}

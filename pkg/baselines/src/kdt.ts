/**
 * Reader for KDT1 tensor exports and their sidecar manifest.
 *
 * Layout (little-endian): magic "KDT1", u32 sample count, u32 channels=5,
 * u32 rows=42, u32 cols=42, then per sample a u32 label followed by
 * 5*42*42 float32 values in channel-major, row-major order.
 */

import { readFileSync } from "node:fs";

export const CHANNELS = 5;
export const SIDE = 42;
export const FLAT_LENGTH = CHANNELS * SIDE * SIDE; // 8820

const MAGIC = "KDT1";
const HEADER_BYTES = 20;
const SAMPLE_BYTES = 4 + FLAT_LENGTH * 4;

export class BadMagicError extends Error {}
export class TruncatedFileError extends Error {}
export class DimensionMismatchError extends Error {}
export class ManifestMismatchError extends Error {}

export interface TensorSample {
  label: number;
  /** channel-major (c, row, col) values, length 8820 */
  values: Float32Array;
}

export interface Manifest {
  labels: Record<string, number>;
  split: Record<string, number[]>;
  window_length: number;
  standardized: boolean;
}

export interface KdtDataset {
  samples: TensorSample[];
  manifest: Manifest;
  train: number[];
  val: number[];
  test: number[];
}

export function readTensorFile(path: string): TensorSample[] {
  const data = readFileSync(path);
  if (data.length < 4 || data.toString("latin1", 0, 4) !== MAGIC) {
    throw new BadMagicError(`${path}: not a KDT1 file`);
  }
  if (data.length < HEADER_BYTES) {
    throw new TruncatedFileError(`${path}: header cut short`);
  }
  const count = data.readUInt32LE(4);
  const channels = data.readUInt32LE(8);
  const rows = data.readUInt32LE(12);
  const cols = data.readUInt32LE(16);
  if (channels !== CHANNELS || rows !== SIDE || cols !== SIDE) {
    throw new DimensionMismatchError(
      `${path}: dims ${channels}x${rows}x${cols}, expected 5x42x42`,
    );
  }
  const expected = HEADER_BYTES + count * SAMPLE_BYTES;
  if (data.length < expected) {
    throw new TruncatedFileError(`${path}: ${data.length} bytes, expected ${expected}`);
  }

  const samples: TensorSample[] = [];
  let offset = HEADER_BYTES;
  for (let i = 0; i < count; i++) {
    const label = data.readUInt32LE(offset);
    offset += 4;
    const values = new Float32Array(FLAT_LENGTH);
    for (let k = 0; k < FLAT_LENGTH; k++) {
      values[k] = data.readFloatLE(offset + 4 * k);
    }
    offset += FLAT_LENGTH * 4;
    samples.push({ label, values });
  }
  return samples;
}

export function readManifest(path: string, samples: TensorSample[]): Manifest {
  const raw = JSON.parse(readFileSync(path, "utf-8"));
  for (const field of ["labels", "split", "window_length", "standardized"]) {
    if (!(field in raw)) {
      throw new ManifestMismatchError(`${path}: missing field '${field}'`);
    }
  }
  const manifest = raw as Manifest;
  const known = new Set(Object.values(manifest.labels));
  for (const sample of samples) {
    if (!known.has(sample.label)) {
      throw new ManifestMismatchError(
        `${path}: sample label ${sample.label} not in label map`,
      );
    }
  }
  const seen = new Set<number>();
  for (const [name, indices] of Object.entries(manifest.split)) {
    for (const index of indices) {
      if (!Number.isInteger(index) || index < 0 || index >= samples.length) {
        throw new ManifestMismatchError(
          `${path}: split '${name}' index ${index} out of range`,
        );
      }
      if (seen.has(index)) {
        throw new ManifestMismatchError(`${path}: sample ${index} in multiple splits`);
      }
      seen.add(index);
    }
  }
  return manifest;
}

export function loadTensors(tensorPath: string, manifestPath: string): KdtDataset {
  const samples = readTensorFile(tensorPath);
  const manifest = readManifest(manifestPath, samples);
  return {
    samples,
    manifest,
    train: manifest.split.train ?? [],
    val: manifest.split.val ?? [],
    test: manifest.split.test ?? [],
  };
}

/** Transpose one channel-major sample to the HWC layout tfjs convolutions use. */
export function channelMajorToHwc(values: Float32Array): Float32Array {
  const out = new Float32Array(FLAT_LENGTH);
  for (let c = 0; c < CHANNELS; c++) {
    for (let r = 0; r < SIDE; r++) {
      for (let col = 0; col < SIDE; col++) {
        out[(r * SIDE + col) * CHANNELS + c] = values[(c * SIDE + r) * SIDE + col];
      }
    }
  }
  return out;
}

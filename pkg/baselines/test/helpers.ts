import { mkdtempSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";

import { FLAT_LENGTH, type Manifest, type TensorSample } from "../src/kdt.js";
import { mulberry32 } from "../src/prng.js";

export function tempDir(prefix: string): string {
  return mkdtempSync(join(tmpdir(), prefix));
}

/** Serialize samples in the KDT1 wire format, independent of any writer. */
export function kdtBytes(samples: TensorSample[]): Buffer {
  const buffer = Buffer.alloc(20 + samples.length * (4 + FLAT_LENGTH * 4));
  buffer.write("KDT1", 0, "latin1");
  buffer.writeUInt32LE(samples.length, 4);
  buffer.writeUInt32LE(5, 8);
  buffer.writeUInt32LE(42, 12);
  buffer.writeUInt32LE(42, 16);
  let offset = 20;
  for (const sample of samples) {
    buffer.writeUInt32LE(sample.label, offset);
    offset += 4;
    for (let k = 0; k < FLAT_LENGTH; k++) {
      buffer.writeFloatLE(sample.values[k], offset + 4 * k);
    }
    offset += FLAT_LENGTH * 4;
  }
  return buffer;
}

export function writeKdt(dir: string, name: string, samples: TensorSample[]): string {
  const path = join(dir, name);
  writeFileSync(path, kdtBytes(samples));
  return path;
}

export function writeManifest(dir: string, name: string, manifest: Manifest): string {
  const path = join(dir, name);
  writeFileSync(path, JSON.stringify(manifest) + "\n");
  return path;
}

/** Gaussian-ish noise via sum of uniforms. */
function noise(rng: () => number): number {
  return rng() + rng() + rng() - 1.5;
}

/**
 * Separable synthetic samples: class c carries a strong bump in its own
 * block of cells on top of weak noise, roughly standardized scale.
 */
export function separableSamples(
  numClasses: number,
  perClass: number,
  seed = 7,
): TensorSample[] {
  const rng = mulberry32(seed);
  const samples: TensorSample[] = [];
  for (let c = 0; c < numClasses; c++) {
    for (let s = 0; s < perClass; s++) {
      const values = new Float32Array(FLAT_LENGTH);
      for (let k = 0; k < FLAT_LENGTH; k++) values[k] = 0.1 * noise(rng);
      const base = (c * 211) % (FLAT_LENGTH - 32);
      for (let k = 0; k < 32; k++) values[base + k] = 2.5 + 0.1 * noise(rng);
      samples.push({ label: c, values });
    }
  }
  return samples;
}

export function defaultManifest(
  numClasses: number,
  counts: { train: number[]; val: number[]; test: number[] },
  windowLength = 100,
): Manifest {
  const labels: Record<string, number> = {};
  for (let c = 0; c < numClasses; c++) labels[`u${String(c).padStart(3, "0")}`] = c;
  return {
    labels,
    split: counts,
    window_length: windowLength,
    standardized: true,
  };
}

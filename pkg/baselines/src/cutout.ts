/**
 * Square cutout augmentation on channel-major 5x42x42 samples: zero the
 * covered cells across all five channels. Training-time only.
 */

import { CHANNELS, SIDE } from "./kdt.js";
import { mulberry32, randInt, type Rng } from "./prng.js";

export interface CutoutConfig {
  squareSize: number;
  count: number;
  probability: number;
}

export const DEFAULT_CUTOUT: CutoutConfig = {
  squareSize: 8,
  count: 1,
  probability: 0.5,
};

export function validateCutout(cfg: CutoutConfig): void {
  if (cfg.squareSize < 1 || cfg.squareSize > SIDE) {
    throw new Error(`squareSize must be in [1, ${SIDE}], got ${cfg.squareSize}`);
  }
  if (cfg.count < 0) throw new Error(`count must be >= 0, got ${cfg.count}`);
  if (cfg.probability < 0 || cfg.probability > 1) {
    throw new Error(`probability must be in [0, 1], got ${cfg.probability}`);
  }
}

/** Returns a fresh array; the input is never mutated. */
export function applyCutout(
  values: Float32Array,
  cfg: CutoutConfig,
  rng: Rng,
): Float32Array {
  const out = values.slice();
  if (cfg.count === 0 || rng() >= cfg.probability) return out;
  const span = SIDE - cfg.squareSize + 1;
  for (let square = 0; square < cfg.count; square++) {
    const top = randInt(rng, span);
    const left = randInt(rng, span);
    for (let c = 0; c < CHANNELS; c++) {
      for (let r = top; r < top + cfg.squareSize; r++) {
        const base = (c * SIDE + r) * SIDE;
        out.fill(0, base + left, base + left + cfg.squareSize);
      }
    }
  }
  return out;
}

export function seededCutout(values: Float32Array, cfg: CutoutConfig, seed: number): Float32Array {
  return applyCutout(values, cfg, mulberry32(seed));
}

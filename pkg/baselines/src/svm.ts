/**
 * One-vs-one multiclass SVM with an RBF kernel, trained by simplified
 * sequential minimal optimization. Inputs are standardized with training
 * statistics; the kernel width follows the scale heuristic
 * 1 / (num_features * variance(X_train)).
 */

import { mulberry32, randInt } from "./prng.js";

export interface SvmSpec {
  C: number;
  gamma: number | "scale";
  tol: number;
  maxPasses: number;
  seed: number;
}

export const DEFAULT_SVM: SvmSpec = {
  C: 1,
  gamma: "scale",
  tol: 1e-3,
  maxPasses: 10,
  seed: 0,
};

export class SingleClassError extends Error {}

export interface Standardizer {
  mean: Float64Array;
  std: Float64Array;
}

export function fitStandardizer(X: number[][]): Standardizer {
  const n = X.length;
  const dim = X[0].length;
  const mean = new Float64Array(dim);
  const std = new Float64Array(dim);
  for (const row of X) for (let j = 0; j < dim; j++) mean[j] += row[j];
  for (let j = 0; j < dim; j++) mean[j] /= n;
  for (const row of X) {
    for (let j = 0; j < dim; j++) {
      const d = row[j] - mean[j];
      std[j] += d * d;
    }
  }
  for (let j = 0; j < dim; j++) std[j] = Math.max(Math.sqrt(std[j] / n), 1e-8);
  return { mean, std };
}

export function applyStandardizer(X: number[][], s: Standardizer): number[][] {
  return X.map((row) => row.map((v, j) => (v - s.mean[j]) / s.std[j]));
}

/** sklearn-style "scale": 1 / (dim * variance over all entries). */
export function scaleGamma(X: number[][]): number {
  const dim = X[0].length;
  let sum = 0;
  let sumSq = 0;
  let count = 0;
  for (const row of X) {
    for (const v of row) {
      sum += v;
      sumSq += v * v;
      count++;
    }
  }
  const mean = sum / count;
  const variance = sumSq / count - mean * mean;
  return variance > 1e-12 ? 1 / (dim * variance) : 1 / dim;
}

function rbf(a: number[], b: number[], gamma: number): number {
  let dist = 0;
  for (let i = 0; i < a.length; i++) {
    const d = a[i] - b[i];
    dist += d * d;
  }
  return Math.exp(-gamma * dist);
}

/** Binary soft-margin SVM; labels must be +1 / -1. */
export class BinarySvm {
  alphas: Float64Array;
  b = 0;
  constructor(
    readonly X: number[][],
    readonly y: number[],
    readonly gamma: number,
  ) {
    this.alphas = new Float64Array(X.length);
  }

  decision(x: number[]): number {
    let value = this.b;
    for (let i = 0; i < this.X.length; i++) {
      if (this.alphas[i] !== 0) {
        value += this.alphas[i] * this.y[i] * rbf(this.X[i], x, this.gamma);
      }
    }
    return value;
  }
}

export function trainBinarySvm(
  X: number[][],
  y: number[],
  gamma: number,
  spec: SvmSpec,
): BinarySvm {
  const n = X.length;
  const model = new BinarySvm(X, y, gamma);
  const { alphas } = model;
  const rng = mulberry32(spec.seed + 1);

  const kernel: Float64Array[] = [];
  for (let i = 0; i < n; i++) {
    kernel.push(new Float64Array(n));
    for (let j = 0; j < n; j++) kernel[i][j] = rbf(X[i], X[j], gamma);
  }
  const f = (i: number): number => {
    let value = model.b;
    for (let k = 0; k < n; k++) {
      if (alphas[k] !== 0) value += alphas[k] * y[k] * kernel[k][i];
    }
    return value;
  };

  let passes = 0;
  while (passes < spec.maxPasses) {
    let changed = 0;
    for (let i = 0; i < n; i++) {
      const errorI = f(i) - y[i];
      const violates =
        (y[i] * errorI < -spec.tol && alphas[i] < spec.C) ||
        (y[i] * errorI > spec.tol && alphas[i] > 0);
      if (!violates) continue;
      let j = randInt(rng, n - 1);
      if (j >= i) j++;
      const errorJ = f(j) - y[j];
      const alphaIOld = alphas[i];
      const alphaJOld = alphas[j];
      let low: number;
      let high: number;
      if (y[i] !== y[j]) {
        low = Math.max(0, alphaJOld - alphaIOld);
        high = Math.min(spec.C, spec.C + alphaJOld - alphaIOld);
      } else {
        low = Math.max(0, alphaIOld + alphaJOld - spec.C);
        high = Math.min(spec.C, alphaIOld + alphaJOld);
      }
      if (low === high) continue;
      const eta = 2 * kernel[i][j] - kernel[i][i] - kernel[j][j];
      if (eta >= 0) continue;
      let alphaJ = alphaJOld - (y[j] * (errorI - errorJ)) / eta;
      alphaJ = Math.min(high, Math.max(low, alphaJ));
      if (Math.abs(alphaJ - alphaJOld) < 1e-5) continue;
      const alphaI = alphaIOld + y[i] * y[j] * (alphaJOld - alphaJ);
      alphas[i] = alphaI;
      alphas[j] = alphaJ;

      const b1 =
        model.b -
        errorI -
        y[i] * (alphaI - alphaIOld) * kernel[i][i] -
        y[j] * (alphaJ - alphaJOld) * kernel[i][j];
      const b2 =
        model.b -
        errorJ -
        y[i] * (alphaI - alphaIOld) * kernel[i][j] -
        y[j] * (alphaJ - alphaJOld) * kernel[j][j];
      if (alphaI > 0 && alphaI < spec.C) model.b = b1;
      else if (alphaJ > 0 && alphaJ < spec.C) model.b = b2;
      else model.b = (b1 + b2) / 2;
      changed++;
    }
    passes = changed === 0 ? passes + 1 : 0;
  }
  return model;
}

export interface PairwiseClassifier {
  classA: number; // decision > 0 votes classA
  classB: number;
  model: BinarySvm;
}

export class OvoSvm {
  constructor(
    readonly numClasses: number,
    readonly classifiers: PairwiseClassifier[],
  ) {}

  predictOne(x: number[]): number {
    const votes = new Array<number>(this.numClasses).fill(0);
    for (const { classA, classB, model } of this.classifiers) {
      votes[model.decision(x) > 0 ? classA : classB] += 1;
    }
    let best = 0;
    for (let c = 1; c < this.numClasses; c++) {
      if (votes[c] > votes[best]) best = c; // ties keep the smaller id
    }
    return best;
  }

  predict(X: number[][]): number[] {
    return X.map((x) => this.predictOne(x));
  }
}

export function pairCount(numClasses: number): number {
  return (numClasses * (numClasses - 1)) / 2;
}

export function trainOvoSvm(
  X: number[][],
  y: number[],
  numClasses: number,
  spec: SvmSpec = DEFAULT_SVM,
): OvoSvm {
  if (numClasses < 2) {
    throw new SingleClassError("one-vs-one needs at least two classes");
  }
  const gamma = spec.gamma === "scale" ? scaleGamma(X) : spec.gamma;
  const byClass = new Map<number, number[]>();
  for (let i = 0; i < y.length; i++) {
    const rows = byClass.get(y[i]) ?? [];
    rows.push(i);
    byClass.set(y[i], rows);
  }

  const classifiers: PairwiseClassifier[] = [];
  for (let a = 0; a < numClasses; a++) {
    for (let b = a + 1; b < numClasses; b++) {
      const rows = [...(byClass.get(a) ?? []), ...(byClass.get(b) ?? [])];
      const pairX = rows.map((i) => X[i]);
      const pairY = rows.map((i) => (y[i] === a ? 1 : -1));
      const pairSeed = spec.seed + a * numClasses + b;
      const model = trainBinarySvm(pairX, pairY, gamma, { ...spec, seed: pairSeed });
      classifiers.push({ classA: a, classB: b, model });
    }
  }
  return new OvoSvm(numClasses, classifiers);
}

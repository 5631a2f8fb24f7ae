/**
 * Multiclass CNN over KDI tensors: five same-padded convolution blocks
 * (conv -> batch norm -> 2x2 max pool) with filter counts 32/64/128/256/256,
 * then a 128-unit dense layer and a softmax head. Pooling alone drives the
 * spatial reduction 42 -> 21 -> 10 -> 5 -> 2 -> 1.
 */

import * as tf from "@tensorflow/tfjs";

import { applyCutout, type CutoutConfig } from "./cutout.js";
import { CHANNELS, channelMajorToHwc, SIDE, type TensorSample } from "./kdt.js";
import { mulberry32, shuffle } from "./prng.js";
import type { EpochRow } from "./report.js";

export const CONV_FILTERS = [32, 64, 128, 256, 256];
export const CONV_KERNELS = [5, 3, 3, 3, 3];
export const DENSE_UNITS = 128;

export interface TrainOptions {
  epochs: number;
  learningRate: number;
  batchSize: number;
  plateauFactor: number;
  plateauPatience: number;
  minLearningRate: number;
  earlyStopPatience: number; // 0 disables early stopping
  cutout: CutoutConfig | null;
  seed: number;
  /** stop once training accuracy reaches this value (null = never) */
  stopAtTrainAccuracy: number | null;
  verbose: boolean;
}

export const DEFAULT_TRAIN: TrainOptions = {
  epochs: 20,
  learningRate: 0.01,
  batchSize: 64,
  plateauFactor: 0.5,
  plateauPatience: 3,
  minLearningRate: 1e-5,
  earlyStopPatience: 6,
  cutout: null,
  seed: 0,
  stopAtTrainAccuracy: null,
  verbose: false,
};

export function buildCnn(
  numClasses: number,
  seed = 0,
  learningRate = DEFAULT_TRAIN.learningRate,
): tf.Sequential {
  const model = tf.sequential();
  for (let block = 0; block < CONV_FILTERS.length; block++) {
    model.add(
      tf.layers.conv2d({
        filters: CONV_FILTERS[block],
        kernelSize: CONV_KERNELS[block],
        padding: "same",
        activation: "relu",
        kernelInitializer: tf.initializers.glorotUniform({ seed: seed + block }),
        ...(block === 0 ? { inputShape: [SIDE, SIDE, CHANNELS] } : {}),
      }),
    );
    model.add(tf.layers.batchNormalization());
    model.add(tf.layers.maxPooling2d({ poolSize: 2, strides: 2 }));
  }
  model.add(tf.layers.flatten());
  model.add(
    tf.layers.dense({
      units: DENSE_UNITS,
      activation: "relu",
      kernelInitializer: tf.initializers.glorotUniform({ seed: seed + 100 }),
    }),
  );
  model.add(
    tf.layers.dense({
      units: numClasses,
      activation: "softmax",
      kernelInitializer: tf.initializers.glorotUniform({ seed: seed + 101 }),
    }),
  );
  model.compile({
    loss: "categoricalCrossentropy",
    optimizer: tf.train.adam(learningRate),
    metrics: ["accuracy"],
  });
  return model;
}

/** Spatial side length after each pooling layer (the 21/10/5/2/1 probe). */
export function poolOutputSizes(model: tf.Sequential): number[] {
  return model.layers
    .filter((layer) => layer.getClassName() === "MaxPooling2D")
    .map((layer) => (layer.outputShape as number[])[1]);
}

function batchToTensor(
  samples: TensorSample[],
  indices: number[],
  cutout: CutoutConfig | null,
  rng: () => number,
): tf.Tensor4D {
  const data = new Float32Array(indices.length * SIDE * SIDE * CHANNELS);
  indices.forEach((index, row) => {
    let values = samples[index].values;
    if (cutout !== null) values = applyCutout(values, cutout, rng);
    data.set(channelMajorToHwc(values), row * SIDE * SIDE * CHANNELS);
  });
  return tf.tensor4d(data, [indices.length, SIDE, SIDE, CHANNELS]);
}

function labelsToOneHot(
  samples: TensorSample[],
  indices: number[],
  numClasses: number,
): tf.Tensor2D {
  const data = new Float32Array(indices.length * numClasses);
  indices.forEach((index, row) => {
    data[row * numClasses + samples[index].label] = 1;
  });
  return tf.tensor2d(data, [indices.length, numClasses]);
}

export interface TrainResult {
  model: tf.Sequential;
  history: EpochRow[];
}

export async function trainCnn(
  samples: TensorSample[],
  trainIdx: number[],
  valIdx: number[],
  numClasses: number,
  options: Partial<TrainOptions> = {},
): Promise<TrainResult> {
  const opts: TrainOptions = { ...DEFAULT_TRAIN, ...options };
  if (trainIdx.length === 0) throw new Error("empty training split");
  const model = buildCnn(numClasses, opts.seed, opts.learningRate);
  const rng = mulberry32(opts.seed ^ 0x5eed);

  const valXs = valIdx.length ? batchToTensor(samples, valIdx, null, rng) : null;
  const valYs = valIdx.length ? labelsToOneHot(samples, valIdx, numClasses) : null;

  const history: EpochRow[] = [];
  let learningRate = opts.learningRate;
  let bestValLoss = Number.POSITIVE_INFINITY;
  let sinceImproved = 0;
  let bestWeights: tf.Tensor[] | null = null;

  for (let epoch = 0; epoch < opts.epochs; epoch++) {
    const order = shuffle([...trainIdx], rng);
    let lossSum = 0;
    let accSum = 0;
    for (let start = 0; start < order.length; start += opts.batchSize) {
      const batch = order.slice(start, start + opts.batchSize);
      const xs = batchToTensor(samples, batch, opts.cutout, rng);
      const ys = labelsToOneHot(samples, batch, numClasses);
      const metrics = (await model.trainOnBatch(xs, ys)) as number[];
      xs.dispose();
      ys.dispose();
      lossSum += metrics[0] * batch.length;
      accSum += metrics[1] * batch.length;
    }
    const trainLoss = lossSum / order.length;
    const trainAcc = accSum / order.length;

    let valLoss: number | null = null;
    let valAcc: number | null = null;
    if (valXs !== null && valYs !== null) {
      const evaluated = model.evaluate(valXs, valYs, {
        batchSize: opts.batchSize,
      }) as tf.Scalar[];
      valLoss = evaluated[0].dataSync()[0];
      valAcc = evaluated[1].dataSync()[0];
      evaluated.forEach((t) => t.dispose());
    }
    history.push({ epoch, trainAcc, valAcc, trainLoss, valLoss });
    if (opts.verbose) {
      console.log(
        `epoch ${epoch}: loss=${trainLoss.toFixed(4)} acc=${trainAcc.toFixed(4)}` +
          (valLoss !== null ? ` val_loss=${valLoss.toFixed(4)} val_acc=${valAcc?.toFixed(4)}` : ""),
      );
    }

    if (valLoss !== null) {
      if (valLoss < bestValLoss - 1e-6) {
        bestValLoss = valLoss;
        sinceImproved = 0;
        if (opts.earlyStopPatience > 0) {
          bestWeights?.forEach((t) => t.dispose());
          bestWeights = model.getWeights().map((t) => t.clone());
        }
      } else {
        sinceImproved++;
        if (
          sinceImproved > 0 &&
          sinceImproved % opts.plateauPatience === 0 &&
          learningRate > opts.minLearningRate
        ) {
          learningRate = Math.max(
            learningRate * opts.plateauFactor,
            opts.minLearningRate,
          );
          (model.optimizer as unknown as { learningRate: number }).learningRate =
            learningRate;
          if (opts.verbose) console.log(`epoch ${epoch}: lr reduced to ${learningRate}`);
        }
        if (opts.earlyStopPatience > 0 && sinceImproved >= opts.earlyStopPatience) {
          if (opts.verbose) console.log(`epoch ${epoch}: early stop`);
          break;
        }
      }
    }
    if (
      opts.stopAtTrainAccuracy !== null &&
      trainAcc >= opts.stopAtTrainAccuracy
    ) {
      break;
    }
  }

  if (bestWeights !== null) {
    model.setWeights(bestWeights);
    bestWeights.forEach((t) => t.dispose());
  }
  valXs?.dispose();
  valYs?.dispose();
  return { model, history };
}

export function predictClasses(
  model: tf.Sequential,
  samples: TensorSample[],
  indices: number[],
  batchSize = 64,
): number[] {
  const noRng = () => 1; // cutout disabled at inference
  const out: number[] = [];
  for (let start = 0; start < indices.length; start += batchSize) {
    const batch = indices.slice(start, start + batchSize);
    const xs = batchToTensor(samples, batch, null, noRng);
    const probs = model.predict(xs) as tf.Tensor2D;
    const classes = probs.argMax(-1).dataSync();
    out.push(...Array.from(classes));
    xs.dispose();
    probs.dispose();
  }
  return out;
}

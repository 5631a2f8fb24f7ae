/**
 * Command line: train the CNN or the OVO-SVM on a KDT1 export and write
 * an eval-schema report (plus a per-epoch history CSV for the CNN).
 */

import { mkdirSync, writeFileSync } from "node:fs";
import { join } from "node:path";
import { parseArgs } from "node:util";

import { initBackend } from "./backend.js";
import { DEFAULT_TRAIN, predictClasses, trainCnn } from "./cnn.js";
import { DEFAULT_CUTOUT } from "./cutout.js";
import { FLAT_LENGTH, loadTensors, type KdtDataset } from "./kdt.js";
import { buildReport, historyCsv } from "./report.js";
import {
  applyStandardizer,
  DEFAULT_SVM,
  fitStandardizer,
  trainOvoSvm,
} from "./svm.js";

function usage(): never {
  console.error(
    "usage: cli.js <train-cnn|train-svm> --tensors FILE --manifest FILE --out-dir DIR\n" +
      "  train-cnn flags: --epochs N --learning-rate F --batch-size N --seed N\n" +
      "                   --no-cutout --cutout-size N --cutout-count N --cutout-prob F\n" +
      "                   --no-early-stop --verbose\n" +
      "  train-svm flags: --c F --seed N",
  );
  process.exit(2);
}

function loadOrDie(tensors: string, manifest: string): KdtDataset {
  const dataset = loadTensors(tensors, manifest);
  if (dataset.train.length === 0 || dataset.test.length === 0) {
    console.error("error: manifest must provide non-empty train and test splits");
    process.exit(2);
  }
  return dataset;
}

async function runCnn(values: Record<string, string | boolean | undefined>): Promise<void> {
  console.log(`tfjs backend: ${await initBackend()}`);
  const dataset = loadOrDie(String(values.tensors), String(values.manifest));
  const outDir = String(values["out-dir"]);
  mkdirSync(outDir, { recursive: true });
  const numClasses = Object.keys(dataset.manifest.labels).length;

  const cutout = values["no-cutout"]
    ? null
    : {
        squareSize: Number(values["cutout-size"] ?? DEFAULT_CUTOUT.squareSize),
        count: Number(values["cutout-count"] ?? DEFAULT_CUTOUT.count),
        probability: Number(values["cutout-prob"] ?? DEFAULT_CUTOUT.probability),
      };
  const options = {
    epochs: Number(values.epochs ?? DEFAULT_TRAIN.epochs),
    learningRate: Number(values["learning-rate"] ?? DEFAULT_TRAIN.learningRate),
    batchSize: Number(values["batch-size"] ?? DEFAULT_TRAIN.batchSize),
    seed: Number(values.seed ?? 0),
    cutout,
    earlyStopPatience: values["no-early-stop"] ? 0 : DEFAULT_TRAIN.earlyStopPatience,
    verbose: Boolean(values.verbose),
  };

  const { model, history } = await trainCnn(
    dataset.samples,
    dataset.train,
    dataset.val,
    numClasses,
    options,
  );
  const predicted = predictClasses(model, dataset.samples, dataset.test);
  const actual = dataset.test.map((i) => dataset.samples[i].label);
  const report = buildReport({
    model: "cnn",
    actual,
    predicted,
    labels: dataset.manifest.labels,
    config: {
      tensors: String(values.tensors),
      window_length: dataset.manifest.window_length,
      standardized: dataset.manifest.standardized,
      epochs: options.epochs,
      learning_rate: options.learningRate,
      batch_size: options.batchSize,
      seed: options.seed,
      cutout: cutout ?? false,
    },
  });
  writeFileSync(join(outDir, "report_cnn.json"), JSON.stringify(report, null, 1) + "\n");
  writeFileSync(join(outDir, "history_cnn.csv"), historyCsv(history));
  console.log(
    `cnn accuracy=${report.accuracy.toFixed(4)} on ${actual.length} test samples ` +
      `-> ${join(outDir, "report_cnn.json")}`,
  );
}

function runSvm(values: Record<string, string | boolean | undefined>): void {
  const dataset = loadOrDie(String(values.tensors), String(values.manifest));
  const outDir = String(values["out-dir"]);
  mkdirSync(outDir, { recursive: true });
  const numClasses = Object.keys(dataset.manifest.labels).length;

  // flattened 8820-vectors; channel-major order matches the primary layout
  const rows: number[][] = dataset.samples.map((s) => Array.from(s.values));
  if (rows[0].length !== FLAT_LENGTH) throw new Error("unexpected sample width");
  const trainX = dataset.train.map((i) => rows[i]);
  const standardizer = fitStandardizer(trainX);
  const allStd = applyStandardizer(rows, standardizer);

  const spec = {
    ...DEFAULT_SVM,
    C: Number(values.c ?? DEFAULT_SVM.C),
    seed: Number(values.seed ?? DEFAULT_SVM.seed),
  };
  const trainY = dataset.train.map((i) => dataset.samples[i].label);
  const model = trainOvoSvm(
    dataset.train.map((i) => allStd[i]),
    trainY,
    numClasses,
    spec,
  );
  const predicted = model.predict(dataset.test.map((i) => allStd[i]));
  const actual = dataset.test.map((i) => dataset.samples[i].label);
  const report = buildReport({
    model: "svm",
    actual,
    predicted,
    labels: dataset.manifest.labels,
    config: {
      tensors: String(values.tensors),
      window_length: dataset.manifest.window_length,
      standardized: dataset.manifest.standardized,
      C: spec.C,
      kernel: "rbf",
      gamma: "scale",
      classifiers: model.classifiers.length,
      seed: spec.seed,
    },
  });
  writeFileSync(join(outDir, "report_svm.json"), JSON.stringify(report, null, 1) + "\n");
  console.log(
    `svm accuracy=${report.accuracy.toFixed(4)} with ${model.classifiers.length} ` +
      `pairwise classifiers -> ${join(outDir, "report_svm.json")}`,
  );
}

async function main(): Promise<void> {
  const [command, ...rest] = process.argv.slice(2);
  if (command !== "train-cnn" && command !== "train-svm") usage();
  const { values } = parseArgs({
    args: rest,
    options: {
      tensors: { type: "string" },
      manifest: { type: "string" },
      "out-dir": { type: "string" },
      epochs: { type: "string" },
      "learning-rate": { type: "string" },
      "batch-size": { type: "string" },
      seed: { type: "string" },
      c: { type: "string" },
      "cutout-size": { type: "string" },
      "cutout-count": { type: "string" },
      "cutout-prob": { type: "string" },
      "no-cutout": { type: "boolean" },
      "no-early-stop": { type: "boolean" },
      verbose: { type: "boolean" },
    },
  });
  if (!values.tensors || !values.manifest || !values["out-dir"]) usage();
  if (command === "train-cnn") await runCnn(values);
  else runSvm(values);
}

main().catch((error) => {
  console.error(`error (${error?.constructor?.name ?? "Error"}): ${error?.message ?? error}`);
  process.exit(1);
});

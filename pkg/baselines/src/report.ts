/**
 * Evaluation metrics and the kdi-report/1 document, shared with the
 * primary toolkit so reports flow through its `partition` command
 * unchanged.
 */

import { z } from "zod";

export const EASY_THRESHOLD = 0.9;
export const DIFFICULT_THRESHOLD = 0.75;
export const DECILE_EDGES = Array.from({ length: 11 }, (_, i) => i / 10);

const nullableAccuracy = z.union([z.number().min(0).max(1), z.null()]);

export const reportSchema = z.object({
  schema: z.literal("kdi-report/1"),
  model: z.string().min(1),
  num_classes: z.number().int().min(1),
  labels: z.record(z.string(), z.number().int().min(0)),
  accuracy: z.number().min(0).max(1),
  per_class_accuracy: z.array(nullableAccuracy),
  per_user_accuracy: z.record(z.string(), nullableAccuracy),
  per_user_accuracy_sorted: z.array(
    z.tuple([z.string(), z.number().min(0).max(1)]),
  ),
  confusion_matrix: z.array(z.array(z.number().int().min(0))),
  partition: z.object({
    thresholds: z.object({
      hi: z.number().min(0).max(1),
      lo: z.number().min(0).max(1),
    }),
    easy: z.array(z.string()),
    moderate: z.array(z.string()),
    difficult: z.array(z.string()),
  }),
  range_histogram: z.object({
    edges: z.array(z.number()).min(2),
    counts: z.array(z.number().int().min(0)),
  }),
  config: z.record(z.string(), z.unknown()),
});

export type Report = z.infer<typeof reportSchema>;

export function confusionMatrix(
  actual: number[],
  predicted: number[],
  numClasses: number,
): number[][] {
  if (actual.length !== predicted.length) {
    throw new Error(
      `label vectors differ in length: ${actual.length} vs ${predicted.length}`,
    );
  }
  const counts = Array.from({ length: numClasses }, () =>
    new Array<number>(numClasses).fill(0),
  );
  for (let i = 0; i < actual.length; i++) {
    const a = actual[i];
    const p = predicted[i];
    if (a < 0 || a >= numClasses || p < 0 || p >= numClasses) {
      throw new Error(`label outside [0, ${numClasses}) at sample ${i}`);
    }
    counts[a][p] += 1;
  }
  return counts;
}

export function accuracy(cm: number[][]): number {
  let trace = 0;
  let total = 0;
  for (let i = 0; i < cm.length; i++) {
    trace += cm[i][i];
    for (const value of cm[i]) total += value;
  }
  if (total === 0) throw new Error("accuracy undefined for an empty confusion matrix");
  return trace / total;
}

export function perClassAccuracy(cm: number[][]): Array<number | null> {
  return cm.map((row, i) => {
    const total = row.reduce((s, v) => s + v, 0);
    return total === 0 ? null : row[i] / total;
  });
}

export function rangeHistogram(values: number[], edges: number[]): number[] {
  const counts = new Array<number>(edges.length - 1).fill(0);
  for (const value of values) {
    if (value < edges[0] || value > edges[edges.length - 1]) continue;
    if (value === edges[edges.length - 1]) {
      counts[counts.length - 1] += 1;
      continue;
    }
    let bin = 0;
    while (bin + 1 < edges.length - 1 && value >= edges[bin + 1]) bin++;
    counts[bin] += 1;
  }
  return counts;
}

export function buildReport(args: {
  model: string;
  actual: number[];
  predicted: number[];
  labels: Record<string, number>;
  config: Record<string, unknown>;
  hi?: number;
  lo?: number;
}): Report {
  const hi = args.hi ?? EASY_THRESHOLD;
  const lo = args.lo ?? DIFFICULT_THRESHOLD;
  const numClasses = Object.keys(args.labels).length;
  const cm = confusionMatrix(args.actual, args.predicted, numClasses);
  const perClass = perClassAccuracy(cm);

  const userOfClass = new Map<number, string>();
  for (const [user, classId] of Object.entries(args.labels)) {
    userOfClass.set(classId, user);
  }
  const perUser: Record<string, number | null> = {};
  for (let classId = 0; classId < numClasses; classId++) {
    const user = userOfClass.get(classId);
    if (user === undefined) {
      throw new Error(`label map misses class ${classId}`);
    }
    perUser[user] = perClass[classId];
  }

  const defined = Object.entries(perUser).filter(
    (entry): entry is [string, number] => entry[1] !== null,
  );
  const easy = defined.filter(([, a]) => a >= hi).map(([u]) => u).sort();
  const difficult = defined.filter(([, a]) => a < lo).map(([u]) => u).sort();
  const moderate = defined
    .filter(([, a]) => a < hi && a >= lo)
    .map(([u]) => u)
    .sort();
  const ranked = [...defined].sort(
    (x, y) => y[1] - x[1] || x[0].localeCompare(y[0]),
  );

  const sortedKeys = Object.keys(args.labels).sort();
  const report: Report = {
    schema: "kdi-report/1",
    model: args.model,
    num_classes: numClasses,
    labels: Object.fromEntries(sortedKeys.map((k) => [k, args.labels[k]])),
    accuracy: accuracy(cm),
    per_class_accuracy: perClass,
    per_user_accuracy: Object.fromEntries(
      Object.keys(perUser)
        .sort()
        .map((u) => [u, perUser[u]]),
    ),
    per_user_accuracy_sorted: ranked.map(([u, a]) => [u, a]),
    confusion_matrix: cm,
    partition: {
      thresholds: { hi, lo },
      easy,
      moderate,
      difficult,
    },
    range_histogram: {
      edges: DECILE_EDGES,
      counts: rangeHistogram(defined.map(([, a]) => a), DECILE_EDGES),
    },
    config: args.config,
  };
  return reportSchema.parse(report);
}

export interface EpochRow {
  epoch: number;
  trainAcc: number;
  valAcc: number | null;
  trainLoss: number;
  valLoss: number | null;
}

export function historyCsv(rows: EpochRow[]): string {
  const lines = ["epoch,train_acc,val_acc,train_loss,val_loss"];
  for (const row of rows) {
    lines.push(
      [
        row.epoch,
        row.trainAcc,
        row.valAcc ?? "",
        row.trainLoss,
        row.valLoss ?? "",
      ].join(","),
    );
  }
  return lines.join("\n") + "\n";
}

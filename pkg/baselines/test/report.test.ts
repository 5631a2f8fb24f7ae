import { spawnSync } from "node:child_process";
import { readFileSync, writeFileSync } from "node:fs";
import { join } from "node:path";
import { describe, expect, it } from "vitest";

import {
  accuracy,
  buildReport,
  confusionMatrix,
  historyCsv,
  perClassAccuracy,
  rangeHistogram,
  reportSchema,
} from "../src/report.js";
import { tempDir } from "./helpers.js";

const LABELS = { alice: 0, bob: 1, carol: 2 };

function sampleReport() {
  return buildReport({
    model: "cnn",
    actual: [0, 0, 1, 1, 2, 2],
    predicted: [0, 0, 1, 0, 0, 1],
    labels: LABELS,
    config: { epochs: 20 },
  });
}

describe("metrics", () => {
  it("confusion matrix rows are actual classes", () => {
    const cm = confusionMatrix([0, 0, 1], [0, 1, 1], 2);
    expect(cm).toEqual([
      [1, 1],
      [0, 1],
    ]);
  });

  it("accuracy and per-class accuracy match hand values", () => {
    const cm = [
      [3, 1],
      [2, 4],
    ];
    expect(accuracy(cm)).toBeCloseTo(0.7, 12);
    const perClass = perClassAccuracy(cm);
    expect(perClass[0]).toBeCloseTo(0.75, 12);
    expect(perClass[1]).toBeCloseTo(2 / 3, 12);
  });

  it("unsampled class reports null", () => {
    expect(perClassAccuracy([[2, 0], [0, 0]])).toEqual([1.0, null]);
  });

  it("histogram closes the last bin", () => {
    const counts = rangeHistogram([1.0, 0.95, 0.5], [0, 0.5, 0.9, 1.0]);
    expect(counts).toEqual([0, 1, 2]);
  });
});

describe("report document", () => {
  it("passes the schema and carries the partition", () => {
    const report = sampleReport();
    expect(() => reportSchema.parse(report)).not.toThrow();
    expect(report.accuracy).toBeCloseTo(0.5, 12);
    expect(report.partition.easy).toEqual(["alice"]);
    expect(report.partition.difficult).toEqual(["bob", "carol"]);
    expect(report.per_user_accuracy_sorted[0]).toEqual(["alice", 1.0]);
  });

  it("schema rejects a damaged document", () => {
    const report = sampleReport() as Record<string, unknown>;
    report.accuracy = 2.0;
    expect(() => reportSchema.parse(report)).toThrow();
  });

  it("history csv has the five columns", () => {
    const csv = historyCsv([
      { epoch: 0, trainAcc: 0.5, valAcc: 0.4, trainLoss: 1.2, valLoss: 1.4 },
      { epoch: 1, trainAcc: 0.8, valAcc: null, trainLoss: 0.6, valLoss: null },
    ]);
    const lines = csv.trim().split("\n");
    expect(lines[0]).toBe("epoch,train_acc,val_acc,train_loss,val_loss");
    expect(lines[1]).toBe("0,0.5,0.4,1.2,1.4");
    expect(lines[2]).toBe("1,0.8,,0.6,");
  });
});

describe("interop with the primary toolkit", () => {
  it("reports flow through the partition command unchanged", () => {
    const dir = tempDir("report-");
    const reportPath = join(dir, "report_cnn.json");
    writeFileSync(reportPath, JSON.stringify(sampleReport(), null, 1) + "\n");

    const result = spawnSync(
      "python3",
      ["-m", "keystroke_id.cli", "partition", "--report", reportPath, "--out-dir", dir],
      { encoding: "utf-8" },
    );
    if (result.status !== 0) {
      console.error(result.stdout, result.stderr);
    }
    expect(result.status).toBe(0);

    const partition = JSON.parse(readFileSync(join(dir, "partition.json"), "utf-8"));
    expect(partition.easy).toEqual(["alice"]);
    expect(partition.difficult).toEqual(["bob", "carol"]);
    expect(
      partition.sizes.easy + partition.sizes.moderate + partition.sizes.difficult,
    ).toBe(3);
  });
});

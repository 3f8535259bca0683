import { describe, expect, it } from "vitest";

import { predictPeelZ, predictUnrollZ, serializeModel } from "../src/model.js";
import {
  DegenerateLabels,
  EmptyDataset,
  defaultConfig,
  lossWeight,
  trainPeel,
  trainUnroll,
} from "../src/train.js";
import { FEATURES, makePeelSet, makeUnrollSet } from "./synthetic.js";

const cfg = defaultConfig();

describe("peel classifier", () => {
  it("reaches 95% held-out accuracy on the separable set", () => {
    const { dataset, scaler } = makePeelSet(600, 7);
    const train = dataset.rows.slice(0, 480);
    const heldout = dataset.rows.slice(480);
    const model = trainPeel(dataset.featureNames, train, scaler, cfg);
    let correct = 0;
    for (const row of heldout) {
      const predicted = predictPeelZ(model, row.features);
      if (predicted === row.speedup > 1) correct++;
    }
    expect(correct / heldout.length).toBeGreaterThanOrEqual(0.95);
  });

  it("rejects single-class labels", () => {
    const { dataset, scaler } = makePeelSet(50, 3);
    for (const row of dataset.rows) row.speedup = 2.0;
    expect(() => trainPeel(dataset.featureNames, dataset.rows, scaler, cfg)).toThrow(
      DegenerateLabels,
    );
  });

  it("rejects an empty dataset", () => {
    const { dataset, scaler } = makePeelSet(10, 3);
    expect(() => trainPeel(dataset.featureNames, [], scaler, cfg)).toThrow(EmptyDataset);
  });

  it("retrains byte-identically under a fixed seed", () => {
    const make = () => {
      const { dataset, scaler } = makePeelSet(200, 11);
      const model = trainPeel(dataset.featureNames, dataset.rows, scaler,
                              defaultConfig({ seed: 5 }));
      return serializeModel(model);
    };
    expect(make()).toBe(make());
  });

  it("embeds the exporter scaler untouched", () => {
    const { dataset, scaler } = makePeelSet(100, 2);
    const model = trainPeel(dataset.featureNames, dataset.rows, scaler, cfg);
    for (let j = 0; j < FEATURES.length; j++) {
      expect(Math.abs(model.scaler.mean[j] - scaler.mean[j])).toBeLessThan(1e-12);
      expect(Math.abs(model.scaler.std[j] - scaler.std[j])).toBeLessThan(1e-12);
    }
  });
});

describe("unroll regressor", () => {
  it("recovers the best factor on 90% of held-out loops", () => {
    const made = makeUnrollSet(160, 13);
    const perLoop = 5;
    const split = 120 * perLoop;
    const train = made.dataset.rows.slice(0, split);
    const model = trainUnroll(made.dataset.featureNames, train, made.scaler, cfg);
    let correct = 0;
    let total = 0;
    for (let loop = 120; loop < 160; loop++) {
      const row = made.dataset.rows[loop * perLoop];
      const { factor } = predictUnrollZ(model, row.features);
      total++;
      if (factor === made.bestFactor[loop]) correct++;
    }
    expect(correct / total).toBeGreaterThanOrEqual(0.9);
  });

  it("zero-variance targets collapse to factor 1", () => {
    const made = makeUnrollSet(40, 21, 0.0); // c = 0: every speedup is 1
    const model = trainUnroll(made.dataset.featureNames, made.dataset.rows,
                              made.scaler, cfg);
    const { factor, scores } = predictUnrollZ(model, made.dataset.rows[0].features);
    expect(factor).toBe(1);
    for (const s of scores) expect(Math.abs(s)).toBeLessThan(1e-6);
  });

  it("retrains byte-identically under a fixed seed", () => {
    const make = () => {
      const made = makeUnrollSet(60, 17);
      const model = trainUnroll(made.dataset.featureNames, made.dataset.rows,
                                made.scaler, defaultConfig({ seed: 9 }));
      return serializeModel(model);
    };
    expect(make()).toBe(make());
  });

  it("keeps the factor-1 lane at the fixed zero target", () => {
    const made = makeUnrollSet(50, 23);
    const model = trainUnroll(made.dataset.featureNames, made.dataset.rows,
                              made.scaler, cfg);
    expect(model.weights[0].every((w) => w === 0)).toBe(true);
    expect(model.bias[0]).toBe(0);
  });
});

describe("loss weighting", () => {
  it("rewards larger absolute log speedups and heavier rows", () => {
    const { dataset } = makePeelSet(10, 1);
    const row = dataset.rows[0];
    const even = { ...row, speedup: 1.0, totalTime: 0 };
    expect(lossWeight(even, cfg)).toBe(1);
    const fast = { ...row, speedup: Math.E, totalTime: 0 };
    expect(lossWeight(fast, cfg)).toBeCloseTo(1 + cfg.alpha, 12);
    const slow = { ...row, speedup: 1 / Math.E, totalTime: 0 };
    expect(lossWeight(slow, cfg)).toBeCloseTo(1 + cfg.alpha, 12);
    const heavy = { ...row, speedup: 1.0, totalTime: Math.E - 1 };
    expect(lossWeight(heavy, cfg)).toBeCloseTo(1 + cfg.beta, 12);
  });
});

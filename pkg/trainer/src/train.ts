import type { Dataset, DataRow, Scaler } from "./data.js";
import {
  FACTORS,
  PeelModel,
  UnrollModel,
  buildScaler,
  dot,
  sigmoid,
} from "./model.js";

export interface TrainingConfig {
  epochs: number;
  learningRate: number;
  lrDecayEvery: number; // epochs per learning-rate step
  lrDecayFactor: number;
  weightDecay: number;
  alpha: number; // loss weight on |ln speedup|
  beta: number; // loss weight on ln(1 + totalTime)
  groupSize: number; // cross-validation group size
  validationSplit: number; // held-out fraction, progress insight only
  seed: number;
}

export function defaultConfig(overrides: Partial<TrainingConfig> = {}): TrainingConfig {
  return {
    epochs: 400,
    learningRate: 0.5,
    lrDecayEvery: 100,
    lrDecayFactor: 0.5,
    weightDecay: 1e-4,
    alpha: 1.0,
    beta: 0.1,
    groupSize: 5,
    validationSplit: 0.1,
    seed: 0,
    ...overrides,
  };
}

export class EmptyDataset extends Error {}
export class DegenerateLabels extends Error {}

/** Emphasize rows whose decision moved the needle: large absolute log
 * speedup, and lots of aggregate execution time behind the measurement. */
export function lossWeight(row: DataRow, cfg: TrainingConfig): number {
  return 1 + cfg.alpha * Math.abs(Math.log(row.speedup)) + cfg.beta * Math.log1p(row.totalTime);
}

export function decisionRows(dataset: Dataset, phase: string): DataRow[] {
  return dataset.rows.filter((r) => !r.isBaseline && r.phase === phase);
}

function learningRateAt(epoch: number, cfg: TrainingConfig): number {
  const steps = Math.floor(epoch / cfg.lrDecayEvery);
  return cfg.learningRate * Math.pow(cfg.lrDecayFactor, steps);
}

export interface FitResult {
  weights: number[];
  bias: number;
  trainLoss: number;
}

/** Full-batch gradient descent on weighted binary cross entropy. */
export function fitLogistic(
  x: number[][],
  y: number[],
  sampleWeights: number[],
  cfg: TrainingConfig,
): FitResult {
  const d = x[0].length;
  const weights = new Array(d).fill(0);
  let bias = 0;
  const totalWeight = sampleWeights.reduce((a, b) => a + b, 0);
  for (let epoch = 0; epoch < cfg.epochs; epoch++) {
    const lr = learningRateAt(epoch, cfg);
    const grad = new Array(d).fill(0);
    let gradB = 0;
    for (let r = 0; r < x.length; r++) {
      const err = (sigmoid(dot(weights, x[r]) + bias) - y[r]) * sampleWeights[r];
      for (let j = 0; j < d; j++) grad[j] += err * x[r][j];
      gradB += err;
    }
    for (let j = 0; j < d; j++) {
      weights[j] -= lr * (grad[j] / totalWeight + cfg.weightDecay * weights[j]);
    }
    bias -= lr * (gradB / totalWeight);
  }
  return { weights, bias, trainLoss: weightedBce(x, y, sampleWeights, weights, bias) };
}

export function weightedBce(
  x: number[][],
  y: number[],
  sampleWeights: number[],
  weights: number[],
  bias: number,
): number {
  let loss = 0;
  let total = 0;
  for (let r = 0; r < x.length; r++) {
    const p = Math.min(Math.max(sigmoid(dot(weights, x[r]) + bias), 1e-12), 1 - 1e-12);
    loss += sampleWeights[r] * -(y[r] * Math.log(p) + (1 - y[r]) * Math.log(1 - p));
    total += sampleWeights[r];
  }
  return loss / total;
}

/** Full-batch gradient descent on weighted mean squared error. */
export function fitLinear(
  x: number[][],
  y: number[],
  sampleWeights: number[],
  cfg: TrainingConfig,
): FitResult {
  const d = x[0].length;
  const weights = new Array(d).fill(0);
  let bias = 0;
  const totalWeight = sampleWeights.reduce((a, b) => a + b, 0);
  for (let epoch = 0; epoch < cfg.epochs; epoch++) {
    const lr = learningRateAt(epoch, cfg);
    const grad = new Array(d).fill(0);
    let gradB = 0;
    for (let r = 0; r < x.length; r++) {
      const err = (dot(weights, x[r]) + bias - y[r]) * sampleWeights[r];
      for (let j = 0; j < d; j++) grad[j] += err * x[r][j];
      gradB += err;
    }
    for (let j = 0; j < d; j++) {
      weights[j] -= lr * (grad[j] / totalWeight + cfg.weightDecay * weights[j]);
    }
    bias -= lr * (gradB / totalWeight);
  }
  let loss = 0;
  let total = 0;
  for (let r = 0; r < x.length; r++) {
    const err = dot(weights, x[r]) + bias - y[r];
    loss += sampleWeights[r] * err * err;
    total += sampleWeights[r];
  }
  return { weights, bias, trainLoss: loss / total };
}

/** Peeling classifier: label = (speedup > 1), standardized features, the
 * exporter's scaler embedded for raw-feature inference. */
export function trainPeel(
  featureNames: string[],
  rows: DataRow[],
  scaler: Scaler,
  cfg: TrainingConfig,
): PeelModel {
  if (rows.length === 0) throw new EmptyDataset("no peel rows to train on");
  const y = rows.map((r) => (r.speedup > 1 ? 1 : 0));
  if (y.every((v) => v === y[0])) {
    throw new DegenerateLabels("every peel row has the same label");
  }
  const x = rows.map((r) => r.features);
  const w = rows.map((r) => lossWeight(r, cfg));
  const fit = fitLogistic(x, y, w, cfg);
  return {
    kind: "peel-classifier",
    feature_names: [...featureNames],
    scaler: buildScaler(scaler),
    weights: fit.weights,
    bias: fit.bias,
    threshold: 0.5,
    factors: [...FACTORS],
    version: 1,
  };
}

/** Per-factor log-speedup regressors sharing one scaler; the factor-1
 * column stays at the fixed target 0. */
export function trainUnroll(
  featureNames: string[],
  rows: DataRow[],
  scaler: Scaler,
  cfg: TrainingConfig,
): UnrollModel {
  if (rows.length === 0) throw new EmptyDataset("no unroll rows to train on");
  const d = featureNames.length;
  const weights: number[][] = [];
  const bias: number[] = [];
  for (const factor of FACTORS) {
    if (factor === 1) {
      weights.push(new Array(d).fill(0));
      bias.push(0);
      continue;
    }
    const sub = rows.filter((r) => r.param === factor);
    if (sub.length === 0) {
      weights.push(new Array(d).fill(0));
      bias.push(0);
      continue;
    }
    const x = sub.map((r) => r.features);
    const y = sub.map((r) => Math.log(r.speedup));
    const w = sub.map((r) => lossWeight(r, cfg));
    const fit = fitLinear(x, y, w, cfg);
    weights.push(fit.weights);
    bias.push(fit.bias);
  }
  return {
    kind: "unroll-regressor",
    feature_names: [...featureNames],
    scaler: buildScaler(scaler),
    weights,
    bias,
    threshold: 0.5,
    factors: [...FACTORS],
    version: 1,
  };
}

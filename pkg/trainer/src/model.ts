import type { Scaler } from "./data.js";

export const FACTORS = [1, 2, 4, 8, 16, 32] as const;

export interface PeelModel {
  kind: "peel-classifier";
  feature_names: string[];
  scaler: { mean: number[]; std: number[] };
  weights: number[];
  bias: number;
  threshold: number;
  factors: number[];
  version: 1;
}

export interface UnrollModel {
  kind: "unroll-regressor";
  feature_names: string[];
  scaler: { mean: number[]; std: number[] };
  weights: number[][]; // factors x features
  bias: number[];
  threshold: number;
  factors: number[];
  version: 1;
}

export type ModelFile = PeelModel | UnrollModel;

/** Field order is fixed, so one (seed, dataset) pair always serializes to
 * the same bytes. */
export function serializeModel(model: ModelFile): string {
  const doc = {
    kind: model.kind,
    feature_names: model.feature_names,
    scaler: { mean: model.scaler.mean, std: model.scaler.std },
    weights: model.weights,
    bias: model.bias,
    threshold: model.threshold,
    factors: model.factors,
    version: model.version,
  };
  return JSON.stringify(doc, null, 2) + "\n";
}

export function sigmoid(x: number): number {
  if (x >= 0) return 1 / (1 + Math.exp(-x));
  const e = Math.exp(x);
  return e / (1 + e);
}

export function dot(a: number[], b: number[]): number {
  let acc = 0;
  for (let i = 0; i < a.length; i++) acc += a[i] * b[i];
  return acc;
}

/** Classifier decision on a standardized feature row (boundary: >=). */
export function predictPeelZ(model: PeelModel, z: number[]): boolean {
  return sigmoid(dot(model.weights, z) + model.bias) >= model.threshold;
}

/** Per-factor scores on a standardized row; ties take the smaller factor. */
export function predictUnrollZ(model: UnrollModel, z: number[]): { factor: number; scores: number[] } {
  const scores = model.weights.map((row, k) => dot(row, z) + model.bias[k]);
  let best = 0;
  for (let k = 1; k < scores.length; k++) {
    if (scores[k] > scores[best]) best = k;
  }
  return { factor: model.factors[best], scores };
}

export function buildScaler(scaler: Scaler): { mean: number[]; std: number[] } {
  return { mean: [...scaler.mean], std: [...scaler.std] };
}

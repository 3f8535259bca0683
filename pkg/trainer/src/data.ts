import { readFileSync } from "node:fs";
import { parseCsv } from "./csv.js";

/** One dataset row: measurement metadata plus the feature columns. */
export interface DataRow {
  benchmark: string;
  func: string;
  unitId: number;
  loopId: number;
  phase: string;
  param: number;
  invocations: number;
  totalTime: number;
  avgTime: number;
  baselineAvg: number;
  speedup: number;
  heuristicDecision: number;
  isBaseline: boolean;
  features: number[];
}

export interface Dataset {
  featureNames: string[];
  rows: DataRow[];
}

export interface Scaler {
  features: string[];
  mean: number[];
  std: number[];
}

const META_COLUMNS = [
  "benchmark", "function", "unit_id", "loop_id", "phase", "param",
  "invocations", "total_time", "avg_time", "baseline_avg", "speedup",
  "heuristic_decision", "is_baseline",
];

export function loadDataset(path: string): Dataset {
  const records = parseCsv(readFileSync(path, "utf8"));
  if (records.length === 0) throw new Error(`${path}: empty dataset`);
  const header = records[0];
  for (let i = 0; i < META_COLUMNS.length; i++) {
    if (header[i] !== META_COLUMNS[i]) {
      throw new Error(`${path}: unexpected column ${header[i]} at ${i}`);
    }
  }
  const featureNames = header.slice(META_COLUMNS.length);
  const rows: DataRow[] = [];
  for (let r = 1; r < records.length; r++) {
    const rec = records[r];
    if (rec.length === 1 && rec[0] === "") continue; // trailing newline
    if (rec.length !== header.length) {
      throw new Error(`${path}: row ${r + 1} has ${rec.length} fields`);
    }
    rows.push({
      benchmark: rec[0],
      func: rec[1],
      unitId: Number(rec[2]),
      loopId: Number(rec[3]),
      phase: rec[4],
      param: Number(rec[5]),
      invocations: Number(rec[6]),
      totalTime: Number(rec[7]),
      avgTime: Number(rec[8]),
      baselineAvg: Number(rec[9]),
      speedup: Number(rec[10]),
      heuristicDecision: Number(rec[11]),
      isBaseline: rec[12] === "1",
      features: rec.slice(META_COLUMNS.length).map(Number),
    });
  }
  return { featureNames, rows };
}

export function loadScaler(path: string): Scaler {
  const doc = JSON.parse(readFileSync(path, "utf8"));
  return { features: doc.features, mean: doc.mean, std: doc.std };
}

/** Population-convention column statistics (matches the exporter). */
export function fitScaler(featureNames: string[], matrix: number[][]): Scaler {
  const n = matrix.length;
  const d = featureNames.length;
  const mean = new Array(d).fill(0);
  const std = new Array(d).fill(0);
  for (const row of matrix) {
    for (let j = 0; j < d; j++) mean[j] += row[j];
  }
  for (let j = 0; j < d; j++) mean[j] /= n;
  for (const row of matrix) {
    for (let j = 0; j < d; j++) {
      const delta = row[j] - mean[j];
      std[j] += delta * delta;
    }
  }
  for (let j = 0; j < d; j++) {
    std[j] = Math.sqrt(std[j] / n);
    if (std[j] === 0) throw new Error(`zero-variance feature ${featureNames[j]}`);
  }
  return { features: [...featureNames], mean, std };
}

export function applyScaler(scaler: Scaler, row: number[]): number[] {
  return row.map((v, j) => (v - scaler.mean[j]) / scaler.std[j]);
}

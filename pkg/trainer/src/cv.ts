import type { Dataset, DataRow, Scaler } from "./data.js";
import { predictPeelZ, predictUnrollZ } from "./model.js";
import { Rng } from "./rng.js";
import {
  DegenerateLabels,
  TrainingConfig,
  trainPeel,
  trainUnroll,
} from "./train.js";

export interface FoldReport {
  fold: number;
  benchmarks: string[];
  nTrain: number;
  nEval: number;
  accuracy: number;
  estBaseline: number;
  estModel: number;
  estBest: number;
  missing: number; // decisions whose predicted parameter had no measurement
  degenerate: boolean;
}

interface MethodRecord {
  invocations: number;
  baselineAvg: number;
  decisions: Map<number, Map<number, number>>; // loop -> param -> avg
  features: Map<number, number[]>; // loop -> standardized features
}

function methodRecords(rows: DataRow[]): Map<string, MethodRecord> {
  const methods = new Map<string, MethodRecord>();
  for (const row of rows) {
    const key = `${row.benchmark}#${row.unitId}`;
    let rec = methods.get(key);
    if (!rec) {
      rec = { invocations: 0, baselineAvg: 0, decisions: new Map(), features: new Map() };
      methods.set(key, rec);
    }
    rec.invocations += row.invocations;
    if (row.isBaseline) {
      rec.baselineAvg = row.baselineAvg;
      continue;
    }
    let table = rec.decisions.get(row.loopId);
    if (!table) {
      table = new Map();
      rec.decisions.set(row.loopId, table);
    }
    table.set(row.param, row.avgTime);
    rec.features.set(row.loopId, row.features);
  }
  return methods;
}

/** Estimated method time: invocations * (sum of per-decision deltas against
 * the baseline + baseline average). */
function estimate(rec: MethodRecord, predicted: Map<number, number>, identity: number): {
  value: number;
  missing: number;
} {
  let delta = 0;
  let missing = 0;
  for (const [loop, table] of rec.decisions) {
    const param = predicted.get(loop) ?? identity;
    if (param === identity) continue;
    const avg = table.get(param);
    if (avg === undefined) {
      missing++; // fall back to the identity decision
      continue;
    }
    delta += avg - rec.baselineAvg;
  }
  return { value: rec.invocations * (delta + rec.baselineAvg), missing };
}

function estimateBest(rec: MethodRecord): number {
  let delta = 0;
  for (const table of rec.decisions.values()) {
    let best = 0; // identity delta
    for (const avg of table.values()) best = Math.min(best, avg - rec.baselineAvg);
    delta += best;
  }
  return rec.invocations * (delta + rec.baselineAvg);
}

export function groupBenchmarks(names: string[], groupSize: number, seed: number): string[][] {
  const shuffled = new Rng(seed).shuffle([...names].sort());
  const groups: string[][] = [];
  for (let i = 0; i < shuffled.length; i += groupSize) {
    groups.push(shuffled.slice(i, i + groupSize));
  }
  return groups;
}

/** Leave-group-out evaluation: one model per fold, trained without the
 * fold's benchmarks, scored on them alone. */
export function crossValidate(
  dataset: Dataset,
  scaler: Scaler,
  kind: "peel" | "unroll",
  cfg: TrainingConfig,
): FoldReport[] {
  const phase = kind;
  const all = dataset.rows.filter((r) => r.phase === phase);
  const names = [...new Set(all.map((r) => r.benchmark))];
  if (names.length < 1) throw new Error("dataset has no benchmarks");

  const degenerate = names.length <= cfg.groupSize;
  const groups = degenerate ? [names] : groupBenchmarks(names, cfg.groupSize, cfg.seed);

  const reports: FoldReport[] = [];
  groups.forEach((group, fold) => {
    const inGroup = new Set(group);
    const evalRows = all.filter((r) => inGroup.has(r.benchmark));
    const trainRows = degenerate ? evalRows : all.filter((r) => !inGroup.has(r.benchmark));
    for (const row of trainRows) {
      if (!degenerate && inGroup.has(row.benchmark)) {
        throw new Error("fold separation violated");
      }
    }
    const trainDecisions = trainRows.filter((r) => !r.isBaseline);
    const identity = kind === "peel" ? 0 : 1;

    let predictRow: (features: number[]) => number;
    try {
      if (kind === "peel") {
        const model = trainPeel(dataset.featureNames, trainDecisions, scaler, cfg);
        predictRow = (f) => (predictPeelZ(model, f) ? 1 : 0);
      } else {
        const model = trainUnroll(dataset.featureNames, trainDecisions, scaler, cfg);
        predictRow = (f) => predictUnrollZ(model, f).factor;
      }
    } catch (err) {
      if (err instanceof DegenerateLabels) {
        predictRow = () => identity;
      } else {
        throw err;
      }
    }

    // per-row decision agreement with the measured speedup direction
    let agree = 0;
    let scored = 0;
    for (const row of evalRows) {
      if (row.isBaseline) continue;
      scored++;
      const predicted = predictRow(row.features);
      if (kind === "peel") {
        const shouldApply = row.speedup > 1 ? 1 : 0;
        if (predicted === shouldApply) agree++;
      } else if ((predicted === row.param) === row.speedup >= 1) {
        agree++;
      }
    }

    const methods = methodRecords(evalRows);
    let estBaseline = 0;
    let estModel = 0;
    let estBest = 0;
    let missing = 0;
    for (const rec of methods.values()) {
      estBaseline += rec.invocations * rec.baselineAvg;
      const predicted = new Map<number, number>();
      for (const [loop, features] of rec.features) {
        predicted.set(loop, predictRow(features));
      }
      const est = estimate(rec, predicted, identity);
      estModel += est.value;
      missing += est.missing;
      estBest += estimateBest(rec);
    }

    reports.push({
      fold,
      benchmarks: group,
      nTrain: trainDecisions.length,
      nEval: scored,
      accuracy: scored ? agree / scored : 1,
      estBaseline,
      estModel,
      estBest,
      missing,
      degenerate,
    });
  });
  return reports;
}

export function reportCsv(reports: FoldReport[]): (string | number)[][] {
  const rows: (string | number)[][] = [
    ["fold", "benchmarks", "n_train", "n_eval", "accuracy", "est_baseline",
     "est_model", "est_best", "missing", "degenerate"],
  ];
  for (const r of reports) {
    rows.push([
      r.fold, r.benchmarks.join(";"), r.nTrain, r.nEval,
      r.accuracy.toPrecision(17), r.estBaseline.toPrecision(17),
      r.estModel.toPrecision(17), r.estBest.toPrecision(17),
      r.missing, r.degenerate ? 1 : 0,
    ]);
  }
  return rows;
}

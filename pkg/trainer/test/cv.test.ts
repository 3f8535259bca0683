import { describe, expect, it } from "vitest";

import { crossValidate, groupBenchmarks, reportCsv } from "../src/cv.js";
import { defaultConfig } from "../src/train.js";
import { makePeelSet, makeUnrollSet } from "./synthetic.js";

const cfg = defaultConfig({ epochs: 120 });

describe("benchmark grouping", () => {
  it("ten benchmarks at size five make two disjoint folds", () => {
    const names = Array.from({ length: 10 }, (_, i) => `b${i}`);
    const groups = groupBenchmarks(names, 5, 0);
    expect(groups).toHaveLength(2);
    const seen = groups.flat().sort();
    expect(seen).toEqual([...names].sort());
  });

  it("grouping is deterministic per seed", () => {
    const names = Array.from({ length: 15 }, (_, i) => `b${i}`);
    expect(groupBenchmarks(names, 5, 4)).toEqual(groupBenchmarks(names, 5, 4));
    expect(groupBenchmarks(names, 5, 4)).not.toEqual(groupBenchmarks(names, 5, 5));
  });
});

describe("leave-group-out evaluation", () => {
  it("every benchmark appears in exactly one evaluation fold", () => {
    const { dataset, scaler } = makePeelSet(400, 31, 10);
    const reports = crossValidate(dataset, scaler, "peel", cfg);
    expect(reports).toHaveLength(2);
    const seen = reports.flatMap((r) => r.benchmarks).sort();
    expect(seen).toEqual(
      [...new Set(dataset.rows.map((r) => r.benchmark))].sort(),
    );
    for (const r of reports) {
      expect(r.degenerate).toBe(false);
      expect(r.nEval).toBeGreaterThan(0);
      expect(r.accuracy).toBeGreaterThan(0.8); // separable data
      expect(r.estBest).toBeLessThanOrEqual(r.estBaseline + 1e-9);
    }
  });

  it("degenerates to train == eval when the group covers everything", () => {
    const { dataset, scaler } = makePeelSet(120, 37, 3);
    const reports = crossValidate(dataset, scaler, "peel",
                                  defaultConfig({ epochs: 80, groupSize: 50 }));
    expect(reports).toHaveLength(1);
    expect(reports[0].degenerate).toBe(true);
  });

  it("works for the unroll regressor and reports estimates", () => {
    const made = makeUnrollSet(120, 41, 0.02, 10);
    const reports = crossValidate(made.dataset, made.scaler, "unroll", cfg);
    expect(reports.length).toBeGreaterThanOrEqual(2);
    for (const r of reports) {
      expect(r.estModel).toBeGreaterThan(0);
      expect(r.estBest).toBeLessThanOrEqual(r.estModel + 1e-9);
    }
  });

  it("emits a parseable report", () => {
    const { dataset, scaler } = makePeelSet(200, 43, 10);
    const rows = reportCsv(crossValidate(dataset, scaler, "peel", cfg));
    expect(rows[0][0]).toBe("fold");
    expect(rows).toHaveLength(3);
    expect(rows[1]).toHaveLength(rows[0].length);
  });
});

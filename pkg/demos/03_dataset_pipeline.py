#!/usr/bin/env python3
"""From measurements to a training-ready dataset: join fork measurements
with loop features, filter the noise floor, reduce sparsity, standardize,
and bin decision quality into a histogram."""

import tempfile
from pathlib import Path

from forklab import analysis as an
from forklab import dataset as ds
from forklab.cli import main

corpus = Path(__file__).parent.parent / "corpus"
run_dir = Path(tempfile.mkdtemp(prefix="forklab-demo-")) / "run"

main(["forkgen", str(corpus / "multi_fn.ml"), "--opt", "unroll",
      "--invocations", "600", "--out", str(run_dir)])

rows = ds.import_csv(run_dir / "raw.csv")
print(f"\n{len(rows)} raw rows "
      f"({sum(1 for r in rows if r.is_baseline)} baseline)")

kept, stats = ds.filter_rows(rows, ds.FilterConfig(min_invocations=50, min_avg_time=10,
                                                   eps_speedup=0.001))
print(f"filters: {stats}")

reduced, retained = ds.sparsity_reduce(kept)
print(f"sparsity: {len(retained)} features retained of {len(rows[0].features)}")

scaled, scaler = ds.standardize(reduced)
print(f"standardized; first feature '{scaler.feature_names[0]}' "
      f"mean={scaler.mean[0]:.3f} std={scaler.std[0]:.3f}")

items = [
    (r.heuristic_decision == r.param, r.speedup) for r in kept if not r.is_baseline
]
print("\nspeedup histogram (4 bins per decade):")
for b in an.histogram(items, bins_per_decade=4):
    if b.total:
        bar = "#" * b.total
        print(f"  x{b.center:<7.3g} {bar}  (TP={b.counts['TP']} TN={b.counts['TN']} "
              f"FP={b.counts['FP']} FN={b.counts['FN']})")

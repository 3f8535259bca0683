#!/usr/bin/env python3
"""Decision-quality analytics: estimate per-method execution times from
fork measurements, bound the best case, compare estimate sets with the
rank-sum test, and run inference with a portable linear model."""

import json
import tempfile
from pathlib import Path

from forklab import analysis as an

# per-method records: measured average self time per (decision, parameter)
methods = [
    an.DecisionRecord("hot_a", invocations=1000, baseline_avg=120.0,
                      decisions={0: {2: 95.0, 4: 88.0, 8: 91.0, 16: 99.0, 32: 130.0}},
                      identity_param=1),
    an.DecisionRecord("hot_b", invocations=400, baseline_avg=60.0,
                      decisions={0: {2: 61.0, 4: 64.0, 8: 70.0, 16: 82.0, 32: 95.0},
                                 1: {2: 55.0, 4: 52.0, 8: 58.0, 16: 66.0, 32: 80.0}},
                      identity_param=1),
]

conservative = {0: 1, 1: 1}
aggressive = {0: 4, 1: 4}
for rec in methods:
    pred = {d: aggressive[d] for d in rec.decisions}
    base = rec.invocations * rec.baseline_avg
    est = an.estimate_method(rec, pred)
    best = an.estimate_best(rec)
    print(f"{rec.function}: baseline={base:.0f} factor4={est:.0f} best={best:.0f}")

total_base = sum(r.invocations * r.baseline_avg for r in methods)
total_best = an.estimate_benchmark(methods, lambda r: {
    d: min(t, key=t.get) for d, t in r.decisions.items()
})
print(f"benchmark: baseline={total_base:.0f} best-known={total_best:.0f} "
      f"({100 * (1 - total_best / total_base):.1f}% headroom)\n")

a = [101.5, 99.8, 100.9, 102.3, 101.1]
b = [98.2, 97.9, 99.0, 98.8, 97.5]
result = an.ranksum_test(a, b)
print(f"rank-sum test between two measurement sets: U={result.u} "
      f"p={result.p:.4f} ({result.method})")

model_doc = {
    "kind": "peel-classifier",
    "feature_names": ["size", "frequency", "has_exact_trip_count"],
    "scaler": {"mean": [22.0, 14.0, 0.4], "std": [9.0, 21.0, 0.49]},
    "weights": [-0.8, 1.3, 0.2],
    "bias": 0.05,
    "threshold": 0.5,
    "factors": [1, 2, 4, 8, 16, 32],
    "version": 1,
}
path = Path(tempfile.mkdtemp(prefix="forklab-demo-")) / "model.json"
path.write_text(json.dumps(model_doc))
model = an.load_model(path)
for features in ({"size": 12.0, "frequency": 80.0, "has_exact_trip_count": 1.0},
                 {"size": 45.0, "frequency": 1.0, "has_exact_trip_count": 0.0}):
    verdict = "peel" if an.predict_peel(model, features) else "skip"
    print(f"model says {verdict:>4} for {features}")

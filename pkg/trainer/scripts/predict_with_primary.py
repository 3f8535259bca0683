#!/usr/bin/env python3
"""Bridge for the cross-component round trip: load a trainer-produced
model.json with the runtime's inference code and predict over a CSV of raw
feature rows (one column per feature name).

    predict_with_primary.py MODEL.json ROWS.csv OUT.csv
"""

import csv
import sys

from forklab.analysis import load_model, predict_peel, predict_unroll


def main(model_path: str, rows_path: str, out_path: str) -> int:
    model = load_model(model_path)
    with open(rows_path, newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    with open(out_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["prediction"])
        for row in rows:
            features = {name: float(value) for name, value in row.items()}
            if model.kind == "peel-classifier":
                writer.writerow([1 if predict_peel(model, features) else 0])
            else:
                writer.writerow([predict_unroll(model, features)])
    return 0


if __name__ == "__main__":
    if len(sys.argv) != 4:
        print(__doc__, file=sys.stderr)
        sys.exit(1)
    sys.exit(main(*sys.argv[1:]))

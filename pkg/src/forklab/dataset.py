"""Dataset assembly: join storage measurements with features and decisions,
apply the invocation/time/speedup filters, sparsity reduction and
standardization, and move rows through CSV losslessly.

Baseline rows are kept (flagged) because downstream estimation needs the
per-unit baseline averages; filters and column statistics only look at
decision rows.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable

import numpy as np

from .errors import FormatError, MissingBaseline, ZeroVariance
from .features import schema
from .selftime import PerfStorage, fork_avg, slot_invocations, slot_total_time

META_COLUMNS = (
    "benchmark", "function", "unit_id", "loop_id", "phase", "param",
    "invocations", "total_time", "avg_time", "baseline_avg", "speedup",
    "heuristic_decision", "is_baseline",
)


@dataclass
class DataPoint:
    benchmark: str
    function: str
    unit_id: int
    loop_id: int  # -1 on baseline rows
    phase: str
    param: int  # peel: 0/1; unroll: factor (1 on baseline)
    invocations: int
    total_time: int
    avg_time: float
    baseline_avg: float
    speedup: float
    heuristic_decision: int
    is_baseline: bool
    features: dict[str, float] = field(default_factory=dict)


@dataclass(frozen=True)
class FilterConfig:
    min_invocations: int = 100
    min_avg_time: float = 50.0
    eps_speedup: float = 0.01  # drop |ln speedup| below this
    sparsity_threshold: float = 0.05  # minimum nonzero fraction to keep a feature


@dataclass(frozen=True)
class FilterStats:
    raw: int
    filtered: int

    @property
    def percent(self) -> float:
        if self.raw == 0:
            return 100.0
        return round(1000 * self.filtered / self.raw) / 10

    def __str__(self) -> str:
        return f"raw={self.raw}, filtered={self.filtered}, pct={self.percent}"


@dataclass
class Scaler:
    feature_names: list[str]
    mean: list[float]
    std: list[float]

    def to_json(self) -> str:
        return json.dumps(
            {"features": self.feature_names, "mean": self.mean, "std": self.std},
            indent=2,
        )

    @classmethod
    def from_json(cls, text: str) -> "Scaler":
        doc = json.loads(text)
        return cls(list(doc["features"]), list(doc["mean"]), list(doc["std"]))


def build(storage: PerfStorage, units: Iterable, benchmark: str) -> list[DataPoint]:
    """One decision row per non-baseline fork plus a flagged baseline row
    per unit; speedup is the unit's baseline average over the fork average."""
    from .analysis import heuristic_peel, heuristic_unroll

    rows: list[DataPoint] = []
    for unit in units:
        base_inv = storage.slots[slot_invocations(unit.storage_base, 0)]
        if base_inv == 0:
            raise MissingBaseline(
                f"unit {unit.unit_id} ({unit.function_name}) has an unmeasured baseline"
            )
        baseline_avg = float(fork_avg(storage, unit.storage_base, 0))
        identity = unit.spec.identity_param()
        rows.append(
            DataPoint(
                benchmark=benchmark,
                function=unit.function_name,
                unit_id=unit.unit_id,
                loop_id=-1,
                phase=unit.phase,
                param=identity,
                invocations=base_inv,
                total_time=storage.slots[slot_total_time(unit.storage_base, 0)],
                avg_time=baseline_avg,
                baseline_avg=baseline_avg,
                speedup=1.0,
                heuristic_decision=identity,
                is_baseline=True,
                features={name: 0.0 for name in schema().names},
            )
        )
        for k, (loop_id, param) in enumerate(unit.spec.decisions, start=1):
            inv = storage.slots[slot_invocations(unit.storage_base, k)]
            if inv == 0:
                continue  # unmeasured fork: no decision row
            tot = storage.slots[slot_total_time(unit.storage_base, k)]
            avg = float(fork_avg(storage, unit.storage_base, k))
            feats = unit.feature_rows[k - 1]
            if unit.phase == "peel":
                decision = 1 if heuristic_peel(feats) else 0
            else:
                decision = heuristic_unroll(feats)
            rows.append(
                DataPoint(
                    benchmark=benchmark,
                    function=unit.function_name,
                    unit_id=unit.unit_id,
                    loop_id=loop_id,
                    phase=unit.phase,
                    param=param,
                    invocations=inv,
                    total_time=tot,
                    avg_time=avg,
                    baseline_avg=baseline_avg,
                    speedup=baseline_avg / avg if avg > 0 else math.inf,
                    heuristic_decision=decision,
                    is_baseline=False,
                    features=feats.as_dict(),
                )
            )
    return rows


def filter_rows(rows: list[DataPoint], cfg: FilterConfig) -> tuple[list[DataPoint], FilterStats]:
    """Drop decision rows that fail the invocation floor (fork and its
    baseline), the average-time floor, or sit inside the |ln speedup| < eps
    dead zone.  Baseline rows pass through untouched and are not counted in
    the stats.  Idempotent."""
    base_inv: dict[tuple[str, int], int] = {}
    for row in rows:
        if row.is_baseline:
            base_inv[(row.benchmark, row.unit_id)] = row.invocations

    kept: list[DataPoint] = []
    raw = filtered = 0
    for row in rows:
        if row.is_baseline:
            kept.append(row)
            continue
        raw += 1
        binv = base_inv.get((row.benchmark, row.unit_id), row.invocations)
        if row.invocations < cfg.min_invocations or binv < cfg.min_invocations:
            continue
        if row.avg_time < cfg.min_avg_time:
            continue
        if row.speedup <= 0 or abs(math.log(row.speedup)) < cfg.eps_speedup:
            continue
        kept.append(row)
        filtered += 1
    return kept, FilterStats(raw, filtered)


def _decision_matrix(rows: list[DataPoint], names: list[str]) -> np.ndarray:
    data = [[row.features[n] for n in names] for row in rows if not row.is_baseline]
    return np.asarray(data, dtype=float)


def _feature_names(rows: list[DataPoint]) -> list[str]:
    for row in rows:
        return list(row.features.keys())
    return []


def sparsity_reduce(
    rows: list[DataPoint], threshold: float = FilterConfig.sparsity_threshold
) -> tuple[list[DataPoint], list[str]]:
    """Remove features that are almost always zero or constant across the
    decision rows; every row is projected onto the retained names."""
    if not rows:
        raise ValueError("sparsity reduction needs at least one row")
    names = _feature_names(rows)
    mat = _decision_matrix(rows, names)
    if mat.size == 0:
        return rows, names
    nonzero = (mat != 0).mean(axis=0)
    constant = mat.max(axis=0) == mat.min(axis=0)
    retained = [
        n for i, n in enumerate(names) if nonzero[i] >= threshold and not constant[i]
    ]
    projected = [
        replace(row, features={n: row.features[n] for n in retained}) for row in rows
    ]
    return projected, retained


def standardize(rows: list[DataPoint]) -> tuple[list[DataPoint], Scaler]:
    """Z-score every retained feature with population statistics computed
    over the decision rows; the scaler is recorded for inference reuse."""
    names = _feature_names(rows)
    mat = _decision_matrix(rows, names)
    mean = mat.mean(axis=0)
    std = mat.std(axis=0)  # population convention
    for i, n in enumerate(names):
        if std[i] == 0:
            raise ZeroVariance(f"feature '{n}' is constant; run sparsity_reduce first")
    scaled = [
        replace(
            row,
            features={
                n: (row.features[n] - mean[i]) / std[i] for i, n in enumerate(names)
            },
        )
        for row in rows
    ]
    return scaled, Scaler(names, [float(m) for m in mean], [float(s) for s in std])


# -- CSV ---------------------------------------------------------------------


def _fmt(value) -> str:
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, int):
        return str(value)
    return format(value, ".17g")


def export_csv(rows: list[DataPoint], path) -> None:
    names = _feature_names(rows)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(list(META_COLUMNS) + names)
        for row in rows:
            writer.writerow(
                [
                    row.benchmark, row.function, _fmt(row.unit_id), _fmt(row.loop_id),
                    row.phase, _fmt(row.param), _fmt(row.invocations),
                    _fmt(row.total_time), _fmt(row.avg_time), _fmt(row.baseline_avg),
                    _fmt(row.speedup), _fmt(row.heuristic_decision),
                    _fmt(row.is_baseline),
                ]
                + [_fmt(row.features[n]) for n in names]
            )


def import_csv(path) -> list[DataPoint]:
    rows: list[DataPoint] = []
    try:
        fh = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise FormatError(f"cannot read {path}: {exc}") from exc
    with fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise FormatError(f"{path}: empty file") from None
        if tuple(header[: len(META_COLUMNS)]) != META_COLUMNS:
            raise FormatError(f"{path}: unexpected header {header[:5]}...")
        feature_names = header[len(META_COLUMNS):]
        for lineno, rec in enumerate(reader, start=2):
            if len(rec) != len(header):
                raise FormatError(
                    f"{path}: row {lineno} has {len(rec)} fields, expected {len(header)}"
                )
            meta = rec[: len(META_COLUMNS)]
            feats = rec[len(META_COLUMNS):]
            rows.append(
                DataPoint(
                    benchmark=meta[0],
                    function=meta[1],
                    unit_id=int(meta[2]),
                    loop_id=int(meta[3]),
                    phase=meta[4],
                    param=int(meta[5]),
                    invocations=int(meta[6]),
                    total_time=int(meta[7]),
                    avg_time=float(meta[8]),
                    baseline_avg=float(meta[9]),
                    speedup=float(meta[10]),
                    heuristic_decision=int(meta[11]),
                    is_baseline=meta[12] == "1",
                    features=dict(zip(feature_names, (float(v) for v in feats))),
                )
            )
    return rows


def write_scaler(scaler: Scaler, path) -> None:
    Path(path).write_text(scaler.to_json() + "\n", encoding="utf-8")


def read_scaler(path) -> Scaler:
    return Scaler.from_json(Path(path).read_text(encoding="utf-8"))

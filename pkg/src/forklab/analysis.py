"""Decision-quality analytics and learned-heuristic inference.

Covers the per-method execution-time estimator (impact of each decision
relative to the unit baseline, scaled by total invocations), TP/FP/TN/FN
classification with log-binned histograms, geometric means, the
Mann-Whitney rank-sum test (exact by enumeration for small samples, normal
approximation otherwise) and linear/logistic model files the trainer emits.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from itertools import combinations
from pathlib import Path
from typing import Iterable, Optional, Sequence

from .errors import (
    FormatError,
    KindMismatch,
    MissingMeasurement,
    NonPositiveSpeedup,
    SchemaMismatch,
)
from .features import FeatureVector, schema

FACTORS = (1, 2, 4, 8, 16, 32)


# -- execution-time estimation (per-decision impacts vs. baseline) -----------


@dataclass
class DecisionRecord:
    """Measured averages for one method: per decision id a map from
    parameter value to average self time, plus the shared baseline."""

    function: str
    invocations: int
    baseline_avg: float
    decisions: dict[int, dict[int, float]]  # decision id -> param -> avg
    identity_param: int = 0

    def avg_for(self, decision: int, param: int) -> float:
        if param == self.identity_param:
            return self.baseline_avg
        table = self.decisions.get(decision, {})
        if param not in table:
            raise MissingMeasurement(decision, param)
        return table[param]


def estimate_method(rec: DecisionRecord, predicted: dict[int, int]) -> float:
    """Estimated total time with the predicted parameter per decision:

        i * ( sum_d (avg_d_p - baseline) + baseline )
    """
    delta = 0.0
    for decision in rec.decisions:
        if decision not in predicted:
            raise MissingMeasurement(decision, None)
        delta += rec.avg_for(decision, predicted[decision]) - rec.baseline_avg
    return rec.invocations * (delta + rec.baseline_avg)


def estimate_best(rec: DecisionRecord) -> float:
    """Lower bound: the per-decision argmin average (identity included)."""
    predicted = {}
    for decision, table in rec.decisions.items():
        best_param, best_avg = rec.identity_param, rec.baseline_avg
        for param, avg in sorted(table.items()):
            if avg < best_avg:
                best_param, best_avg = param, avg
        predicted[decision] = best_param
    return estimate_method(rec, predicted)


def estimate_benchmark(records: Iterable[DecisionRecord], predictor) -> float:
    """Sum of method estimates; `predictor(rec)` yields the parameter map."""
    return sum(estimate_method(rec, predictor(rec)) for rec in records)


# -- decision classification and histogram -----------------------------------


@dataclass(frozen=True)
class Classification:
    label: str  # TP | TN | FP | FN
    speedup: float
    applied: bool


def classify(applied: bool, speedup: float) -> Classification:
    """Speedup of exactly 1 counts as correct either way (TP if applied)."""
    if speedup <= 0:
        raise NonPositiveSpeedup(f"speedup must be positive, got {speedup}")
    if applied:
        label = "TP" if speedup >= 1 else "FP"
    else:
        label = "FN" if speedup > 1 else "TN"
    return Classification(label, speedup, applied)


@dataclass
class HistogramBin:
    k: int
    center: float
    counts: dict[str, int] = field(default_factory=lambda: {"TP": 0, "TN": 0, "FP": 0, "FN": 0})

    @property
    def total(self) -> int:
        return sum(self.counts.values())


def histogram(
    items: Sequence[tuple[bool, float]], bins_per_decade: int = 4, max_bin: Optional[int] = None
) -> list[HistogramBin]:
    """Log10-scaled speedup bins split by classification.

    Bin k covers log10(speedup) in [k/B - 1/(2B), k/B + 1/(2B)); bins at
    +-max_bin absorb the overflow in both directions (default: one decade
    each way, max_bin = B).
    """
    if bins_per_decade < 1:
        raise ValueError("bins_per_decade must be >= 1")
    cap = max_bin if max_bin is not None else bins_per_decade
    bins = {
        k: HistogramBin(k, 10 ** (k / bins_per_decade)) for k in range(-cap, cap + 1)
    }
    for applied, speedup in items:
        c = classify(applied, speedup)
        k = math.floor(bins_per_decade * math.log10(speedup) + 0.5)
        k = max(-cap, min(cap, k))
        bins[k].counts[c.label] += 1
    return [bins[k] for k in sorted(bins)]


def geomean(xs: Sequence[float]) -> float:
    if not xs:
        raise NonPositiveSpeedup("geomean of empty sequence")
    if any(x <= 0 for x in xs):
        raise NonPositiveSpeedup("geomean needs strictly positive values")
    if len(xs) == 1:
        return float(xs[0])
    return math.exp(sum(math.log(x) for x in xs) / len(xs))


# -- Mann-Whitney rank-sum test ----------------------------------------------

EXACT_LIMIT = 12


def _midranks(pooled: Sequence[float]) -> list[float]:
    order = sorted(range(len(pooled)), key=lambda i: pooled[i])
    ranks = [0.0] * len(pooled)
    i = 0
    while i < len(order):
        j = i
        while j + 1 < len(order) and pooled[order[j + 1]] == pooled[order[i]]:
            j += 1
        rank = (i + j) / 2 + 1
        for t in range(i, j + 1):
            ranks[order[t]] = rank
        i = j + 1
    return ranks


def _u_statistic(ranks_a: Sequence[float], n1: int, n2: int) -> float:
    r1 = sum(ranks_a)
    return r1 - n1 * (n1 + 1) / 2


@dataclass(frozen=True)
class RankTestResult:
    u: float
    p: float
    method: str  # "exact" | "normal"


def ranksum_test(a: Sequence[float], b: Sequence[float]) -> RankTestResult:
    """Two-sided Mann-Whitney U with midrank ties.

    Exact p by enumerating all C(n+m, n) group assignments when n+m <= 12,
    otherwise the normal approximation with tie and continuity correction.
    """
    if not a or not b:
        raise ValueError("both samples must be non-empty")
    n1, n2 = len(a), len(b)
    pooled = list(a) + list(b)
    ranks = _midranks(pooled)
    u = _u_statistic(ranks[:n1], n1, n2)
    mu = n1 * n2 / 2

    if n1 + n2 <= EXACT_LIMIT:
        # midranks sit on a 0.5 grid, so the comparisons below are exact
        total = 0
        extreme = 0
        observed = abs(u - mu)
        for combo in combinations(range(n1 + n2), n1):
            total += 1
            u_perm = sum(ranks[i] for i in combo) - n1 * (n1 + 1) / 2
            if abs(u_perm - mu) >= observed:
                extreme += 1
        return RankTestResult(u, extreme / total, "exact")

    return RankTestResult(u, ranksum_normal_p(a, b), "normal")


def ranksum_normal_p(a: Sequence[float], b: Sequence[float]) -> float:
    """Normal-approximation p regardless of sample size (for comparisons)."""
    n1, n2 = len(a), len(b)
    pooled = list(a) + list(b)
    ranks = _midranks(pooled)
    u = _u_statistic(ranks[:n1], n1, n2)
    mu = n1 * n2 / 2
    n = n1 + n2
    tie_term = sum(c**3 - c for c in _counts(pooled).values())
    sigma_sq = (n1 * n2 / 12) * ((n + 1) - tie_term / (n * (n - 1)))
    if sigma_sq <= 0:
        return 1.0
    z = max(0.0, (abs(u - mu) - 0.5) / math.sqrt(sigma_sq))
    return min(1.0, 2 * (1 - _norm_cdf(z)))


def _counts(values: Sequence[float]) -> dict[float, int]:
    out: dict[float, int] = {}
    for v in values:
        out[v] = out.get(v, 0) + 1
    return out


def _norm_cdf(x: float) -> float:
    return 0.5 * (1 + math.erf(x / math.sqrt(2)))


# -- built-in heuristics (the baselines learned models compete against) ------


def heuristic_peel(features: FeatureVector) -> bool:
    """Peel small, frequently-executed loops."""
    return features["size"] <= 40 and features["frequency"] >= 2


def heuristic_unroll(features: FeatureVector) -> int:
    """Largest factor that keeps the unrolled body under the size budget;
    requires an exact trip count."""
    if not features["has_exact_trip_count"]:
        return 1
    size = features["size"]
    best = 1
    for f in (2, 4, 8, 16, 32):
        if size * f <= 128:
            best = f
    return best


# -- learned-model inference ---------------------------------------------------


@dataclass
class ModelFile:
    kind: str  # "peel-classifier" | "unroll-regressor"
    feature_names: list[str]
    mean: list[float]
    std: list[float]
    weights: list  # vector (classifier) or matrix factors x features (regressor)
    bias: object  # scalar or per-factor list
    threshold: float = 0.5
    factors: tuple[int, ...] = FACTORS
    version: int = 1


def load_model(path) -> ModelFile:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise FormatError(f"cannot load model {path}: {exc}") from exc
    try:
        model = ModelFile(
            kind=doc["kind"],
            feature_names=list(doc["feature_names"]),
            mean=list(doc["scaler"]["mean"]),
            std=list(doc["scaler"]["std"]),
            weights=doc["weights"],
            bias=doc["bias"],
            threshold=float(doc.get("threshold", 0.5)),
            factors=tuple(doc.get("factors", FACTORS)),
            version=int(doc.get("version", 1)),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"malformed model file {path}: {exc}") from exc
    if model.kind not in ("peel-classifier", "unroll-regressor"):
        raise FormatError(f"unknown model kind {model.kind!r}")
    if not (len(model.mean) == len(model.std) == len(model.feature_names)):
        raise FormatError("scaler and feature_names lengths disagree")
    if any(s <= 0 for s in model.std):
        raise FormatError("scaler stds must be positive")
    known = set(schema().names)
    unknown = [n for n in model.feature_names if n not in known]
    if unknown:
        raise SchemaMismatch(f"model features not in artifact schema: {unknown}")
    n_feat = len(model.feature_names)
    if model.kind == "peel-classifier":
        if len(model.weights) != n_feat or not isinstance(model.bias, (int, float)):
            raise FormatError("classifier needs a weight vector and scalar bias")
    else:
        if len(model.weights) != len(model.factors) or any(
            len(row) != n_feat for row in model.weights
        ):
            raise FormatError("regressor needs a factors x features weight matrix")
        if len(model.bias) != len(model.factors):
            raise FormatError("regressor needs one bias per factor")
        if tuple(sorted(model.factors)) != model.factors:
            raise FormatError("factors must be ascending")
    return model


def _z_values(model: ModelFile, features) -> list[float]:
    if isinstance(features, FeatureVector):
        features = features.as_dict()
    missing = [n for n in model.feature_names if n not in features]
    if missing:
        raise SchemaMismatch(f"feature row lacks model features: {missing}")
    return [
        (features[n] - model.mean[i]) / model.std[i]
        for i, n in enumerate(model.feature_names)
    ]


def _sigmoid(x: float) -> float:
    if x >= 0:
        return 1 / (1 + math.exp(-x))
    e = math.exp(x)
    return e / (1 + e)


def predict_peel(model: ModelFile, features) -> bool:
    """True when sigmoid(w . z + b) reaches the threshold (boundary: >=)."""
    if model.kind != "peel-classifier":
        raise KindMismatch(f"expected peel-classifier, got {model.kind}")
    z = _z_values(model, features)
    score = sum(w * v for w, v in zip(model.weights, z)) + model.bias
    return _sigmoid(score) >= model.threshold


def predict_unroll(model: ModelFile, features) -> int:
    """Factor whose predicted log-speedup is highest; ties take the
    smallest factor (factor 1 is always a candidate)."""
    if model.kind != "unroll-regressor":
        raise KindMismatch(f"expected unroll-regressor, got {model.kind}")
    z = _z_values(model, features)
    best_factor, best_score = None, None
    for row, bias, factor in zip(model.weights, model.bias, model.factors):
        score = sum(w * v for w, v in zip(row, z)) + bias
        if best_score is None or score > best_score:
            best_factor, best_score = factor, score
    return best_factor

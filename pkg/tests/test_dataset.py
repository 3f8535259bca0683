from __future__ import annotations

import math

import pytest
from hypothesis import given, strategies as st

from conftest import forkgen_run
from forklab import dataset as ds
from forklab.errors import FormatError, MissingBaseline, ZeroVariance
from forklab.parser import parse


def point(speedup=1.2, inv=200, avg=100.0, features=None, *, is_baseline=False,
          unit_id=0, loop_id=0, param=1, benchmark="bench"):
    return ds.DataPoint(
        benchmark=benchmark,
        function="kernel",
        unit_id=unit_id,
        loop_id=-1 if is_baseline else loop_id,
        phase="peel",
        param=0 if is_baseline else param,
        invocations=inv,
        total_time=int(avg * inv),
        avg_time=avg,
        baseline_avg=avg * speedup,
        speedup=1.0 if is_baseline else speedup,
        heuristic_decision=0,
        is_baseline=is_baseline,
        features=features or {"f0": 1.0, "f1": 0.0},
    )


def with_baseline(rows, inv=500):
    return [point(is_baseline=True, inv=inv)] + rows


# -- build -----------------------------------------------------------------------


def test_build_speedups_from_run(corpus_sources):
    program = parse(corpus_sources["unroll_sum"])
    _, storage, units = forkgen_run(program, "unroll", [(6,)] * 130)
    rows = ds.build(storage, units, "unroll_sum")
    base_rows = [r for r in rows if r.is_baseline]
    decision_rows = [r for r in rows if not r.is_baseline]
    assert len(base_rows) == len(units) == 1
    assert base_rows[0].speedup == 1.0 and base_rows[0].param == 1
    for r in decision_rows:
        assert r.speedup == r.baseline_avg / r.avg_time
        assert r.features  # projected full schema
    # tight counted loop: unrolling helps, so some fork beats baseline
    assert max(r.speedup for r in decision_rows) > 1


def test_build_missing_baseline():
    program = parse(corpus := "fn kernel(n) { let i = 0; while (i < n) { i = i + 1; } return i; }"
                    "fn main(n) { return kernel(n); }")
    _, storage, units = forkgen_run(program, "peel", [(4,)] * 10)  # warmup only
    with pytest.raises(MissingBaseline):
        ds.build(storage, units, "x")


# -- filter ----------------------------------------------------------------------


def test_filter_drops_and_counts():
    rows = with_baseline(
        [
            point(speedup=1.5),  # kept
            point(speedup=1.001),  # dead zone
            point(speedup=0.5, inv=10),  # under invocation floor
            point(speedup=0.5, avg=1.0),  # under avg-time floor
            point(speedup=0.5),  # kept
        ]
    )
    kept, stats = ds.filter_rows(rows, ds.FilterConfig())
    assert stats.raw == 5 and stats.filtered == 2
    assert [r.speedup for r in kept if not r.is_baseline] == [1.5, 0.5]
    assert any(r.is_baseline for r in kept)


def test_filter_checks_baseline_invocations_too():
    rows = with_baseline([point(speedup=2.0)], inv=3)
    kept, stats = ds.filter_rows(rows, ds.FilterConfig())
    assert stats.filtered == 0


def test_filter_idempotent_and_monotone():
    rows = with_baseline(
        [point(speedup=s) for s in (0.2, 0.9999, 1.0, 1.2, 3.0)]
        + [point(speedup=2.0, inv=5)]
    )
    once, s1 = ds.filter_rows(rows, ds.FilterConfig())
    twice, s2 = ds.filter_rows(once, ds.FilterConfig())
    assert len(once) <= len(rows)
    assert once == twice
    assert s2.raw == s1.filtered


def test_one_decimal_percentage_arithmetic():
    stats = ds.FilterStats(raw=28928, filtered=23697)
    assert stats.percent == 81.9
    assert "pct=81.9" in str(stats)


def test_empty_input_percent_is_100():
    kept, stats = ds.filter_rows([], ds.FilterConfig())
    assert kept == [] and stats.raw == 0 and stats.percent == 100.0


@given(st.lists(st.floats(0.01, 100.0), max_size=40))
def test_filter_idempotence_property(speedups):
    rows = with_baseline([point(speedup=s) for s in speedups])
    once, _ = ds.filter_rows(rows, ds.FilterConfig())
    twice, _ = ds.filter_rows(once, ds.FilterConfig())
    assert once == twice


# -- sparsity + standardization -----------------------------------------------------


def rows_with_features(columns: dict[str, list[float]]):
    n = len(next(iter(columns.values())))
    rows = [
        point(speedup=1.5 + i, features={k: v[i] for k, v in columns.items()})
        for i in range(n)
    ]
    base = point(is_baseline=True, inv=500, features={k: 0.0 for k in columns})
    return [base] + rows


def test_sparsity_removes_zero_and_constant():
    rows = rows_with_features(
        {
            "zero": [0.0, 0.0, 0.0],
            "const7": [7.0, 7.0, 7.0],
            "live": [1.0, 2.0, 3.0],
            "sparse": [0.0, 0.0, 1.0],  # 33% nonzero, above the 5% default
        }
    )
    reduced, retained = ds.sparsity_reduce(rows)
    assert retained == ["live", "sparse"]
    for r in reduced:
        assert set(r.features) == {"live", "sparse"}


def test_standardize_population_convention():
    rows = rows_with_features({"x": [1.0, 2.0, 3.0]})
    scaled, scaler = ds.standardize(rows)
    # two-pass oracle: mean 2, population std sqrt(2/3)
    assert scaler.mean == [2.0]
    assert abs(scaler.std[0] - math.sqrt(2.0 / 3.0)) < 1e-15
    values = [r.features["x"] for r in scaled if not r.is_baseline]
    expected = 1.0 / math.sqrt(2.0 / 3.0)
    assert abs(values[0] + expected) < 1e-12
    assert values[1] == 0.0
    assert abs(values[2] - expected) < 1e-12


def test_standardize_postconditions_and_idempotence():
    rows = rows_with_features({"x": [3.0, 9.0, 4.5, 7.25], "y": [1, 2, 3, 4]})
    scaled, _ = ds.standardize(rows)
    for name in ("x", "y"):
        col = [r.features[name] for r in scaled if not r.is_baseline]
        mean = sum(col) / len(col)
        var = sum((v - mean) ** 2 for v in col) / len(col)
        assert abs(mean) < 1e-9
        assert abs(math.sqrt(var) - 1) < 1e-9
    again, _ = ds.standardize(scaled)
    for r1, r2 in zip(scaled, again):
        for name in r1.features:
            assert abs(r1.features[name] - r2.features[name]) < 1e-12


def test_standardize_rejects_constant_column():
    rows = rows_with_features({"x": [5.0, 5.0, 5.0]})
    with pytest.raises(ZeroVariance):
        ds.standardize(rows)


# -- CSV round trip ----------------------------------------------------------------


def test_csv_round_trip_bit_exact(tmp_path):
    rows = with_baseline(
        [
            point(speedup=1.2345678901234567, avg=0.1 + 0.2),
            point(speedup=3.0, features={"f0": 1e-17, "f1": 12345678.901234567}),
        ]
    )
    path = tmp_path / "data.csv"
    ds.export_csv(rows, path)
    back = ds.import_csv(path)
    assert back == rows


def test_csv_header_layout(tmp_path):
    rows = with_baseline([point()])
    path = tmp_path / "data.csv"
    ds.export_csv(rows, path)
    header = path.read_text().splitlines()[0].split(",")
    assert header[0] == "benchmark"
    assert header[: len(ds.META_COLUMNS)] == list(ds.META_COLUMNS)
    assert header[len(ds.META_COLUMNS):] == ["f0", "f1"]


def test_csv_rejects_bad_width(tmp_path):
    rows = with_baseline([point()])
    path = tmp_path / "data.csv"
    ds.export_csv(rows, path)
    lines = path.read_text().splitlines()
    lines[2] += ",99"
    path.write_text("\n".join(lines) + "\n")
    with pytest.raises(FormatError, match="row 3"):
        ds.import_csv(path)


def test_csv_rejects_wrong_header(tmp_path):
    path = tmp_path / "data.csv"
    path.write_text("a,b,c\n1,2,3\n")
    with pytest.raises(FormatError):
        ds.import_csv(path)


def test_scaler_round_trip(tmp_path):
    scaler = ds.Scaler(["a", "b"], [1.5, -2.25], [0.5, 3.0])
    ds.write_scaler(scaler, tmp_path / "scaler.json")
    back = ds.read_scaler(tmp_path / "scaler.json")
    assert back == scaler

from __future__ import annotations

import json
import pathlib

from forklab.cli import main

CORPUS = pathlib.Path(__file__).resolve().parents[1] / "corpus"


def forkgen(tmp_path, program="unroll_sum.ml", opt="unroll", extra=(), name="run"):
    out = tmp_path / name
    code = main(
        ["forkgen", str(CORPUS / program), "--opt", opt, "--invocations", "400",
         "--out", str(out), *extra]
    )
    assert code == 0
    return out


def test_forkgen_outputs(tmp_path, capsys):
    out = forkgen(tmp_path)
    assert (out / "storage.bin").exists()
    assert (out / "meta.json").exists()
    assert (out / "raw.csv").exists()
    meta = json.loads((out / "meta.json").read_text())
    assert meta["clock"] == "virtual"
    assert meta["units"][0]["n_forks"] == 6
    fork0 = meta["units"][0]["forks"][0]
    assert fork0 == {"index": 0, "loop_id": None, "param": 1}


def test_forkgen_deterministic(tmp_path):
    a = forkgen(tmp_path, name="a")
    b = forkgen(tmp_path, name="b")
    assert (a / "storage.bin").read_bytes() == (b / "storage.bin").read_bytes()
    assert (a / "raw.csv").read_bytes() == (b / "raw.csv").read_bytes()


def test_export_then_analyze_and_estimate(tmp_path, capsys):
    out = forkgen(tmp_path)
    data = tmp_path / "data.csv"
    code = main(
        ["export", str(out), "--csv", str(data), "--min-inv", "30",
         "--min-avg-time", "5", "--eps-speedup", "0.001", "--standardize"]
    )
    assert code == 0
    stats_line = capsys.readouterr().out.strip().splitlines()[-1]
    assert stats_line.startswith("raw=") and "pct=" in stats_line
    assert data.exists()
    assert (tmp_path / "scaler.json").exists()

    hist = tmp_path / "hist.csv"
    assert main(["analyze", "histogram", str(data), "--opt", "unroll",
                 "--bins-per-decade", "4", "--out", str(hist)]) == 0
    header = hist.read_text().splitlines()[0]
    assert header == "bin_center,tp,tn,fp,fn,total"

    report = tmp_path / "est.csv"
    assert main(["estimate", str(out / "raw.csv"), "--source", "heuristic",
                 "--out", str(report)]) == 0
    lines = report.read_text().splitlines()
    assert lines[0] == "function,i,baseline_estimate,predicted_estimate,best_estimate,source"
    assert len(lines) >= 2

    best = tmp_path / "best.csv"
    assert main(["estimate", str(out / "raw.csv"), "--source", "best",
                 "--out", str(best)]) == 0
    capsys.readouterr()
    assert main(["compare", str(report), str(best), "--column",
                 "predicted_estimate"]) == 0
    assert capsys.readouterr().out.startswith("U=")


def test_model_estimate_on_standardized_export(tmp_path):
    """Model inference on a standardized export matches the raw export
    (the sidecar scaler undoes the z-scoring).  Needs a program with two
    distinct loops so the model's features survive the sparsity check."""
    out = forkgen(tmp_path, program="nested.ml")
    model = tmp_path / "model.json"
    model.write_text(json.dumps({
        "kind": "unroll-regressor",
        "feature_names": ["size", "frequency"],
        "scaler": {"mean": [0.0, 0.0], "std": [1.0, 1.0]},
        "weights": [[0.0, 0.0], [0.01, 0.001], [0.02, 0.001], [0.01, 0.0],
                    [0.0, 0.0], [-0.01, 0.0]],
        "bias": [0.0, 0.01, 0.02, 0.01, -0.05, -0.2],
        "factors": [1, 2, 4, 8, 16, 32],
        "version": 1,
    }))
    raw_report = tmp_path / "est_raw.csv"
    assert main(["estimate", str(out / "raw.csv"), "--source", "model",
                 "--model", str(model), "--out", str(raw_report)]) == 0

    data = tmp_path / "data.csv"
    assert main(["export", str(out), "--csv", str(data), "--min-inv", "1",
                 "--min-avg-time", "0", "--eps-speedup", "0", "--standardize"]) == 0
    std_report = tmp_path / "est_std.csv"
    assert main(["estimate", str(data), "--source", "model", "--model", str(model),
                 "--out", str(std_report)]) == 0
    raw_rows = raw_report.read_text().splitlines()
    std_rows = std_report.read_text().splitlines()
    assert len(raw_rows) == len(std_rows) >= 2
    for left, right in zip(raw_rows[1:], std_rows[1:]):
        lf, rf = left.split(","), right.split(",")
        assert lf[0] == rf[0]
        assert abs(float(lf[3]) - float(rf[3])) <= 1e-6 * abs(float(lf[3]))


def test_predict_command(tmp_path, capsys):
    model = tmp_path / "peel.json"
    model.write_text(json.dumps({
        "kind": "peel-classifier",
        "feature_names": ["size"],
        "scaler": {"mean": [0.0], "std": [1.0]},
        "weights": [0.0],
        "bias": 1.0,  # always peel
        "threshold": 0.5,
        "factors": [1, 2, 4, 8, 16, 32],
        "version": 1,
    }))
    code = main(["predict", str(CORPUS / "peel_guard.ml"), "--model", str(model),
                 "--opt", "peel", "--invocations", "50"])
    assert code == 0
    out = capsys.readouterr().out
    assert "kernel loop 0: peel" in out
    assert "virtual cost:" in out


def test_run_command(capsys):
    assert main(["run", str(CORPUS / "float_mix.ml"), "--args", "7"]) == 0
    out = capsys.readouterr().out
    assert "return: 0" in out
    assert "virtual cost:" in out


def test_report_overhead(tmp_path, capsys):
    forkgen(tmp_path, extra=["--report-overhead"])
    out = capsys.readouterr().out
    assert "overhead ladder" in out
    assert "timestamping" in out and "forks" in out


def test_finalize_flag(tmp_path, capsys):
    forkgen(tmp_path, extra=["--finalize", "--min-inv", "20"])
    out = capsys.readouterr().out
    assert "wins" in out


def test_config_file_defaults(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"opt": "peel", "invocations": 60, "out": str(tmp_path / "c")}))
    code = main(["forkgen", str(CORPUS / "peel_guard.ml"), "--config", str(cfg)])
    assert code == 0
    assert (tmp_path / "c" / "storage.bin").exists()
    # explicit flags override the config file
    code = main(["forkgen", str(CORPUS / "peel_guard.ml"), "--config", str(cfg),
                 "--out", str(tmp_path / "d")])
    assert code == 0
    assert (tmp_path / "d" / "storage.bin").exists()


def test_exit_codes(tmp_path, capsys):
    assert main(["forkgen"]) == 1  # usage: missing args
    assert main(["nonsense"]) == 1
    bad = tmp_path / "bad.ml"
    bad.write_text("fn main( { }")
    assert main(["run", str(bad)]) == 3  # parse error
    crash = tmp_path / "crash.ml"
    crash.write_text("fn main() { return 1 / 0; }")
    assert main(["run", str(crash)]) == 2  # runtime error
    assert main(["export", str(tmp_path / "nope"), "--csv", str(tmp_path / "x.csv")]) == 3
    capsys.readouterr()


def test_wall_clock_demo_runs(tmp_path):
    out = forkgen(tmp_path, program="peel_guard.ml", opt="peel",
                  extra=["--clock", "wall"], name="wall")
    meta = json.loads((out / "meta.json").read_text())
    assert meta["clock"] == "wall"

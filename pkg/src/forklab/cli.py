"""Command-line front end.

    forklab run PROG [--args ...]            plain profiled interpretation
    forklab forkgen PROG --opt peel ...      generate forking data
    forklab export RUN/ --csv data.csv ...   dataset filters + standardization
    forklab analyze histogram DATA.csv ...   log-binned decision histograms
    forklab estimate DATA.csv --source ...   per-method execution-time estimates
    forklab compare A.csv B.csv --column ... rank-sum test between two sets
    forklab predict PROG --model m.json ...  run with learned decisions, no forking

Exit codes: 1 usage, 2 runtime error, 3 data/format error.
"""

from __future__ import annotations

import argparse
import csv as csv_mod
import json
import random
import sys
from pathlib import Path

from . import dataset as ds
from . import analysis as an
from .ast import Program
from .errors import (
    ForklabError,
    FormatError,
    MiniRuntimeError,
    MissingMeasurement,
    ParseError,
    SchemaMismatch,
    UsageError,
)
from .forking import (
    PipelineConfig,
    finalize_unit,
    install_final,
    run_pipeline,
)
from .loopopts import canonicalize, peel, unroll
from .loops import find_loops
from .parser import parse
from .runtime import (
    Clock,
    CompiledBinding,
    Interpreter,
    run_with_big_stack,
)
from .selftime import OutlierConfig, PerfStorage, instrument, alloc_unit, persist

RAW_CSV = "raw.csv"
ARG_RANGE = 64  # corpus drivers draw entry arguments from [0, 64)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _load_program(path: str) -> Program:
    try:
        source = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise FormatError(f"cannot read {path}: {exc}") from exc
    return parse(source)


def _driver_args(rng: random.Random, n_params: int) -> tuple:
    return tuple(rng.randrange(ARG_RANGE) for _ in range(n_params))


def _drive(session: Interpreter, entry: str, rng: random.Random, invocations: int):
    n_params = len(session.program.functions[entry].params)

    def loop():
        for _ in range(invocations):
            session.call(entry, _driver_args(rng, n_params))

    run_with_big_stack(loop)


# -- commands -----------------------------------------------------------------


def cmd_run(args) -> int:
    program = _load_program(args.program)
    session = Interpreter(program, clock=Clock(args.clock))
    entry = args.entry or program.entry
    values = [int(v) if "." not in v else float(v) for v in args.args]
    result = run_with_big_stack(session.call, entry, tuple(values))
    for emitted in session.trace.output:
        print(emitted)
    print(f"return: {'none' if result is None else result}")
    if args.clock == "virtual":
        print(f"virtual cost: {session.clock.virtual_now}")
    return 0


def _forkgen_session(program: Program, args, storage: PerfStorage):
    clock = Clock(args.clock)
    session = Interpreter(program, clock=clock, storage=storage)
    rng = random.Random(args.seed)
    cfg = PipelineConfig(
        phase=args.opt,
        compile_threshold=args.compile_threshold,
        max_loops=args.max_loops,
        outlier=OutlierConfig(
            factor=args.outlier_factor,
            warmup=args.outlier_warmup,
            enabled=not args.no_outlier,
        ),
    )
    _drive(session, program.entry, rng, cfg.compile_threshold)
    units = run_pipeline(program, session, cfg, storage)
    _drive(session, program.entry, rng, args.invocations)
    return session, units, cfg


def cmd_forkgen(args) -> int:
    program = _load_program(args.program)
    storage = PerfStorage()
    session, units, cfg = _forkgen_session(program, args, storage)
    out_dir = Path(args.out)
    persist(storage, units, out_dir, clock_mode=args.clock,
            cost_table_version=session.cost_table.version)
    benchmark = args.benchmark or Path(args.program).stem
    rows = ds.build(storage, units, benchmark)
    ds.export_csv(rows, out_dir / RAW_CSV)
    print(f"{len(units)} unit(s), {sum(u.n_forks for u in units)} fork(s), "
          f"{len(rows)} row(s) -> {out_dir}")
    if args.finalize:
        for unit in units:
            chosen = finalize_unit(unit, storage, args.min_inv)
            install_final(session, unit)
            print(f"unit {unit.unit_id} ({unit.function_name}): fork {chosen} wins")
    if args.report_overhead:
        _report_overhead(program, args)
    return 0


def _report_overhead(program: Program, args) -> None:
    """Relative cost of the instrumentation ladder, demonstration only."""

    def total_cost(prepare) -> int:
        clock = Clock("virtual")
        storage = PerfStorage()
        session = Interpreter(program, clock=clock, storage=storage)
        rng = random.Random(args.seed)
        _drive(session, program.entry, rng, args.compile_threshold)
        prepare(session, storage)
        start = clock.virtual_now
        _drive(session, program.entry, rng, args.invocations)
        return clock.virtual_now - start

    def compiled_plain(session, storage):
        for name, fn in program.functions.items():
            if session.profiles.invocations.get(name, 0) >= args.compile_threshold:
                session.rebind(name, CompiledBinding(canonicalize(fn)))

    def timestamping(session, storage):
        session.storage = None  # regions run, nothing is recorded
        for name, fn in program.functions.items():
            if session.profiles.invocations.get(name, 0) >= args.compile_threshold:
                base = alloc_unit(storage, 1)
                session.rebind(
                    name,
                    CompiledBinding(instrument(canonicalize(fn), base, 0, None)),
                )

    def instrumentation(session, storage):
        for name, fn in program.functions.items():
            if session.profiles.invocations.get(name, 0) >= args.compile_threshold:
                base = alloc_unit(storage, 1)
                session.rebind(
                    name,
                    CompiledBinding(
                        instrument(canonicalize(fn), base, 0, OutlierConfig())
                    ),
                )

    def forked(session, storage):
        cfg = PipelineConfig(
            phase=args.opt, compile_threshold=args.compile_threshold,
            max_loops=args.max_loops,
        )
        run_pipeline(program, session, cfg, storage)

    baseline = total_cost(compiled_plain)
    print("overhead ladder (virtual cost relative to compiled default):")
    for label, prepare in (
        ("default", compiled_plain),
        ("timestamping", timestamping),
        ("instrumentation", instrumentation),
        (f"forks ({args.opt})", forked),
    ):
        cost = total_cost(prepare)
        rel = cost / baseline if baseline else float("nan")
        print(f"  {label:<18} {cost:>12} units   x{rel:.4f}")


def cmd_export(args) -> int:
    run_dir = Path(args.run)
    raw_path = run_dir / RAW_CSV if run_dir.is_dir() else run_dir
    rows = ds.import_csv(raw_path)
    cfg = ds.FilterConfig(
        min_invocations=args.min_inv,
        min_avg_time=args.min_avg_time,
        eps_speedup=args.eps_speedup,
        sparsity_threshold=args.sparsity,
    )
    rows, stats = ds.filter_rows(rows, cfg)
    if any(not r.is_baseline for r in rows):
        rows, retained = ds.sparsity_reduce(rows, cfg.sparsity_threshold)
        if args.standardize:
            rows, scaler = ds.standardize(rows)
            ds.write_scaler(scaler, Path(args.csv).with_name("scaler.json"))
    ds.export_csv(rows, args.csv)
    print(stats)
    return 0


def cmd_analyze(args) -> int:
    rows = [r for r in ds.import_csv(args.data) if not r.is_baseline]
    if args.opt:
        rows = [r for r in rows if r.phase == args.opt]
    items = []
    for r in rows:
        if r.phase == "peel":
            applied = r.heuristic_decision == 1
        else:
            applied = r.heuristic_decision == r.param
        items.append((applied, r.speedup))
    bins = an.histogram(items, args.bins_per_decade, args.max_bin)
    with open(args.out, "w", newline="", encoding="utf-8") as fh:
        writer = csv_mod.writer(fh)
        writer.writerow(["bin_center", "tp", "tn", "fp", "fn", "total"])
        for b in bins:
            writer.writerow(
                [format(b.center, ".17g"), b.counts["TP"], b.counts["TN"],
                 b.counts["FP"], b.counts["FN"], b.total]
            )
    totals = {"TP": 0, "TN": 0, "FP": 0, "FN": 0}
    for b in bins:
        for k in totals:
            totals[k] += b.counts[k]
    print(f"rows={len(items)} " + " ".join(f"{k.lower()}={v}" for k, v in totals.items()))
    return 0


def _records_from_rows(rows: list[ds.DataPoint]) -> dict[tuple[str, int], an.DecisionRecord]:
    records: dict[tuple[str, int], an.DecisionRecord] = {}
    unit_rows: dict[tuple[str, int], list[ds.DataPoint]] = {}
    for r in rows:
        unit_rows.setdefault((r.benchmark, r.unit_id), []).append(r)
    for key, group in unit_rows.items():
        base = next((r for r in group if r.is_baseline), None)
        if base is None:
            continue
        decisions: dict[int, dict[int, float]] = {}
        total_inv = sum(r.invocations for r in group)
        for r in group:
            if r.is_baseline:
                continue
            decisions.setdefault(r.loop_id, {})[r.param] = r.avg_time
        records[key] = an.DecisionRecord(
            function=base.function,
            invocations=total_inv,
            baseline_avg=base.baseline_avg,
            decisions=decisions,
            identity_param=0 if base.phase == "peel" else 1,
        )
    return records


def _predictor_for(source: str, rows_by_unit, model, scaler):
    """Returns predicted parameter per decision for one unit's record."""

    def raw_features(row: ds.DataPoint) -> dict[str, float]:
        if scaler is None:
            return row.features
        # the export was standardized: undo the z-scoring before inference
        idx = {n: i for i, n in enumerate(scaler.feature_names)}
        return {
            n: (v * scaler.std[idx[n]] + scaler.mean[idx[n]]) if n in idx else v
            for n, v in row.features.items()
        }

    def predict(key, rec: an.DecisionRecord) -> dict[int, int]:
        group = rows_by_unit[key]
        phase = group[0].phase
        predicted: dict[int, int] = {}
        for r in group:
            if r.is_baseline or r.loop_id in predicted:
                continue
            if source == "heuristic":
                predicted[r.loop_id] = r.heuristic_decision
            else:
                feats = raw_features(r)
                if phase == "peel":
                    predicted[r.loop_id] = 1 if an.predict_peel(model, feats) else 0
                else:
                    predicted[r.loop_id] = an.predict_unroll(model, feats)
        return predicted

    return predict


def cmd_estimate(args) -> int:
    rows = ds.import_csv(args.data)
    records = _records_from_rows(rows)
    rows_by_unit: dict[tuple[str, int], list[ds.DataPoint]] = {}
    for r in rows:
        rows_by_unit.setdefault((r.benchmark, r.unit_id), []).append(r)

    if args.source == "model" and not args.model:
        raise UsageError("--source model needs --model")
    model = an.load_model(args.model) if args.source == "model" else None
    scaler = None
    scaler_path = Path(args.data).with_name("scaler.json")
    if args.source == "model" and scaler_path.exists():
        scaler = ds.read_scaler(scaler_path)

    out_rows = []
    totals = {"baseline": 0.0, "predicted": 0.0, "best": 0.0}
    predictor = None
    if args.source in ("heuristic", "model"):
        predictor = _predictor_for(args.source, rows_by_unit, model, scaler)
    for key, rec in sorted(records.items()):
        baseline_est = rec.invocations * rec.baseline_avg
        best_est = an.estimate_best(rec)
        if args.source == "best":
            predicted_est = best_est
        else:
            try:
                predicted_est = an.estimate_method(rec, predictor(key, rec))
            except MissingMeasurement as exc:
                print(f"skipping {rec.function}: {exc}", file=sys.stderr)
                continue
        out_rows.append(
            [rec.function, rec.invocations, format(baseline_est, ".17g"),
             format(predicted_est, ".17g"), format(best_est, ".17g"), args.source]
        )
        totals["baseline"] += baseline_est
        totals["predicted"] += predicted_est
        totals["best"] += best_est
    with open(args.out, "w", newline="", encoding="utf-8") as fh:
        writer = csv_mod.writer(fh)
        writer.writerow(
            ["function", "i", "baseline_estimate", "predicted_estimate",
             "best_estimate", "source"]
        )
        writer.writerows(out_rows)
    print(
        f"benchmark estimate ({args.source}): predicted={totals['predicted']:.17g} "
        f"baseline={totals['baseline']:.17g} best={totals['best']:.17g}"
    )
    return 0


def cmd_compare(args) -> int:
    def column(path) -> list[float]:
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv_mod.DictReader(fh)
            if reader.fieldnames is None or args.column not in reader.fieldnames:
                raise FormatError(f"{path}: no column {args.column!r}")
            return [float(rec[args.column]) for rec in reader]

    a = column(args.a)
    b = column(args.b)
    if not a or not b:
        raise FormatError("both inputs need at least one row")
    result = an.ranksum_test(a, b)
    print(f"U={result.u} p={result.p:.6g} method={result.method} n={len(a)},{len(b)}")
    return 0


def cmd_predict(args) -> int:
    program = _load_program(args.program)
    model = an.load_model(args.model)
    session = Interpreter(program, clock=Clock(args.clock))
    rng = random.Random(args.seed)
    _drive(session, program.entry, rng, args.compile_threshold)

    from .features import extract

    decisions_report = []
    for name, fn in program.functions.items():
        if session.profiles.invocations.get(name, 0) < args.compile_threshold:
            continue
        compiled = canonicalize(fn)
        loops = find_loops(compiled)
        profiled = [
            l.loop_id
            for l in loops
            if session.profiles.loops.get((name, l.loop_id)) is not None
        ]
        # apply decisions innermost/last first so earlier rewrites cannot
        # duplicate a loop id that is still pending
        for loop_id in sorted(profiled, reverse=True):
            feats = extract(compiled, loop_id, session.profiles)
            if args.opt == "peel":
                if an.predict_peel(model, feats):
                    compiled = peel(compiled, loop_id)
                    decisions_report.append((name, loop_id, "peel"))
            else:
                factor = an.predict_unroll(model, feats)
                if factor > 1:
                    try:
                        compiled = unroll(compiled, loop_id, factor)
                        decisions_report.append((name, loop_id, f"unroll x{factor}"))
                    except ForklabError:
                        pass
        session.rebind(name, CompiledBinding(canonicalize(compiled)))

    start = session.clock.virtual_now if args.clock == "virtual" else None
    _drive(session, program.entry, rng, args.invocations)
    for name, loop_id, what in decisions_report:
        print(f"{name} loop {loop_id}: {what}")
    if start is not None:
        print(f"virtual cost: {session.clock.virtual_now - start}")
    return 0


# -- argument plumbing ---------------------------------------------------------


def _add_driver_flags(p: _Parser):
    p.add_argument("--clock", choices=("virtual", "wall"), default="virtual")
    p.add_argument("--invocations", type=int, default=1000,
                   help="entry invocations after compilation")
    p.add_argument("--compile-threshold", type=int, default=10)
    p.add_argument("--max-loops", type=int, default=4)
    p.add_argument("--seed", type=int, default=0)


def build_parser() -> _Parser:
    parser = _Parser(prog="forklab", description=__doc__,
                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="interpret a program")
    p.add_argument("program")
    p.add_argument("--entry", default=None)
    p.add_argument("--clock", choices=("virtual", "wall"), default="virtual")
    p.add_argument("--args", nargs="*", default=[])
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("forkgen", help="generate forking data")
    p.add_argument("program")
    p.add_argument("--opt", choices=("peel", "unroll"), required=True)
    _add_driver_flags(p)
    p.add_argument("--out", required=True)
    p.add_argument("--benchmark", default=None, help="benchmark name for the rows")
    p.add_argument("--outlier-factor", type=float, default=10.0)
    p.add_argument("--outlier-warmup", type=int, default=30)
    p.add_argument("--no-outlier", action="store_true")
    p.add_argument("--finalize", action="store_true")
    p.add_argument("--min-inv", type=int, default=10,
                   help="per-fork invocation floor for --finalize")
    p.add_argument("--report-overhead", action="store_true")
    p.set_defaults(func=cmd_forkgen)

    p = sub.add_parser("export", help="filter/standardize a run into a dataset")
    p.add_argument("run", help="run directory (or raw.csv path)")
    p.add_argument("--csv", required=True)
    p.add_argument("--min-inv", type=int, default=100)
    p.add_argument("--min-avg-time", type=float, default=50.0)
    p.add_argument("--eps-speedup", type=float, default=0.01)
    p.add_argument("--sparsity", type=float, default=0.05)
    p.add_argument("--standardize", action="store_true")
    p.set_defaults(func=cmd_export)

    p = sub.add_parser("analyze", help="decision-quality reports")
    asub = p.add_subparsers(dest="analysis", required=True)
    ph = asub.add_parser("histogram", help="log-binned speedup histogram")
    ph.add_argument("data")
    ph.add_argument("--opt", choices=("peel", "unroll"), default=None)
    ph.add_argument("--bins-per-decade", type=int, default=4)
    ph.add_argument("--max-bin", type=int, default=None)
    ph.add_argument("--out", required=True)
    ph.set_defaults(func=cmd_analyze)

    p = sub.add_parser("estimate", help="per-method execution-time estimates")
    p.add_argument("data")
    p.add_argument("--source", choices=("heuristic", "model", "best"), required=True)
    p.add_argument("--model", default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("compare", help="rank-sum test between two estimate sets")
    p.add_argument("a")
    p.add_argument("b")
    p.add_argument("--column", default="predicted_estimate")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("predict", help="run with learned decisions (no forking)")
    p.add_argument("program")
    p.add_argument("--model", required=True)
    p.add_argument("--opt", choices=("peel", "unroll"), required=True)
    _add_driver_flags(p)
    p.set_defaults(func=cmd_predict)

    return parser


def _merge_config(argv: list[str]) -> list[str]:
    """`--config file.json` supplies defaults; explicit flags win."""
    if "--config" not in argv:
        return argv
    idx = argv.index("--config")
    if idx + 1 >= len(argv):
        raise UsageError("--config needs a file argument")
    path = argv[idx + 1]
    rest = argv[:idx] + argv[idx + 2:]
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise FormatError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(doc, dict):
        raise FormatError(f"{path}: config must be a JSON object")
    injected: list[str] = []
    for key, value in doc.items():
        flag = f"--{key.replace('_', '-')}"
        if flag in rest:
            continue
        if isinstance(value, bool):
            if value:
                injected.append(flag)
        else:
            injected.extend([flag, str(value)])
    # insert after the subcommand so positionals stay first
    return rest + injected


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        argv = _merge_config(argv)
        args = build_parser().parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except (ParseError, FormatError, SchemaMismatch) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except ForklabError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except MiniRuntimeError as exc:  # pragma: no cover - subclass of ForklabError
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

from __future__ import annotations

import pathlib

import pytest

from forklab.forking import PipelineConfig, run_pipeline
from forklab.runtime import Clock, Interpreter
from forklab.selftime import OutlierConfig, PerfStorage

CORPUS = pathlib.Path(__file__).resolve().parents[1] / "corpus"


@pytest.fixture(scope="session")
def corpus_sources() -> dict[str, str]:
    sources = {p.stem: p.read_text(encoding="utf-8") for p in sorted(CORPUS.glob("*.ml"))}
    assert len(sources) >= 10
    return sources


def forkgen_run(
    program,
    phase: str,
    arg_stream,
    threshold: int = 10,
    max_loops: int = 4,
    outlier: OutlierConfig | None = None,
    trace: bool = False,
    capacity: int = 65_536,
):
    """Drive the forkgen flow in-process: the first `threshold` argument
    tuples warm up profiles, the rest execute the compiled program."""
    storage = PerfStorage(capacity)
    session = Interpreter(program, clock=Clock("virtual"), storage=storage, trace=trace)
    stream = list(arg_stream)
    assert len(stream) >= threshold
    for args in stream[:threshold]:
        session.call(program.entry, args)
    cfg = PipelineConfig(
        phase=phase,
        compile_threshold=threshold,
        max_loops=max_loops,
        outlier=outlier or OutlierConfig(),
    )
    units = run_pipeline(program, session, cfg, storage)
    session.returns = [session.call(program.entry, args) for args in stream[threshold:]]
    return session, storage, units

"""forklab: compilation forking on a miniature dynamic-compilation system.

Multiple versions of hot functions that share one profiling/compilation
history but differ in a single loop-optimization decision are executed
alternately in one run; per-version self time feeds datasets,
decision-quality reports and learned heuristics.
"""

from .ast import FunctionIR, Program, deep_copy
from .errors import ForklabError
from .features import FeatureVector, extract, schema
from .forking import (
    DispatchUnit,
    ForkingPoint,
    ForkSpec,
    PipelineConfig,
    create_forks,
    finalize_unit,
    recombine,
    run_pipeline,
    select_fork_targets,
)
from .loopopts import canonicalize, peel, unroll
from .loops import CountedInfo, LoopInfo, detect_counted, find_loops, node_census
from .parser import parse
from .printer import pretty
from .runtime import (
    Clock,
    CostTable,
    ExecTrace,
    Interpreter,
    Profiles,
    interpret,
    loop_frequency,
)
from .selftime import (
    OutlierConfig,
    PerfStorage,
    alloc_unit,
    fork_avg,
    instrument,
    load,
    persist,
    record_exit,
)

__version__ = "0.1.0"

__all__ = [
    "Clock", "CostTable", "CountedInfo", "DispatchUnit", "ExecTrace",
    "FeatureVector", "ForkSpec", "ForkingPoint", "ForklabError", "FunctionIR",
    "Interpreter", "LoopInfo", "OutlierConfig", "PerfStorage", "PipelineConfig",
    "Profiles", "Program", "alloc_unit", "canonicalize", "create_forks",
    "deep_copy", "detect_counted", "extract", "finalize_unit", "find_loops",
    "fork_avg", "instrument", "interpret", "load", "loop_frequency",
    "node_census", "parse", "peel", "persist", "pretty", "recombine",
    "record_exit", "run_pipeline", "schema", "select_fork_targets", "unroll",
]

"""The compilation-forking engine.

A hot function is canonicalized once (the shared compilation history), the
pipeline forks at the loop-optimization phase, each fork completes the
remaining phases with one decision applied, gets self-time instrumentation,
and all forks are recombined into a dispatch unit that alternates versions:

    idx = storage[base] % nForks; execute fork[idx]; storage[base] += 1

Fork 0 is always the baseline with no loop optimized.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

from .ast import FunctionIR, Program, canonical_bytes, deep_copy
from .errors import (
    ForklabError,
    InsufficientData,
    MismatchedArity,
    NoEligibleLoops,
    NoProfile,
)
from .features import FeatureVector, extract
from .loopopts import ALLOWED_FACTORS, canonicalize, peel, unroll
from .loops import find_loops
from .runtime import (
    CompiledBinding,
    DispatchBinding,
    Interpreter,
    Profiles,
    loop_frequency,
)
from .selftime import (
    OutlierConfig,
    PerfStorage,
    alloc_unit,
    fork_avg,
    instrument,
    slot_invocations,
)

PHASES = ("peel", "unroll")


@dataclass(frozen=True)
class ForkingPoint:
    """Pipeline position of the forked phase (after canonicalize)."""

    phase: str  # "peel" | "unroll"

    def __post_init__(self):
        if self.phase not in PHASES:
            raise ValueError(f"unknown phase {self.phase!r}")


@dataclass
class ForkSpec:
    unit_id: int
    function_name: str
    phase: str
    decisions: list[tuple[int, int]]  # (loop_id, param), one per non-baseline fork
    dropped: list[tuple[int, int, str]] = field(default_factory=list)

    def identity_param(self) -> int:
        return 0 if self.phase == "peel" else 1


@dataclass
class DispatchUnit:
    """All compiled forks of one function plus the dispatch bookkeeping."""

    unit_id: int
    function_name: str
    phase: str
    forks: list[FunctionIR]
    storage_base: int
    spec: ForkSpec
    intermediate: FunctionIR
    feature_rows: list[FeatureVector]  # aligned with spec.decisions
    pre_fork_serializations: list[bytes] = field(default_factory=list)
    finalized: Optional[int] = None

    @property
    def n_forks(self) -> int:
        return len(self.forks)

    def fork_decisions(self) -> list[tuple[Optional[int], int]]:
        """Per fork index: (loop_id or None for baseline, parameter value)."""
        rows: list[tuple[Optional[int], int]] = [(None, self.spec.identity_param())]
        rows.extend(self.spec.decisions)
        return rows


@dataclass
class PipelineConfig:
    phase: str = "peel"
    compile_threshold: int = 10
    max_loops: int = 4
    outlier: OutlierConfig = field(default_factory=OutlierConfig)


def select_fork_targets(
    fn: FunctionIR, profiles: Profiles, max_loops: int, phase: str = "peel"
) -> list[int]:
    """Up to `max_loops` loop ids, most frequently executed first (ties by
    ascending loop id); the unroll phase only considers counted loops."""
    candidates = []
    for info in find_loops(fn):
        if phase == "unroll" and info.counted is None:
            continue
        try:
            freq = loop_frequency(profiles, fn.name, info.loop_id)
        except NoProfile:
            continue
        candidates.append((-freq, info.loop_id))
    if not candidates:
        raise NoEligibleLoops(f"'{fn.name}' has no forkable loop for phase {phase}")
    candidates.sort()
    return [loop_id for _, loop_id in candidates[:max_loops]]


def create_forks(
    intermediate: FunctionIR,
    point: ForkingPoint,
    targets: list[int],
    unit_id: int = 0,
) -> tuple[ForkSpec, list[FunctionIR], list[bytes]]:
    """Duplicate the intermediate once per decision and apply exactly one
    decision per copy; fork 0 stays untransformed.

    Returns the fork spec, the fork bodies, and the serialized pre-fork IR
    captured per fork (shared-history witness).  Failing transforms drop
    their fork and are recorded on the fork spec.
    """
    if not targets:
        raise NoEligibleLoops("fork creation needs at least one target loop")
    if point.phase == "peel":
        wanted = [(loop_id, 1) for loop_id in targets]
    else:
        wanted = [(loop_id, f) for loop_id in targets for f in ALLOWED_FACTORS]

    spec = ForkSpec(unit_id, intermediate.name, point.phase, [])
    serialized = [canonical_bytes(intermediate)]
    forks = [deep_copy(intermediate)]
    for loop_id, param in wanted:
        serialized_now = canonical_bytes(intermediate)
        try:
            if point.phase == "peel":
                fork = peel(intermediate, loop_id)
            else:
                fork = unroll(intermediate, loop_id, param)
        except ForklabError as exc:
            spec.dropped.append((loop_id, param, str(exc)))
            continue
        spec.decisions.append((loop_id, param))
        serialized.append(serialized_now)
        forks.append(fork)
    if len(forks) < 2:
        raise NoEligibleLoops(
            f"every transform failed for '{intermediate.name}' ({point.phase})"
        )
    return spec, forks, serialized


def recombine(forks: list[FunctionIR], storage_base: int, spec: ForkSpec,
              intermediate: FunctionIR, feature_rows: list[FeatureVector]) -> DispatchUnit:
    """Merge instrumented forks into one call-compatible dispatch unit."""
    if len(forks) < 2:
        raise MismatchedArity("recombination needs at least two forks")
    arities = {tuple(f.params) for f in forks}
    if len(arities) != 1:
        raise MismatchedArity(f"forks of '{spec.function_name}' disagree on parameters")
    return DispatchUnit(
        unit_id=spec.unit_id,
        function_name=spec.function_name,
        phase=spec.phase,
        forks=forks,
        storage_base=storage_base,
        spec=spec,
        intermediate=intermediate,
        feature_rows=feature_rows,
    )


def run_pipeline(
    program: Program,
    session: Interpreter,
    config: PipelineConfig,
    storage: PerfStorage,
) -> list[DispatchUnit]:
    """Compile every hot function: canonicalize, fork at the loop phase,
    finish each fork (canonicalize again), instrument, recombine, and bind
    the dispatch unit into the running session.

    Hot functions without forkable loops are compiled plain; cold functions
    stay interpreted.  Per-function failures leave the function unforked.
    """
    point = ForkingPoint(config.phase)
    units: list[DispatchUnit] = []
    for name, fn in program.functions.items():
        if session.profiles.invocations.get(name, 0) < config.compile_threshold:
            continue
        intermediate = canonicalize(fn)
        try:
            targets = select_fork_targets(
                intermediate, session.profiles, config.max_loops, config.phase
            )
        except NoEligibleLoops:
            session.rebind(name, CompiledBinding(intermediate))
            continue
        feature_rows = _features_per_decision(intermediate, targets, session.profiles, point)
        try:
            spec, forks, serialized = create_forks(
                intermediate, point, targets, unit_id=len(units)
            )
        except NoEligibleLoops:
            session.rebind(name, CompiledBinding(intermediate))
            continue
        forks = [canonicalize(f) for f in forks]
        base = alloc_unit(storage, len(forks))
        instrumented = [
            instrument(f, base, k, config.outlier) for k, f in enumerate(forks)
        ]
        unit = recombine(instrumented, base, spec,
                         intermediate, _align_features(feature_rows, spec))
        unit.pre_fork_serializations = serialized
        units.append(unit)
        session.rebind(name, DispatchBinding(unit))
    return units


def _features_per_decision(
    intermediate: FunctionIR, targets: list[int], profiles: Profiles, point: ForkingPoint
) -> dict[int, FeatureVector]:
    # extraction happens on the intermediate, immediately before the transform
    return {loop_id: extract(intermediate, loop_id, profiles) for loop_id in targets}


def _align_features(
    rows: dict[int, FeatureVector], spec: ForkSpec
) -> list[FeatureVector]:
    return [rows[loop_id] for loop_id, _ in spec.decisions]


def finalize_unit(unit: DispatchUnit, storage: PerfStorage, min_inv: int) -> int:
    """Pick the fork with the lowest average self time (ties prefer the
    baseline, then the lowest index) and prepare its uninstrumented
    recompilation; errors if any fork is below `min_inv` invocations."""
    floor = max(min_inv, 1)
    for k in range(unit.n_forks):
        inv = storage.slots[slot_invocations(unit.storage_base, k)]
        if inv < floor:
            raise InsufficientData(
                f"fork {k} of unit {unit.unit_id} has {inv} < {floor} invocations"
            )
    best_idx = 0
    best_avg: Fraction = fork_avg(storage, unit.storage_base, 0)
    for k in range(1, unit.n_forks):
        avg = fork_avg(storage, unit.storage_base, k)
        if avg < best_avg:
            best_idx, best_avg = k, avg
    unit.finalized = best_idx
    return best_idx


def recompile_final(unit: DispatchUnit) -> FunctionIR:
    """Uninstrumented recompilation of the chosen fork's transform."""
    assert unit.finalized is not None, "finalize_unit must run first"
    if unit.finalized == 0:
        return canonicalize(unit.intermediate)
    loop_id, param = unit.spec.decisions[unit.finalized - 1]
    if unit.phase == "peel":
        fn = peel(unit.intermediate, loop_id)
    else:
        fn = unroll(unit.intermediate, loop_id, param)
    return canonicalize(fn)


def install_final(session: Interpreter, unit: DispatchUnit) -> None:
    session.rebind(unit.function_name, CompiledBinding(recompile_final(unit)))

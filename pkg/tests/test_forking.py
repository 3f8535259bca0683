from __future__ import annotations

import pytest

from conftest import forkgen_run
from forklab.ast import canonical_bytes
from forklab.errors import InsufficientData, MismatchedArity, NoEligibleLoops
from forklab.forking import (
    ForkingPoint,
    create_forks,
    finalize_unit,
    install_final,
    recombine,
    select_fork_targets,
)
from forklab.loopopts import canonicalize
from forklab.parser import parse
from forklab.runtime import Interpreter, Profiles, interpret
from forklab.selftime import (
    OutlierConfig,
    PerfStorage,
    alloc_unit,
    instrument,
    slot_invocations,
    slot_total_time,
)

NO_FILTER = OutlierConfig(enabled=False)

THREE_LOOPS = """
fn kernel(a, b, c) {
    let i = 0;
    while (i < a) { i = i + 1; }
    let j = 0;
    while (j < b) { j = j + 1; }
    let k = 0;
    while (k < c) { k = k + 1; }
    return i + j + k;
}
fn main(a, b, c) { return kernel(a, b, c); }
"""


def warmed_profiles(source: str, vectors) -> tuple:
    program = parse(source)
    profiles = Profiles()
    for args in vectors:
        interpret(program, args=args, profiles=profiles)
    return program, profiles


# -- target selection -----------------------------------------------------------


def test_select_topk_by_frequency():
    program, profiles = warmed_profiles(THREE_LOOPS, [(100, 5, 50)])
    fn = program.functions["kernel"]
    assert select_fork_targets(fn, profiles, 2) == [0, 2]
    assert select_fork_targets(fn, profiles, 4) == [0, 2, 1]


def test_select_tie_break_ascending_id():
    program, profiles = warmed_profiles(THREE_LOOPS, [(7, 7, 7)])
    fn = program.functions["kernel"]
    assert select_fork_targets(fn, profiles, 2) == [0, 1]


def test_select_unroll_filters_to_counted():
    src = (
        "fn kernel(n) {"
        " let i = 0; while (i < n) { if (i > 5) { i = i + 2; } i = i + 1; }"
        " let s = 0; for (j = 0; j < n; j += 1) { s = s + j; }"
        " return s; }"
        "fn main(n) { return kernel(n); }"
    )
    program, profiles = warmed_profiles(src, [(9,)])
    fn = program.functions["kernel"]
    # the for loop runs more iterations (9) than the skipping while (6)
    assert select_fork_targets(fn, profiles, 4, "peel") == [1, 0]
    assert select_fork_targets(fn, profiles, 4, "unroll") == [1]


def test_select_no_eligible():
    program, profiles = warmed_profiles("fn main() { out(1); }", [()])
    with pytest.raises(NoEligibleLoops):
        select_fork_targets(program.functions["main"], profiles, 4)
    src = "fn main(n) { let i = 0; while (i < n) { if (1 < i) { i = i + 2; } i = i + 1; } }"
    program, profiles = warmed_profiles(src, [(6,)])
    with pytest.raises(NoEligibleLoops):
        select_fork_targets(program.functions["main"], profiles, 4, "unroll")


# -- fork creation ----------------------------------------------------------------


def test_peel_fork_counts():
    program, _ = warmed_profiles(THREE_LOOPS, [(5, 5, 5)])
    intermediate = canonicalize(program.functions["kernel"])
    spec, forks, serialized = create_forks(intermediate, ForkingPoint("peel"), [0, 1])
    assert len(forks) == 3  # baseline + one per target
    assert spec.decisions == [(0, 1), (1, 1)]
    assert len(serialized) == 3


def test_unroll_fork_counts():
    src = "fn kernel(n) { let s = 0; for (i = 0; i < n; i += 1) { s = s + i; } return s; }" \
          "fn main(n) { return kernel(n); }"
    program, _ = warmed_profiles(src, [(5,)])
    intermediate = canonicalize(program.functions["kernel"])
    spec, forks, _ = create_forks(intermediate, ForkingPoint("unroll"), [0])
    assert len(forks) == 6  # baseline + factors 2, 4, 8, 16, 32
    assert [p for _, p in spec.decisions] == [2, 4, 8, 16, 32]


def test_fork_creation_requires_targets():
    program, _ = warmed_profiles(THREE_LOOPS, [(5, 5, 5)])
    with pytest.raises(NoEligibleLoops):
        create_forks(canonicalize(program.functions["kernel"]), ForkingPoint("peel"), [])


def test_dropped_transform_is_recorded():
    # loop 0 mutates its bound: every unroll factor fails, the decision drops
    src = (
        "global g;"
        "fn kernel(n) { let i = 0; while (i < g) { g = g - 1; i = i + 1; }"
        " let s = 0; for (j = 0; j < n; j += 1) { s = s + j; } return s; }"
        "fn main(n) { g = n; return kernel(n); }"
    )
    program, _ = warmed_profiles(src, [(9,)])
    intermediate = canonicalize(program.functions["kernel"])
    spec, forks, _ = create_forks(intermediate, ForkingPoint("unroll"), [0, 1])
    assert len(spec.dropped) == 5  # all factors of the unstable loop
    assert {loop for loop, _, _ in spec.dropped} == {0}
    assert len(forks) == 6  # baseline + 5 factors of loop 1


def test_shared_history_byte_identical():
    program, _ = warmed_profiles(THREE_LOOPS, [(5, 5, 5)])
    intermediate = canonicalize(program.functions["kernel"])
    _, forks, serialized = create_forks(intermediate, ForkingPoint("peel"), [0, 1, 2])
    assert len(set(serialized)) == 1
    # the baseline fork is the intermediate itself, structurally
    assert canonical_bytes(forks[0]) == serialized[0]


def test_recombine_arity_check():
    a = parse("fn f(x) { return x; }").functions["f"]
    b = parse("fn f(x, y) { return x; }").functions["f"]
    from forklab.forking import ForkSpec

    spec = ForkSpec(0, "f", "peel", [(0, 1)])
    with pytest.raises(MismatchedArity):
        recombine([a, b], 0, spec, a, [])


# -- dispatch alternation -----------------------------------------------------------


def run_units(source: str, phase: str, n_calls: int, args=(5,), threshold=10):
    stream = [args] * (threshold + n_calls)
    return forkgen_run(parse(source), phase, stream, threshold=threshold)


def test_alternation_mod2():
    src = "fn kernel(n) { let i = 0; while (i < n) { i = i + 1; } return i; }" \
          "fn main(n) { return kernel(n); }"
    session, storage, units = run_units(src, "peel", 10)
    [unit] = units
    assert unit.n_forks == 2
    assert storage.slots[unit.storage_base] == 10  # fork control counts dispatches
    assert storage.slots[slot_invocations(unit.storage_base, 0)] == 5
    assert storage.slots[slot_invocations(unit.storage_base, 1)] == 5


def test_fork_control_five_mod_two_selects_fork_one():
    src = "fn kernel(n) { let i = 0; while (i < n) { i = i + 1; } return i; }" \
          "fn main(n) { return kernel(n); }"
    session, storage, units = run_units(src, "peel", 0)
    [unit] = units
    storage.slots[unit.storage_base] = 5
    session.call("kernel", (4,))
    assert storage.slots[slot_invocations(unit.storage_base, 1)] == 1
    assert storage.slots[slot_invocations(unit.storage_base, 0)] == 0
    assert storage.slots[unit.storage_base] == 6


def test_seven_invocations_of_three_forks_split_322(corpus_sources):
    program = parse(corpus_sources["nested"])
    stream = [(6, 6)] * (10 + 7)
    _, storage, units = forkgen_run(program, "peel", stream)
    [unit] = units
    counts = [
        storage.slots[slot_invocations(unit.storage_base, k)] for k in range(unit.n_forks)
    ]
    assert counts == [3, 2, 2]


def test_alternation_fairness_bound(corpus_sources):
    # after any k invocations, per-fork counts differ by at most one
    src = corpus_sources["nested"]
    program = parse(src)
    stream = [(6, 6)] * (10 + 157)
    session, storage, units = forkgen_run(program, "peel", stream)
    [unit] = units
    counts = [
        storage.slots[slot_invocations(unit.storage_base, k)] for k in range(unit.n_forks)
    ]
    assert sum(counts) == 157
    assert max(counts) - min(counts) <= 1


def test_two_hot_functions_disjoint_storage(corpus_sources):
    program = parse(corpus_sources["multi_fn"])
    stream = [(9, 9)] * 60
    _, storage, units = forkgen_run(program, "unroll", stream)
    assert len(units) == 2
    spans = [
        set(range(u.storage_base, u.storage_base + 1 + 2 * u.n_forks)) for u in units
    ]
    assert spans[0].isdisjoint(spans[1])


def test_loopless_function_compiled_plain():
    src = "fn helper(x) { return x + 1; } fn main(n) { return helper(n); }"
    program = parse(src)
    session, storage, units = forkgen_run(program, "peel", [(3,)] * 20)
    assert units == []
    from forklab.runtime import CompiledBinding

    assert isinstance(session.bindings["helper"], CompiledBinding)
    assert isinstance(session.bindings["main"], CompiledBinding)


# -- transparency -------------------------------------------------------------------


def test_forked_program_transparent(corpus_sources):
    import random

    rng = random.Random(11)
    for phase in ("peel", "unroll"):
        for name in ("nested", "call_heavy", "unroll_rem", "branchy", "array_scan"):
            source = corpus_sources[name]
            entry = parse(source).entry
            n_params = len(parse(source).functions[entry].params)
            stream = [tuple(rng.randrange(64) for _ in range(n_params)) for _ in range(26)]

            plain = Interpreter(parse(source))
            expected = [plain.call(entry, args) for args in stream]

            session, _, units = forkgen_run(parse(source), phase, stream, threshold=10)
            assert units, (name, phase)
            assert session.returns == expected[10:], (name, phase)
            assert session.trace.output == plain.trace.output, (name, phase)


def test_finalize_picks_argmin_and_installs():
    src = (
        "fn kernel(n) { let s = 0; let m = n * 4;"
        " for (i = 0; i < m; i += 1) { s = s + i; } return s; }"
        "fn main(n) { return kernel(n); }"
    )
    session, storage, units = run_units(src, "unroll", 120, args=(8,))
    [unit] = units
    chosen = finalize_unit(unit, storage, min_inv=10)
    assert unit.finalized == chosen
    # argmin over measured averages
    avgs = [
        storage.slots[slot_total_time(unit.storage_base, k)]
        / storage.slots[slot_invocations(unit.storage_base, k)]
        for k in range(unit.n_forks)
    ]
    assert avgs[chosen] == min(avgs)
    assert chosen != 0  # unrolling wins on this tight counted loop

    # installed code behaves identically and runs at least as fast per call
    install_final(session, unit)
    cost_before = session.clock.virtual_now
    value = session.call("main", (8,))
    final_cost = session.clock.virtual_now - cost_before
    fresh = Interpreter(parse(src))
    assert fresh.call("main", (8,)) == value
    per_call_instrumented = min(avgs)
    assert final_cost <= per_call_instrumented + 40  # entry/driver overhead


def test_finalize_insufficient_data():
    src = "fn kernel(n) { let i = 0; while (i < n) { i = i + 1; } return i; }" \
          "fn main(n) { return kernel(n); }"
    session, storage, units = run_units(src, "peel", 7)  # 4/3 split
    [unit] = units
    with pytest.raises(InsufficientData):
        finalize_unit(unit, storage, min_inv=5)


def test_finalize_tie_prefers_baseline_then_lowest():
    src = "fn kernel(n) { let i = 0; while (i < n) { i = i + 1; } return i; }" \
          "fn main(n) { return kernel(n); }"
    _, storage, units = run_units(src, "peel", 4)
    [unit] = units
    base = unit.storage_base
    for k in range(unit.n_forks):
        storage.slots[slot_invocations(base, k)] = 10
        storage.slots[slot_total_time(base, k)] = 1000  # identical averages
    assert finalize_unit(unit, storage, min_inv=10) == 0
    storage.slots[slot_total_time(base, 1)] = 900
    assert finalize_unit(unit, storage, min_inv=10) == 1


def test_finalized_code_matches_chosen_transform():
    src = (
        "fn kernel(n) { let s = 0; let m = n * 4;"
        " for (i = 0; i < m; i += 1) { s = s + i; } return s; }"
        "fn main(n) { return kernel(n); }"
    )
    session, storage, units = run_units(src, "unroll", 120, args=(8,))
    [unit] = units
    chosen = finalize_unit(unit, storage, min_inv=10)
    from forklab.forking import recompile_final
    from forklab.loopopts import unroll as unroll_fn

    loop_id, factor = unit.spec.decisions[chosen - 1]
    expected = canonicalize(unroll_fn(unit.intermediate, loop_id, factor))
    assert recompile_final(unit).body == expected.body
    assert recompile_final(unit).instr is None

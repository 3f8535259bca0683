#!/usr/bin/env python3
"""Fork a hot function at the unrolling decision, execute all versions
alternately in a single run, and read each fork's average self time out of
the flat slot array.  Finish by installing the winning version."""

from pathlib import Path

from forklab import (
    Clock,
    Interpreter,
    PerfStorage,
    PipelineConfig,
    finalize_unit,
    fork_avg,
    parse,
    run_pipeline,
)
from forklab.forking import install_final

SOURCE = Path(__file__).parent.parent / "corpus" / "unroll_sum.ml"

program = parse(SOURCE.read_text())
storage = PerfStorage()
session = Interpreter(program, clock=Clock("virtual"), storage=storage)

# interpret until the kernel crosses the compile threshold
for _ in range(10):
    session.call("main", (6,))

cfg = PipelineConfig(phase="unroll", compile_threshold=10)
units = run_pipeline(program, session, cfg, storage)
[unit] = units
print(f"forked '{unit.function_name}' into {unit.n_forks} versions "
      f"(baseline + factors {[p for _, p in unit.spec.decisions]})")

# drive the recombined function; dispatch alternates the versions
for _ in range(600):
    session.call("main", (6,))

print("\nfork  param  invocations  avg self time")
for k, (loop_id, param) in enumerate(unit.fork_decisions()):
    inv = storage.slots[unit.storage_base + 1 + 2 * k]
    avg = fork_avg(storage, unit.storage_base, k)
    label = "baseline" if loop_id is None else f"x{param}"
    print(f"{k:>4}  {label:>8}  {inv:>11}  {float(avg):>13.2f}")

chosen = finalize_unit(unit, storage, min_inv=50)
print(f"\nwinner: fork {chosen}; installing its uninstrumented recompilation")
install_final(session, unit)
before = session.clock.virtual_now
session.call("main", (6,))
print(f"one finalized invocation costs {session.clock.virtual_now - before} units")

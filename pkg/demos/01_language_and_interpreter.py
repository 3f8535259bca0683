#!/usr/bin/env python3
"""MiniLang tour: parse a program, inspect its loops, interpret it under the
virtual clock, and look at the profiles the interpreter gathers."""

from forklab import Clock, Profiles, find_loops, interpret, node_census, parse, pretty

SOURCE = """
global limit;

fn sum_below(n) {
    let total = 0;
    let i = 0;
    while (i < n) {
        total = total + i;
        i = i + 1;
    }
    return total;
}

fn main(n) {
    limit = n * 2;
    let acc = 0;
    for (k = 0; k < 4; k += 1) {
        acc = acc + sum_below(n + k);
    }
    out(acc);
    return acc;
}
"""

program = parse(SOURCE)
print("pretty-printed program:\n")
print(pretty(program))

fn = program.functions["sum_below"]
for info in find_loops(fn):
    print(f"loop {info.loop_id}: depth={info.depth} size={info.size} "
          f"counted={'yes' if info.counted else 'no'}")
print("node census of the loop:", node_census(fn, 0))

clock = Clock("virtual")
profiles = Profiles()
value, trace = interpret(program, args=(10,), clock=clock, profiles=profiles, trace=True)
print(f"\nmain(10) = {value}, out() emitted {trace.output}")
print(f"total virtual cost: {clock.virtual_now}")

lp = profiles.loops[("sum_below", 0)]
print(f"sum_below loop profile: entries={lp.entry_count} "
      f"iterations={lp.total_iterations} max_trip={lp.max_observed_trip}")
print("invocation counts:", dict(profiles.invocations))

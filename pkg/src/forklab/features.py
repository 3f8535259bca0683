"""Loop feature extraction from the intermediate compilation.

Features are grouped into the categories General, Execution, Nodes, Edges,
Operands, Parent and Graph.  Extraction is a pure function of
(IR, loop id, profiles) and always runs on the pre-transform intermediate,
so every fork of a unit sees identical features.
"""

from __future__ import annotations

from dataclasses import dataclass

from .ast import (
    INT64_MAX,
    ArrayLoad,
    ArrayStore,
    Assign,
    BinOp,
    Call,
    Const,
    For,
    FunctionIR,
    GlobalRead,
    Let,
    LocalRead,
    NODE_KINDS,
    Node,
    Pause,
    UnaryOp,
    walk,
)
from .errors import InvalidLoop
from .loops import LoopInfo, find_loops, node_census
from .runtime import Profiles

SCHEMA_VERSION = "forklab-features-1"

# statement/control kinds anchor the control flow; pure expression kinds
# could float anywhere their inputs allow
FLOATING_KINDS = frozenset({"Const", "LocalRead", "GlobalRead", "ArrayLoad", "BinOp", "UnaryOp"})
FIXED_KINDS = frozenset(NODE_KINDS) - FLOATING_KINDS


@dataclass(frozen=True)
class FeatureSchema:
    version: str
    names: tuple[str, ...]
    categories: tuple[str, ...]

    def index(self, name: str) -> int:
        return self.names.index(name)


@dataclass(frozen=True)
class FeatureVector:
    schema_version: str
    values: tuple[float, ...]

    def as_dict(self) -> dict[str, float]:
        return dict(zip(schema().names, self.values))

    def __getitem__(self, name: str) -> float:
        return self.values[schema().index(name)]


_SCHEMA: FeatureSchema | None = None


def schema() -> FeatureSchema:
    """The versioned pre-filter feature universe (order is stable)."""
    global _SCHEMA
    if _SCHEMA is not None:
        return _SCHEMA
    spec: list[tuple[str, str]] = [
        ("size", "General"),
        ("depth", "General"),
        ("is_nested", "General"),
        ("n_children", "General"),
        ("n_backedges", "General"),
        ("n_exits", "General"),
        ("is_vectorizable", "General"),
        ("frequency", "Execution"),
        ("profiled", "Execution"),
        ("has_exact_trip_count", "Execution"),
        ("has_max_trip_count", "Execution"),
        ("can_overflow", "Execution"),
        ("n_fixed_nodes", "Nodes"),
        ("n_floating_nodes", "Nodes"),
    ]
    spec += [(f"nodes_{kind}", "Nodes") for kind in NODE_KINDS]
    spec += [
        ("n_values_into_loop", "Edges"),
        ("n_values_in_loop", "Edges"),
        ("n_values_out_of_loop", "Edges"),
        ("n_int_ops", "Operands"),
        ("n_float_ops", "Operands"),
        ("n_global_reads", "Operands"),
        ("n_global_writes", "Operands"),
        ("n_volatile_accesses", "Operands"),
        ("has_parent", "Parent"),
        ("parent_size", "Parent"),
        ("graph_size", "Graph"),
        ("graph_n_loops", "Graph"),
        ("graph_max_loop_depth", "Graph"),
        ("graph_n_branches", "Graph"),
    ]
    spec += [(f"graph_{kind}", "Graph") for kind in NODE_KINDS]
    _SCHEMA = FeatureSchema(
        SCHEMA_VERSION,
        tuple(n for n, _ in spec),
        tuple(c for _, c in spec),
    )
    return _SCHEMA


def _is_float_expr(node: Node) -> bool:
    if isinstance(node, Const):
        return isinstance(node.value, float)
    return any(_is_float_expr(c) for c in node.children() if isinstance(c, (Const, BinOp, UnaryOp)))


def _can_overflow(info) -> bool:
    if info is None or info.const_trip_count is None:
        return True
    init = info.init.value
    step = info.step.value
    n = info.const_trip_count
    if n == 0:
        return False
    return init + n * step > INT64_MAX


def extract(fn: FunctionIR, loop_id: int, profiles: Profiles) -> FeatureVector:
    """Fill every schema slot for one loop of the intermediate compilation.

    A loop without profile data gets frequency 0 and profiled=0 instead of
    an error; downstream filters handle low-signal rows.
    """
    loops = find_loops(fn)
    by_id = {l.loop_id: l for l in loops}
    if loop_id not in by_id:
        raise InvalidLoop(f"no loop {loop_id} in '{fn.name}'")
    info: LoopInfo = by_id[loop_id]
    header = info.header
    subtree = list(walk(header))
    subtree_ids = {id(n) for n in subtree}

    loop_census = node_census(fn, loop_id)
    fn_census = node_census(fn)
    fn_nodes = list(fn.walk())

    lp = profiles.loops.get((fn.name, loop_id))
    profiled = lp is not None and lp.entry_count > 0
    frequency = (lp.total_iterations / lp.entry_count) if profiled else 0.0

    n_returns = loop_census.get("Return", 0)
    has_calls = any(isinstance(n, (Call, Pause)) for n in subtree)
    writes_global = any(
        isinstance(n, ArrayStore) or (isinstance(n, Assign) and n.scope == "global")
        for n in subtree
    )
    counted = info.counted
    vectorizable = counted is not None and not has_calls and not writes_global

    # local-variable coupling between the loop and its context
    order = {id(n): i for i, n in enumerate(fn_nodes)}
    start = order[id(header)]
    end = start + len(subtree) - 1
    reads_in, reads_before, reads_after = set(), set(), set()
    writes_in, writes_out = set(), set()
    for n in fn_nodes:
        pos = order[id(n)]
        inside = start <= pos <= end
        if isinstance(n, LocalRead):
            (reads_in if inside else (reads_before if pos < start else reads_after)).add(n.name)
        if (isinstance(n, (Let, Assign)) and getattr(n, "scope", "local") == "local") or isinstance(n, For):
            name = n.var if isinstance(n, For) else n.name
            (writes_in if inside else writes_out).add(name)
    params = set(fn.params)
    defined_before = writes_out | params  # approximation: any outside write site
    into = reads_in & defined_before
    internal = {v for v in writes_in if v not in reads_after and v not in reads_before}
    out_of = writes_in & reads_after

    int_ops = float_ops = 0
    for n in subtree:
        if isinstance(n, (BinOp, UnaryOp)):
            if _is_float_expr(n):
                float_ops += 1
            else:
                int_ops += 1
    global_reads = sum(1 for n in subtree if isinstance(n, (GlobalRead, ArrayLoad)))
    global_writes = sum(
        1
        for n in subtree
        if isinstance(n, ArrayStore) or (isinstance(n, Assign) and n.scope == "global")
    )

    parent = by_id.get(info.parent) if info.parent is not None else None

    values: dict[str, float] = {
        "size": info.size,
        "depth": info.depth,
        "is_nested": 1 if info.depth > 1 else 0,
        "n_children": len(info.children),
        "n_backedges": 1,
        "n_exits": n_returns + 1,
        "is_vectorizable": 1 if vectorizable else 0,
        "frequency": float(frequency),
        "profiled": 1 if profiled else 0,
        "has_exact_trip_count": 1 if (counted and counted.const_trip_count is not None) else 0,
        "has_max_trip_count": 1 if profiled else 0,
        "can_overflow": 1 if _can_overflow(counted) else 0,
        "n_fixed_nodes": sum(c for k, c in loop_census.items() if k in FIXED_KINDS),
        "n_floating_nodes": sum(c for k, c in loop_census.items() if k in FLOATING_KINDS),
        "n_values_into_loop": len(into),
        "n_values_in_loop": len(internal),
        "n_values_out_of_loop": len(out_of),
        "n_int_ops": int_ops,
        "n_float_ops": float_ops,
        "n_global_reads": global_reads,
        "n_global_writes": global_writes,
        "n_volatile_accesses": 0,
        "has_parent": 1 if parent is not None else 0,
        "parent_size": parent.size if parent is not None else 0,
        "graph_size": len(fn_nodes),
        "graph_n_loops": len(loops),
        "graph_max_loop_depth": max((l.depth for l in loops), default=0),
        "graph_n_branches": fn_census.get("If", 0),
    }
    for kind in NODE_KINDS:
        values[f"nodes_{kind}"] = loop_census.get(kind, 0)
        values[f"graph_{kind}"] = fn_census.get(kind, 0)

    sch = schema()
    return FeatureVector(sch.version, tuple(float(values[name]) for name in sch.names))

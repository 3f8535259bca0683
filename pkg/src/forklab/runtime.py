"""Program execution: profiled interpretation, compiled-IR execution and
fork dispatch, under a pluggable clock.

The virtual clock advances by a deterministic per-node cost; wall mode reads
a monotonic nanosecond source and exists for demonstration only.  One
interpreter instance is single-threaded; deterministic fork alternation
relies on a single driver thread.
"""

from __future__ import annotations

import threading
import time
from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

from .ast import (
    ArrayLoad,
    ArrayStore,
    Assign,
    BinOp,
    Block,
    Call,
    Const,
    ExprStmt,
    For,
    FunctionIR,
    GlobalRead,
    If,
    Let,
    LocalRead,
    Node,
    Out,
    Pause,
    Program,
    Return,
    UnaryOp,
    While,
)
from .errors import MiniRuntimeError, NoProfile, UnsupportedMode
from .ops import apply_binop, apply_unary, truthy

DISPATCH_COST = 1  # fixed dispatch overhead, identical for every fork index
STACK_LIMIT = 10_000


class Clock:
    """Monotonic time source: exact cost units (virtual) or wall ns."""

    def __init__(self, mode: str = "virtual"):
        if mode not in ("virtual", "wall"):
            raise ValueError(f"unknown clock mode {mode!r}")
        self.mode = mode
        self.virtual_now = 0

    def now(self) -> int:
        if self.mode == "virtual":
            return self.virtual_now
        return time.monotonic_ns()

    def advance(self, cost: int) -> None:
        if self.mode != "virtual":
            raise UnsupportedMode("advance() only exists in virtual mode")
        if cost < 0:
            raise ValueError("cost must be non-negative")
        self.virtual_now += cost


@dataclass(frozen=True)
class CostTable:
    """Per-node-kind virtual cost.

    Defaults: every node costs 1 except ArrayLoad/ArrayStore (2), Call (0 in
    the caller; callee work is attributed to the callee frame) and Pause(n)
    which costs its argument, attributed to the safepoint category.
    """

    version: str = "default-1"
    overrides: Optional[dict] = None

    def cost(self, kind: str) -> int:
        if self.overrides and kind in self.overrides:
            return self.overrides[kind]
        if kind in ("ArrayLoad", "ArrayStore"):
            return 2
        if kind == "Call":
            return 0
        return 1


@dataclass
class LoopProfile:
    entry_count: int = 0
    total_iterations: int = 0
    max_observed_trip: int = 0


class Profiles:
    """Profiling data gathered by the interpreted tier."""

    def __init__(self):
        self.invocations: Counter = Counter()
        self.loops: dict[tuple[str, int], LoopProfile] = {}
        self.branches: dict[tuple[str, int], list] = {}

    def loop(self, fn: str, loop_id: int) -> LoopProfile:
        key = (fn, loop_id)
        if key not in self.loops:
            self.loops[key] = LoopProfile()
        return self.loops[key]

    def branch(self, fn: str, node_id: int) -> list:
        key = (fn, node_id)
        if key not in self.branches:
            self.branches[key] = [0, 0]
        return self.branches[key]


def loop_frequency(profiles: Profiles, fn: str, loop_id: int) -> Fraction:
    """Average iterations per loop entry; errors when the loop was never entered."""
    lp = profiles.loops.get((fn, loop_id))
    if lp is None or lp.entry_count == 0:
        raise NoProfile(f"loop {loop_id} of '{fn}' has no profile")
    return Fraction(lp.total_iterations, lp.entry_count)


@dataclass
class TraceEvent:
    frame_id: int
    node_id: int
    kind: str
    cost: int
    category: str = "exec"  # "exec" | "safepoint" | "iter"


@dataclass
class FrameRecord:
    frame_id: int
    function: str
    parent_id: int
    depth: int
    instrumented: bool
    fork: Optional[tuple[int, int]] = None  # (unit_id, fork_index)
    local_t: int = 0
    recorded: Optional[bool] = None  # record_exit outcome, None if uninstrumented


@dataclass
class ExecTrace:
    output: list = field(default_factory=list)
    events: list = field(default_factory=list)
    frames: list = field(default_factory=list)
    return_value: object = None

    def frame_self_cost(self, frame_id: int) -> int:
        """Oracle: own measured cost of one activation (exec events only)."""
        return sum(e.cost for e in self.events if e.frame_id == frame_id and e.category == "exec")

    def total_cost(self) -> int:
        return sum(e.cost for e in self.events if e.category != "iter")


@dataclass
class InterpretedBinding:
    fn: FunctionIR


@dataclass
class CompiledBinding:
    fn: FunctionIR


@dataclass
class DispatchBinding:
    unit: object  # forking.DispatchUnit


class _ReturnSignal(Exception):
    def __init__(self, value):
        self.value = value


class _Frame:
    __slots__ = (
        "fn", "frame_id", "scopes", "instr", "timer_t", "region_start",
        "profile", "record",
    )

    def __init__(self, fn, frame_id, scopes, instr, profile, record):
        self.fn = fn
        self.frame_id = frame_id
        self.scopes = scopes
        self.instr = instr
        self.timer_t = 0
        self.region_start = 0
        self.profile = profile
        self.record = record


class Interpreter:
    """Single-threaded executor for one Program.

    Bindings decide the tier per function: interpreted (profiles), compiled
    (plain optimized IR) or dispatch (fork alternation + instrumentation).
    """

    def __init__(
        self,
        program: Program,
        clock: Optional[Clock] = None,
        cost_table: Optional[CostTable] = None,
        profiles: Optional[Profiles] = None,
        storage=None,
        trace: bool = False,
        stack_limit: int = STACK_LIMIT,
    ):
        self.program = program
        self.clock = clock or Clock("virtual")
        self.cost_table = cost_table or CostTable()
        self.profiles = profiles or Profiles()
        self.storage = storage
        self.trace = ExecTrace()
        self.trace_events = trace
        self.stack_limit = stack_limit
        self.depth = 0
        self._next_frame = 1  # frame 0 is the external driver
        self.bindings: dict[str, object] = {
            name: InterpretedBinding(fn) for name, fn in program.functions.items()
        }
        self.globals_env: dict[str, object] = {}
        self.arrays: dict[str, list] = {}
        for g in program.globals:
            if g.length is None:
                self.globals_env[g.name] = 0
            else:
                self.arrays[g.name] = [0] * g.length
        self._virtual = self.clock.mode == "virtual"

    # -- wiring ---------------------------------------------------------

    def rebind(self, name: str, binding) -> None:
        self.bindings[name] = binding

    def reset_trace(self) -> None:
        self.trace = ExecTrace()

    def call(self, name: str, args: tuple) -> object:
        """Invoke a function from the driver (frame id 0)."""
        if name not in self.bindings:
            raise MiniRuntimeError(f"unknown function '{name}'")
        value = self._invoke(name, list(args), caller=None)
        self.trace.return_value = value
        return value

    # -- cost/trace plumbing ---------------------------------------------

    def _charge(self, frame_id: int, node_id: int, kind: str, cost: int, category: str = "exec"):
        if self._virtual and category != "iter":
            self.clock.virtual_now += cost
        if self.trace_events:
            self.trace.events.append(TraceEvent(frame_id, node_id, kind, cost, category))

    def _open_region(self, frame: _Frame):
        frame.region_start = self.clock.now()

    def _close_region(self, frame: _Frame):
        frame.timer_t += self.clock.now() - frame.region_start

    # -- invocation -------------------------------------------------------

    def _invoke(self, name: str, args: list, caller: Optional[_Frame]) -> object:
        binding = self.bindings[name]
        if isinstance(binding, DispatchBinding):
            unit = binding.unit
            caller_id = caller.frame_id if caller else 0
            # dispatch is call-descent machinery: costed, never self time
            self._charge(caller_id, -1, "Dispatch", DISPATCH_COST, "call-descent")
            idx = self.storage.slots[unit.storage_base] % unit.n_forks
            result = self._run_function(unit.forks[idx], args, profile=False,
                                        fork=(unit.unit_id, idx))
            self.storage.slots[unit.storage_base] += 1
            return result
        if isinstance(binding, CompiledBinding):
            return self._run_function(binding.fn, args, profile=False)
        return self._run_function(binding.fn, args, profile=True)

    def _run_function(self, fn: FunctionIR, args: list, profile: bool, fork=None) -> object:
        if self.depth >= self.stack_limit:
            raise MiniRuntimeError(f"stack depth limit ({self.stack_limit}) exceeded")
        if len(args) != len(fn.params):
            raise MiniRuntimeError(
                f"'{fn.name}' takes {len(fn.params)} argument(s), got {len(args)}"
            )
        frame = _Frame(
            fn,
            self._next_frame,
            [dict(zip(fn.params, args))],
            fn.instr,
            profile,
            None,
        )
        self._next_frame += 1
        rec = None
        if self.trace_events:
            rec = FrameRecord(
                frame.frame_id, fn.name, 0, self.depth + 1,
                fn.instr is not None, fork,
            )
            self.trace.frames.append(rec)
        if profile:
            self.profiles.invocations[fn.name] += 1
        self.depth += 1
        if frame.instr is not None:
            self._open_region(frame)
        try:
            try:
                self._exec_block(frame, fn.body)
                value = None
            except _ReturnSignal as sig:
                value = sig.value
        finally:
            self.depth -= 1
        if frame.instr is not None:
            self._close_region(frame)
            accepted = None
            if self.storage is not None:
                from .selftime import record_exit

                accepted = record_exit(
                    self.storage,
                    frame.instr.storage_base,
                    frame.instr.fork_index,
                    frame.timer_t,
                    frame.instr.outlier,
                )
            if rec is not None:
                rec.local_t = frame.timer_t
                rec.recorded = accepted
        return value

    # -- statements -------------------------------------------------------

    def _exec_block(self, frame: _Frame, blk: Block):
        self._charge(frame.frame_id, blk.nid, "Block", self.cost_table.cost("Block"))
        frame.scopes.append({})
        try:
            for stmt in blk.stmts:
                self._exec_stmt(frame, stmt)
        finally:
            frame.scopes.pop()

    def _exec_stmt(self, frame: _Frame, node: Node):
        fid = frame.frame_id
        ct = self.cost_table
        if isinstance(node, Let):
            self._charge(fid, node.nid, "Let", ct.cost("Let"))
            frame.scopes[-1][node.name] = self._eval(frame, node.value)
        elif isinstance(node, Assign):
            self._charge(fid, node.nid, "Assign", ct.cost("Assign"))
            value = self._eval(frame, node.value)
            if node.scope == "global":
                if node.name not in self.globals_env:
                    raise MiniRuntimeError(f"unknown global '{node.name}'")
                self.globals_env[node.name] = value
            else:
                for scope in reversed(frame.scopes):
                    if node.name in scope:
                        scope[node.name] = value
                        break
                else:
                    raise MiniRuntimeError(f"unknown local '{node.name}'")
        elif isinstance(node, ArrayStore):
            self._charge(fid, node.nid, "ArrayStore", ct.cost("ArrayStore"))
            idx = self._eval(frame, node.index)
            value = self._eval(frame, node.value)
            self._array_set(node.name, idx, value)
        elif isinstance(node, If):
            self._charge(fid, node.nid, "If", ct.cost("If"))
            taken = truthy(self._eval(frame, node.cond))
            if frame.profile:
                counts = self.profiles.branch(frame.fn.name, node.nid)
                counts[0 if taken else 1] += 1
            if taken:
                self._exec_block(frame, node.then)
            elif node.orelse is not None:
                self._exec_block(frame, node.orelse)
        elif isinstance(node, While):
            self._exec_while(frame, node)
        elif isinstance(node, For):
            self._exec_for(frame, node)
        elif isinstance(node, Return):
            self._charge(fid, node.nid, "Return", ct.cost("Return"))
            value = self._eval(frame, node.value) if node.value is not None else None
            raise _ReturnSignal(value)
        elif isinstance(node, ExprStmt):
            self._charge(fid, node.nid, "ExprStmt", ct.cost("ExprStmt"))
            self._eval(frame, node.expr)
        elif isinstance(node, Block):
            self._exec_block(frame, node)
        else:
            raise AssertionError(f"unexpected statement {node!r}")

    def _exec_while(self, frame: _Frame, node: While):
        fid = frame.frame_id
        check_cost = self.cost_table.cost("While")
        lp = self.profiles.loop(frame.fn.name, node.loop_id) if frame.profile else None
        if lp is not None:
            lp.entry_count += 1
        trips = 0
        while True:
            self._charge(fid, node.nid, "While", check_cost)
            if not truthy(self._eval(frame, node.cond)):
                break
            if self.trace_events:
                self.trace.events.append(TraceEvent(fid, node.nid, "While", 0, "iter"))
            trips += 1
            self._exec_block(frame, node.body)
        if lp is not None:
            lp.total_iterations += trips
            lp.max_observed_trip = max(lp.max_observed_trip, trips)

    def _exec_for(self, frame: _Frame, node: For):
        # cost-equivalent to the desugared while form:
        #   let iv = init; while (iv < limit) { body; iv = iv + step; }
        fid = frame.frame_id
        ct = self.cost_table
        check_cost = ct.cost("For") + ct.cost("BinOp") + ct.cost("LocalRead")
        update_cost = ct.cost("Assign") + ct.cost("BinOp") + ct.cost("LocalRead")
        lp = self.profiles.loop(frame.fn.name, node.loop_id) if frame.profile else None
        if lp is not None:
            lp.entry_count += 1
        self._charge(fid, node.nid, "For", ct.cost("Let"))
        iv = self._eval(frame, node.init)
        frame.scopes.append({node.var: iv})
        trips = 0
        try:
            while True:
                self._charge(fid, node.nid, "For", check_cost)
                limit = self._eval(frame, node.limit)
                if not truthy(apply_binop("<", frame.scopes[-1][node.var], limit)):
                    break
                if self.trace_events:
                    self.trace.events.append(TraceEvent(fid, node.nid, "For", 0, "iter"))
                trips += 1
                self._exec_block(frame, node.body)
                self._charge(fid, node.nid, "For", update_cost)
                step = self._eval(frame, node.step)
                frame.scopes[-1][node.var] = apply_binop(
                    "+", frame.scopes[-1][node.var], step
                )
        finally:
            frame.scopes.pop()
        if lp is not None:
            lp.total_iterations += trips
            lp.max_observed_trip = max(lp.max_observed_trip, trips)

    # -- expressions ------------------------------------------------------

    def _eval(self, frame: _Frame, node: Node):
        fid = frame.frame_id
        ct = self.cost_table
        if isinstance(node, Const):
            self._charge(fid, node.nid, "Const", ct.cost("Const"))
            return node.value
        if isinstance(node, LocalRead):
            self._charge(fid, node.nid, "LocalRead", ct.cost("LocalRead"))
            for scope in reversed(frame.scopes):
                if node.name in scope:
                    return scope[node.name]
            raise MiniRuntimeError(f"unknown local '{node.name}'")
        if isinstance(node, GlobalRead):
            self._charge(fid, node.nid, "GlobalRead", ct.cost("GlobalRead"))
            if node.name not in self.globals_env:
                raise MiniRuntimeError(f"unknown global '{node.name}'")
            return self.globals_env[node.name]
        if isinstance(node, ArrayLoad):
            self._charge(fid, node.nid, "ArrayLoad", ct.cost("ArrayLoad"))
            idx = self._eval(frame, node.index)
            return self._array_get(node.name, idx)
        if isinstance(node, BinOp):
            self._charge(fid, node.nid, "BinOp", ct.cost("BinOp"))
            if node.op == "&&":
                if not truthy(self._eval(frame, node.lhs)):
                    return 0
                return 1 if truthy(self._eval(frame, node.rhs)) else 0
            if node.op == "||":
                if truthy(self._eval(frame, node.lhs)):
                    return 1
                return 1 if truthy(self._eval(frame, node.rhs)) else 0
            lhs = self._eval(frame, node.lhs)
            rhs = self._eval(frame, node.rhs)
            return apply_binop(node.op, lhs, rhs)
        if isinstance(node, UnaryOp):
            self._charge(fid, node.nid, "UnaryOp", ct.cost("UnaryOp"))
            return apply_unary(node.op, self._eval(frame, node.operand))
        if isinstance(node, Call):
            call_cost = ct.cost("Call")
            if call_cost:
                self._charge(fid, node.nid, "Call", call_cost)
            args = [self._eval(frame, a) for a in node.args]
            if frame.instr is not None:
                self._close_region(frame)
            try:
                result = self._invoke(node.callee, args, caller=frame)
            finally:
                if frame.instr is not None:
                    self._open_region(frame)
            return result
        if isinstance(node, Out):
            self._charge(fid, node.nid, "Out", ct.cost("Out"))
            value = self._eval(frame, node.arg)
            if value is None:
                raise MiniRuntimeError("out() of void value")
            self.trace.output.append(value)
            return None
        if isinstance(node, Pause):
            amount = self._eval(frame, node.arg)
            if not isinstance(amount, int) or amount < 0:
                raise MiniRuntimeError("pause() needs a non-negative integer")
            if frame.instr is not None:
                self._close_region(frame)
            self._charge(fid, node.nid, "Pause", amount, "safepoint")
            if frame.instr is not None:
                self._open_region(frame)
            return None
        raise AssertionError(f"unexpected expression {node!r}")

    # -- globals ----------------------------------------------------------

    def _array_get(self, name: str, idx):
        arr = self.arrays.get(name)
        if arr is None:
            raise MiniRuntimeError(f"unknown array '{name}'")
        if not isinstance(idx, int):
            raise MiniRuntimeError("array index must be an integer")
        if idx < 0 or idx >= len(arr):
            raise MiniRuntimeError(f"index {idx} out of bounds for '{name}[{len(arr)}]'")
        return arr[idx]

    def _array_set(self, name: str, idx, value):
        arr = self.arrays.get(name)
        if arr is None:
            raise MiniRuntimeError(f"unknown array '{name}'")
        if not isinstance(idx, int):
            raise MiniRuntimeError("array index must be an integer")
        if idx < 0 or idx >= len(arr):
            raise MiniRuntimeError(f"index {idx} out of bounds for '{name}[{len(arr)}]'")
        arr[idx] = value


def run_with_big_stack(fn, *args, stack_bytes: int = 1 << 30, recursion_limit: int = 400_000):
    """Run `fn(*args)` on a thread with a large stack (deep MiniLang recursion
    would overflow the default 8 MiB main-thread stack)."""
    result: dict = {}

    def runner():
        import sys

        old = sys.getrecursionlimit()
        sys.setrecursionlimit(max(old, recursion_limit))
        try:
            result["value"] = fn(*args)
        except BaseException as exc:  # propagated below
            result["error"] = exc

    old_size = threading.stack_size(stack_bytes)
    try:
        t = threading.Thread(target=runner)
        t.start()
        t.join()
    finally:
        threading.stack_size(old_size)
    if "error" in result:
        raise result["error"]
    return result["value"]


def interpret(
    program: Program,
    entry: Optional[str] = None,
    args: tuple = (),
    clock: Optional[Clock] = None,
    profiles: Optional[Profiles] = None,
    trace: bool = False,
    cost_table: Optional[CostTable] = None,
) -> tuple[object, ExecTrace]:
    """Profiled interpretation of a program's entry function.

    Runs on a large-stack worker thread so the 10,000-frame limit is
    reachable as a clean error.
    """
    session = Interpreter(
        program,
        clock=clock,
        cost_table=cost_table,
        profiles=profiles,
        trace=trace,
    )
    name = entry or program.entry
    value = run_with_big_stack(session.call, name, tuple(args))
    return value, session.trace

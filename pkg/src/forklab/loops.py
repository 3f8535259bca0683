"""Loop-structure analyses over the IR: loop forest, counted-loop detection,
node census.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from .ast import (
    Assign,
    BinOp,
    Call,
    Const,
    For,
    FunctionIR,
    GlobalRead,
    LocalRead,
    Node,
    While,
    walk,
)
from .errors import InvalidLoop


@dataclass
class CountedInfo:
    induction_var: str
    init: Optional[Node]  # None when statically unknown (bare While)
    limit: Node
    step: Node
    const_trip_count: Optional[int] = None


@dataclass
class LoopInfo:
    loop_id: int
    header: Node  # the While/For node itself
    depth: int
    parent: Optional[int]
    children: list[int] = field(default_factory=list)
    body_node_ids: set[int] = field(default_factory=set)
    counted: Optional[CountedInfo] = None

    @property
    def size(self) -> int:
        return len(self.body_node_ids)


def find_loops(fn: FunctionIR) -> list[LoopInfo]:
    """One LoopInfo per While/For node, preorder, with nesting links.

    `body_node_ids` covers the loop's whole subtree including the header.
    """
    loops: list[LoopInfo] = []

    def visit(node: Node, stack: list[LoopInfo]):
        if isinstance(node, (While, For)):
            parent = stack[-1] if stack else None
            info = LoopInfo(
                loop_id=node.loop_id,
                header=node,
                depth=len(stack) + 1,
                parent=parent.loop_id if parent else None,
            )
            if parent:
                parent.children.append(node.loop_id)
            loops.append(info)
            stack = stack + [info]
        for inner in stack:
            inner.body_node_ids.add(node.nid)
        for child in node.children():
            visit(child, stack)

    visit(fn.body, [])
    for info in loops:
        info.counted = detect_counted(fn, info.loop_id, _header=info.header)
    return loops


def _const_int(node: Node) -> Optional[int]:
    if isinstance(node, Const) and isinstance(node.value, int):
        return node.value
    return None


def ceil_div(a: int, b: int) -> int:
    return -((-a) // b)


def trip_count(init: int, limit: int, step: int) -> int:
    return max(0, ceil_div(limit - init, step))


def _writes_name(body: Node, name: str) -> int:
    return sum(1 for n in walk(body) if isinstance(n, Assign) and n.name == name)


def detect_counted(
    fn: FunctionIR, loop_id: int, _header: Node | None = None
) -> Optional[CountedInfo]:
    """CountedInfo for For nodes and for Whiles matching the canonical shape.

    Canonical While: condition `iv < limit`, the body's last statement is
    `iv = iv + C` (or `C + iv`) with constant C > 0, and iv is written
    nowhere else in the body.  `init` is taken from an immediately preceding
    `let iv = e` / `iv = e` when one exists in the enclosing block.
    const_trip_count is filled only when init, limit and step are constants.
    """
    header = _header
    if header is None:
        from .parser import loop_node

        header = loop_node(fn, loop_id)
        if header is None:
            raise InvalidLoop(f"no loop {loop_id} in '{fn.name}'")

    if isinstance(header, For):
        init_c = _const_int(header.init)
        limit_c = _const_int(header.limit)
        step_c = _const_int(header.step)
        ctc = None
        if init_c is not None and limit_c is not None and step_c is not None and step_c > 0:
            ctc = trip_count(init_c, limit_c, step_c)
        return CountedInfo(header.var, header.init, header.limit, header.step, ctc)

    assert isinstance(header, While)
    cond = header.cond
    if not (isinstance(cond, BinOp) and cond.op == "<" and isinstance(cond.lhs, LocalRead)):
        return None
    iv = cond.lhs.name
    stmts = header.body.stmts
    if not stmts:
        return None
    tail = stmts[-1]
    if not (isinstance(tail, Assign) and tail.name == iv and tail.scope == "local"):
        return None
    upd = tail.value
    step: Optional[Node] = None
    if isinstance(upd, BinOp) and upd.op == "+":
        if isinstance(upd.lhs, LocalRead) and upd.lhs.name == iv:
            step = upd.rhs
        elif isinstance(upd.rhs, LocalRead) and upd.rhs.name == iv:
            step = upd.lhs
    if step is None:
        return None
    step_c = _const_int(step)
    if step_c is None or step_c <= 0:
        return None
    # the tail update must be the only write to iv in the body
    if _writes_name(header.body, iv) != 1:
        return None

    init = _find_init(fn, header, iv)
    init_c = _const_int(init) if init is not None else None
    limit_c = _const_int(cond.rhs)
    ctc = None
    if init_c is not None and limit_c is not None:
        ctc = trip_count(init_c, limit_c, step_c)
    return CountedInfo(iv, init, cond.rhs, step, ctc)


def _find_init(fn: FunctionIR, header: While, iv: str) -> Optional[Node]:
    """Expression assigned to iv by the statement directly before the loop."""
    from .ast import Block, Let

    for node in fn.walk():
        if isinstance(node, Block):
            for i, s in enumerate(node.stmts):
                if s is header and i > 0:
                    prev = node.stmts[i - 1]
                    if isinstance(prev, Let) and prev.name == iv:
                        return prev.value
                    if isinstance(prev, Assign) and prev.name == iv and prev.scope == "local":
                        return prev.value
                    return None
    return None


def loop_scope_nodes(fn: FunctionIR, loop_id: int) -> list[Node]:
    from .parser import loop_node

    header = loop_node(fn, loop_id)
    if header is None:
        raise InvalidLoop(f"no loop {loop_id} in '{fn.name}'")
    return list(walk(header))


def node_census(fn: FunctionIR, loop_id: Optional[int] = None) -> dict[str, int]:
    """Count nodes by kind, whole function or one loop's subtree."""
    nodes = fn.walk() if loop_id is None else loop_scope_nodes(fn, loop_id)
    census: dict[str, int] = {}
    for n in nodes:
        census[n.kind] = census.get(n.kind, 0) + 1
    return census

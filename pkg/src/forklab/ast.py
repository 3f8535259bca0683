"""Structured IR for MiniLang functions.

The node universe is fixed: Block, Let, Assign, ArrayStore, If, While, For,
Return, ExprStmt, Const, LocalRead, GlobalRead, ArrayLoad, BinOp, UnaryOp,
Call, Out, Pause.  Node ids are unique within a function and assigned in
preorder at parse time; loop ids are assigned in preorder at parse time and
survive copying, so forks, features and data points can refer back to the
same source loop.

Dataclass equality deliberately ignores node ids and source locations:
``a == b`` is structural equality.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields
from typing import ClassVar, Iterator, Optional

INT64_MIN = -(2**63)
INT64_MAX = 2**63 - 1

NODE_KINDS = (
    "Block", "Let", "Assign", "ArrayStore", "If", "While", "For", "Return",
    "ExprStmt", "Const", "LocalRead", "GlobalRead", "ArrayLoad", "BinOp",
    "UnaryOp", "Call", "Out", "Pause",
)


@dataclass(eq=True)
class Node:
    """Base class; `nid` and `loc` never take part in equality."""

    kind: ClassVar[str] = "?"
    nid: int = field(default=-1, kw_only=True, compare=False)
    loc: tuple[int, int] = field(default=(0, 0), kw_only=True, compare=False)

    def children(self) -> tuple["Node", ...]:
        return ()


@dataclass(eq=True)
class Block(Node):
    kind: ClassVar[str] = "Block"
    stmts: list[Node] = field(default_factory=list)

    def children(self):
        return tuple(self.stmts)


@dataclass(eq=True)
class Let(Node):
    kind: ClassVar[str] = "Let"
    name: str = ""
    value: Node = None

    def children(self):
        return (self.value,)


@dataclass(eq=True)
class Assign(Node):
    kind: ClassVar[str] = "Assign"
    name: str = ""
    value: Node = None
    scope: str = "local"  # "local" | "global", resolved at parse time

    def children(self):
        return (self.value,)


@dataclass(eq=True)
class ArrayStore(Node):
    kind: ClassVar[str] = "ArrayStore"
    name: str = ""
    index: Node = None
    value: Node = None

    def children(self):
        return (self.index, self.value)


@dataclass(eq=True)
class If(Node):
    kind: ClassVar[str] = "If"
    cond: Node = None
    then: Block = None
    orelse: Optional[Block] = None

    def children(self):
        return (self.cond, self.then) + ((self.orelse,) if self.orelse is not None else ())


@dataclass(eq=True)
class While(Node):
    kind: ClassVar[str] = "While"
    cond: Node = None
    body: Block = None
    loop_id: int = -1

    def children(self):
        return (self.cond, self.body)


@dataclass(eq=True)
class For(Node):
    """Counted shape by construction: (iv = init; iv < limit; iv += step)."""

    kind: ClassVar[str] = "For"
    var: str = ""
    init: Node = None
    limit: Node = None
    step: Node = None
    body: Block = None
    loop_id: int = -1

    def children(self):
        return (self.init, self.limit, self.step, self.body)


@dataclass(eq=True)
class Return(Node):
    kind: ClassVar[str] = "Return"
    value: Optional[Node] = None

    def children(self):
        return (self.value,) if self.value is not None else ()


@dataclass(eq=True)
class ExprStmt(Node):
    kind: ClassVar[str] = "ExprStmt"
    expr: Node = None

    def children(self):
        return (self.expr,)


@dataclass(eq=True)
class Const(Node):
    kind: ClassVar[str] = "Const"
    value: object = 0  # int (64-bit two's-complement domain) or float

    def children(self):
        return ()


@dataclass(eq=True)
class LocalRead(Node):
    kind: ClassVar[str] = "LocalRead"
    name: str = ""


@dataclass(eq=True)
class GlobalRead(Node):
    kind: ClassVar[str] = "GlobalRead"
    name: str = ""


@dataclass(eq=True)
class ArrayLoad(Node):
    kind: ClassVar[str] = "ArrayLoad"
    name: str = ""
    index: Node = None

    def children(self):
        return (self.index,)


@dataclass(eq=True)
class BinOp(Node):
    kind: ClassVar[str] = "BinOp"
    op: str = ""
    lhs: Node = None
    rhs: Node = None

    def children(self):
        return (self.lhs, self.rhs)


@dataclass(eq=True)
class UnaryOp(Node):
    kind: ClassVar[str] = "UnaryOp"
    op: str = ""
    operand: Node = None

    def children(self):
        return (self.operand,)


@dataclass(eq=True)
class Call(Node):
    kind: ClassVar[str] = "Call"
    callee: str = ""
    args: list[Node] = field(default_factory=list)

    def children(self):
        return tuple(self.args)


@dataclass(eq=True)
class Out(Node):
    kind: ClassVar[str] = "Out"
    arg: Node = None

    def children(self):
        return (self.arg,)


@dataclass(eq=True)
class Pause(Node):
    kind: ClassVar[str] = "Pause"
    arg: Node = None

    def children(self):
        return (self.arg,)


@dataclass
class GlobalDecl:
    name: str
    length: Optional[int] = None  # None = scalar, otherwise fixed array size


@dataclass
class FunctionIR:
    """One MiniLang function: the unit of compilation and transformation.

    `instr` carries the self-time instrumentation marker (None until a fork
    is instrumented); the runtime gives marked functions region-timing and
    exit-recording semantics.
    """

    name: str
    params: list[str]
    body: Block
    next_node_id: int = 0
    instr: Optional[object] = None

    def walk(self) -> Iterator[Node]:
        yield from walk(self.body)


@dataclass
class Program:
    globals: list[GlobalDecl]
    functions: dict[str, FunctionIR]
    entry: str

    def global_decl(self, name: str) -> Optional[GlobalDecl]:
        for g in self.globals:
            if g.name == name:
                return g
        return None


def walk(node: Node) -> Iterator[Node]:
    """Preorder traversal of a subtree."""
    yield node
    for child in node.children():
        yield from walk(child)


def renumber(fn: FunctionIR) -> None:
    """Reassign node ids in preorder starting at 0."""
    nid = 0
    for node in fn.walk():
        node.nid = nid
        nid += 1
    fn.next_node_id = nid


def copy_tree(node: Node, alloc) -> Node:
    """Copy a subtree; `alloc()` yields node ids for the copies.

    Loop ids on While/For copies are preserved (origin lineage).
    """
    kw = {}
    for f in fields(node):
        if f.name in ("nid", "loc"):
            continue
        v = getattr(node, f.name)
        if isinstance(v, Node):
            kw[f.name] = copy_tree(v, alloc)
        elif isinstance(v, list):
            kw[f.name] = [copy_tree(x, alloc) if isinstance(x, Node) else x for x in v]
        else:
            kw[f.name] = v
    out = type(node)(**kw, nid=alloc(), loc=node.loc)
    return out


def deep_copy(fn: FunctionIR) -> FunctionIR:
    """Whole-function copy with fresh node ids, preserved loop ids.

    Fresh ids start at the source's next_node_id, so copy and source never
    share an id; mutating the copy cannot affect the original.
    """
    counter = [fn.next_node_id]

    def alloc():
        counter[0] += 1
        return counter[0] - 1

    body = copy_tree(fn.body, alloc)
    return FunctionIR(fn.name, list(fn.params), body, next_node_id=counter[0], instr=fn.instr)


def node_to_dict(node: Node, ids: dict[int, int]) -> dict:
    d: dict = {"kind": node.kind, "id": ids[id(node)]}
    for f in fields(node):
        if f.name in ("nid", "loc"):
            continue
        v = getattr(node, f.name)
        if isinstance(v, Node):
            d[f.name] = node_to_dict(v, ids)
        elif isinstance(v, list):
            d[f.name] = [node_to_dict(x, ids) if isinstance(x, Node) else x for x in v]
        else:
            d[f.name] = v
    return d


def canonical_bytes(fn: FunctionIR) -> bytes:
    """Id-insensitive serialization: preorder-renumbered JSON bytes.

    Two structurally equal functions serialize byte-identically even when
    their node ids differ (deep copies, transplanted subtrees).
    """
    import json

    ids = {id(n): i for i, n in enumerate(fn.walk())}
    doc = {"name": fn.name, "params": fn.params, "body": node_to_dict(fn.body, ids)}
    return json.dumps(doc, sort_keys=True, separators=(",", ":")).encode("utf-8")


def tree_hash(fn: FunctionIR) -> str:
    import hashlib

    return hashlib.sha256(canonical_bytes(fn)).hexdigest()

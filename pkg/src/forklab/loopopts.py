"""Forkable optimization phases: canonicalization, loop peeling, partial
loop unrolling.  All transforms are pure: the input function is never
mutated and observable behavior is preserved for every input.
"""

from __future__ import annotations

from dataclasses import dataclass

from .ast import (
    INT64_MAX,
    INT64_MIN,
    Assign,
    BinOp,
    Block,
    Call,
    Const,
    For,
    FunctionIR,
    GlobalRead,
    If,
    Let,
    LocalRead,
    Node,
    Out,
    Pause,
    UnaryOp,
    While,
    copy_tree,
    deep_copy,
    walk,
)
from .errors import InvalidFactor, InvalidLoop, MiniRuntimeError, NotCounted
from .loops import detect_counted
from .ops import apply_binop, apply_unary

ALLOWED_FACTORS = (2, 4, 8, 16, 32)


@dataclass(frozen=True)
class PeelDecision:
    loop_id: int
    apply: bool


@dataclass(frozen=True)
class UnrollDecision:
    loop_id: int
    factor: int  # 1 = no unroll

    def __post_init__(self):
        if self.factor != 1 and self.factor not in ALLOWED_FACTORS:
            raise InvalidFactor(f"factor {self.factor} not in {ALLOWED_FACTORS}")


def _is_const(node: Node) -> bool:
    return isinstance(node, Const)


def _fold(node: Node) -> Node:
    """Bottom-up constant folding; one pass reaches a fixpoint."""
    for name in ("cond", "value", "index", "lhs", "rhs", "operand", "expr",
                 "init", "limit", "step", "arg"):
        child = getattr(node, name, None)
        if isinstance(child, Node):
            setattr(node, name, _fold(child))
    if hasattr(node, "args"):
        node.args = [_fold(a) for a in node.args]
    if hasattr(node, "stmts"):
        node.stmts = [_fold(s) for s in node.stmts]
    if isinstance(node, If):
        node.then = _fold(node.then)
        if node.orelse is not None:
            node.orelse = _fold(node.orelse)
    if isinstance(node, (While, For)):
        node.body = _fold(node.body)

    if isinstance(node, BinOp):
        lc, rc = _is_const(node.lhs), _is_const(node.rhs)
        if node.op == "&&" and lc and not truthy_const(node.lhs):
            return Const(0, loc=node.loc)
        if node.op == "||" and lc and truthy_const(node.lhs):
            return Const(1, loc=node.loc)
        if lc and rc:
            try:
                value = apply_binop(node.op, node.lhs.value, node.rhs.value)
            except MiniRuntimeError:
                return node  # preserve runtime errors (division by zero)
            if isinstance(value, float) and not _finite(value):
                return node
            return Const(value, loc=node.loc)
        return node
    if isinstance(node, UnaryOp) and _is_const(node.operand):
        value = apply_unary(node.op, node.operand.value)
        if isinstance(value, float) and not _finite(value):
            return node
        return Const(value, loc=node.loc)
    return node


def truthy_const(node: Const) -> bool:
    return node.value != 0


def _finite(x: float) -> bool:
    return x == x and x not in (float("inf"), float("-inf"))


def _prune(node: Node) -> Node:
    """Remove if-statements with constant conditions (post-folding)."""
    if hasattr(node, "stmts"):
        new_stmts = []
        for s in node.stmts:
            s = _prune(s)
            if isinstance(s, If) and _is_const(s.cond):
                if truthy_const(s.cond):
                    new_stmts.append(s.then)
                elif s.orelse is not None:
                    new_stmts.append(s.orelse)
                # false + empty else: statement disappears
                continue
            new_stmts.append(s)
        node.stmts = new_stmts
        return node
    if isinstance(node, If):
        node.then = _prune(node.then)
        if node.orelse is not None:
            node.orelse = _prune(node.orelse)
        return node
    if isinstance(node, (While, For)):
        node.body = _prune(node.body)
        return node
    return node


def canonicalize(fn: FunctionIR) -> FunctionIR:
    """Constant-fold pure int/float expressions and drop dead constant ifs.

    Idempotent; semantics preserved (folds that would trap at runtime, such
    as division by zero, are left in place).
    """
    out = deep_copy(fn)
    out.body = _prune(_fold(out.body))
    return out


def _loop_site(fn: FunctionIR, loop_id: int):
    """Locate (containing stmt list, index, loop node) for a loop id."""
    for node in fn.walk():
        if hasattr(node, "stmts"):
            for i, s in enumerate(node.stmts):
                if isinstance(s, (While, For)) and s.loop_id == loop_id:
                    return node.stmts, i, s
    raise InvalidLoop(f"no loop {loop_id} in '{fn.name}'")


def _alloc_from(fn: FunctionIR):
    def alloc():
        fn.next_node_id += 1
        return fn.next_node_id - 1

    return alloc


def _desugar_for(fn: FunctionIR, loop: For) -> tuple[Block, While]:
    """Rewrite a For into `{ let iv = init; while (iv < limit) { body; iv += step } }`.

    Cost-equivalent by the runtime's For cost convention; the While keeps
    the For's loop id.  Returns (wrapper block, while node).
    """
    alloc = _alloc_from(fn)
    body = Block(
        list(loop.body.stmts)
        + [
            Assign(
                loop.var,
                BinOp("+", LocalRead(loop.var, nid=alloc()), loop.step, nid=alloc()),
                nid=alloc(),
            )
        ],
        nid=loop.body.nid,
    )
    whl = While(
        BinOp("<", LocalRead(loop.var, nid=alloc()), loop.limit, nid=alloc()),
        body,
        loop_id=loop.loop_id,
        nid=loop.nid,
    )
    wrapper = Block([Let(loop.var, loop.init, nid=alloc()), whl], nid=alloc())
    return wrapper, whl


def peel(fn: FunctionIR, loop_id: int) -> FunctionIR:
    """Copy the first iteration in front of the loop behind a guard.

    While loops gain `if (cond) { body }` immediately before the unchanged
    loop.  For loops are first rewritten to their while form (induction
    variable hoisted into a fresh scope) so the guard can include the
    variable update.  Refused when the condition has side effects: the
    guard would evaluate it a second time on the zero-trip path.
    """
    out = deep_copy(fn)
    stmts, i, loop = _loop_site(out, loop_id)
    alloc = _alloc_from(out)

    # the guard re-evaluates the check on the zero-trip path
    checked = loop.cond if isinstance(loop, While) else loop.limit
    if any(isinstance(n, (Call, Out, Pause)) for n in walk(checked)):
        raise InvalidLoop(f"loop {loop_id} of '{fn.name}': loop check has side effects")

    if isinstance(loop, For):
        wrapper, whl = _desugar_for(out, loop)
        guard = If(
            copy_tree(whl.cond, alloc),
            copy_tree(whl.body, alloc),
            nid=alloc(),
        )
        wrapper.stmts.insert(1, guard)
        stmts[i] = wrapper
        return out

    guard = If(copy_tree(loop.cond, alloc), copy_tree(loop.body, alloc), nid=alloc())
    stmts.insert(i, guard)
    return out


def _stable_limit(limit: Node, body: Block) -> bool:
    """True when re-evaluating `limit` inside the emitted guard is safe:
    it must be the same value at every check the original loop would make."""
    if isinstance(limit, Const):
        return True
    if isinstance(limit, LocalRead):
        return not any(
            isinstance(n, Assign) and n.name == limit.name and n.scope == "local"
            for n in walk(body)
        )
    if isinstance(limit, GlobalRead):
        if any(isinstance(n, Call) for n in walk(body)):
            return False  # callees may write any global
        return not any(
            isinstance(n, Assign) and n.name == limit.name and n.scope == "global"
            for n in walk(body)
        )
    return False


def unroll(fn: FunctionIR, loop_id: int, factor: int) -> FunctionIR:
    """Partial unrolling of a counted loop.

    The main loop runs `factor` body copies per iteration behind the adapted
    condition `iv + (factor-1)*step < limit`, rearranged so the emitted
    64-bit arithmetic can never wrap; an epilogue copy of the original loop
    handles the remainder (and every case the guard cannot prove safe).
    """
    if factor == 1:
        return deep_copy(fn)
    if factor not in ALLOWED_FACTORS:
        raise InvalidFactor(f"factor {factor} not in {ALLOWED_FACTORS}")
    info = detect_counted(fn, loop_id)
    if info is None:
        raise NotCounted(f"loop {loop_id} of '{fn.name}' is not counted")

    if not (isinstance(info.step, Const) and isinstance(info.step.value, int)
            and info.step.value > 0):
        raise NotCounted(f"loop {loop_id} of '{fn.name}': step is not a positive constant")
    step_value = info.step.value
    margin = (factor - 1) * step_value
    if margin > INT64_MAX:
        raise NotCounted(f"loop {loop_id}: unroll margin overflows 64 bits")

    out = deep_copy(fn)
    stmts, i, loop = _loop_site(out, loop_id)

    if isinstance(loop, For):
        wrapper, whl = _desugar_for(out, loop)
        stmts[i] = wrapper
        stmts, i = wrapper.stmts, 1
        loop = whl

    if not _stable_limit(loop.cond.rhs, loop.body):
        raise NotCounted(
            f"loop {loop_id} of '{fn.name}': bound may change inside the body"
        )

    alloc = _alloc_from(out)
    iv = info.induction_var
    limit = loop.cond.rhs
    body_wo_update = Block(loop.body.stmts[:-1], nid=alloc())
    update = loop.body.stmts[-1]  # Assign(iv, iv + step), shape checked above

    guard = _main_guard(limit, margin, iv, alloc)
    if guard is None:
        # statically dead main loop: the remainder loop covers everything
        epilogue = While(
            copy_tree(loop.cond, alloc), copy_tree(loop.body, alloc),
            loop_id=loop.loop_id, nid=alloc(),
        )
        stmts[i] = epilogue
        return out

    main_stmts: list[Node] = []
    for _ in range(factor):
        main_stmts.append(copy_tree(body_wo_update, alloc))
        main_stmts.append(copy_tree(update, alloc))
    main = While(guard, Block(main_stmts, nid=alloc()), loop_id=loop.loop_id, nid=alloc())
    epilogue = While(
        copy_tree(loop.cond, alloc), copy_tree(loop.body, alloc),
        loop_id=loop.loop_id, nid=alloc(),
    )
    stmts[i : i + 1] = [main, epilogue]
    return out


def _main_guard(limit: Node, margin: int, iv: str, alloc):
    """Condition equivalent to `iv + margin < limit` in exact arithmetic.

    A passing guard means the next `factor` body values stay below the
    limit without wrapping.  (The final induction update of a main
    iteration may still wrap, but the original loop wraps identically
    there, so behavior stays equal.)  For a constant limit the subtraction
    folds at transform time; for a variable limit the emitted guard
    brackets the bound first so `limit - margin` itself cannot wrap:

        limit >= INT64_MIN + margin  &&  iv < limit - margin

    Returns None when the main loop is provably never entered.
    """
    if isinstance(limit, Const):
        adapted = limit.value - margin
        if adapted < INT64_MIN:
            return None
        return BinOp("<", LocalRead(iv, nid=alloc()), Const(adapted, nid=alloc()), nid=alloc())

    def lim():
        return copy_tree(limit, alloc)

    low_ok = BinOp(">=", lim(), Const(INT64_MIN + margin, nid=alloc()), nid=alloc())
    in_range = BinOp(
        "<",
        LocalRead(iv, nid=alloc()),
        BinOp("-", lim(), Const(margin, nid=alloc()), nid=alloc()),
        nid=alloc(),
    )
    return BinOp("&&", low_ok, in_range, nid=alloc())

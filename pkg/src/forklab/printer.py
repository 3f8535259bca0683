"""Pretty-printer: parse(pretty(parse(s))) is structurally equal to parse(s).

Transformed IR may contain constructs the grammar cannot express (bare
blocks, folded negative constants); those still print readably but are only
guaranteed to re-parse for parser-produced trees.
"""

from __future__ import annotations

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


def print_expr(node: Node) -> str:
    if isinstance(node, Const):
        v = node.value
        if isinstance(v, float):
            return repr(v)
        if v < 0:
            # negative consts only arise from folding; emit computably
            if v == -(2**63):
                return "(0 - 9223372036854775807 - 1)"
            return f"(0 - {-v})"
        return str(v)
    if isinstance(node, (LocalRead, GlobalRead)):
        return node.name
    if isinstance(node, ArrayLoad):
        return f"{node.name}[{print_expr(node.index)}]"
    if isinstance(node, BinOp):
        return f"({print_expr(node.lhs)} {node.op} {print_expr(node.rhs)})"
    if isinstance(node, UnaryOp):
        return f"({node.op}{print_expr(node.operand)})"
    if isinstance(node, Call):
        return f"{node.callee}({', '.join(print_expr(a) for a in node.args)})"
    if isinstance(node, Out):
        return f"out({print_expr(node.arg)})"
    if isinstance(node, Pause):
        return f"pause({print_expr(node.arg)})"
    raise AssertionError(f"not an expression: {node!r}")


def _print_stmt(node: Node, indent: int, out: list[str]) -> None:
    pad = "    " * indent
    if isinstance(node, Let):
        out.append(f"{pad}let {node.name} = {print_expr(node.value)};")
    elif isinstance(node, Assign):
        out.append(f"{pad}{node.name} = {print_expr(node.value)};")
    elif isinstance(node, ArrayStore):
        out.append(f"{pad}{node.name}[{print_expr(node.index)}] = {print_expr(node.value)};")
    elif isinstance(node, If):
        out.append(f"{pad}if ({print_expr(node.cond)}) {{")
        for s in node.then.stmts:
            _print_stmt(s, indent + 1, out)
        if node.orelse is not None:
            out.append(f"{pad}}} else {{")
            for s in node.orelse.stmts:
                _print_stmt(s, indent + 1, out)
        out.append(f"{pad}}}")
    elif isinstance(node, While):
        out.append(f"{pad}while ({print_expr(node.cond)}) {{")
        for s in node.body.stmts:
            _print_stmt(s, indent + 1, out)
        out.append(f"{pad}}}")
    elif isinstance(node, For):
        head = (
            f"for ({node.var} = {print_expr(node.init)}; "
            f"{node.var} < {print_expr(node.limit)}; "
            f"{node.var} += {print_expr(node.step)})"
        )
        out.append(f"{pad}{head} {{")
        for s in node.body.stmts:
            _print_stmt(s, indent + 1, out)
        out.append(f"{pad}}}")
    elif isinstance(node, Return):
        if node.value is None:
            out.append(f"{pad}return;")
        else:
            out.append(f"{pad}return {print_expr(node.value)};")
    elif isinstance(node, ExprStmt):
        out.append(f"{pad}{print_expr(node.expr)};")
    elif isinstance(node, Block):
        # bare blocks only exist in transformed IR
        out.append(f"{pad}{{")
        for s in node.stmts:
            _print_stmt(s, indent + 1, out)
        out.append(f"{pad}}}")
    else:
        raise AssertionError(f"not a statement: {node!r}")


def print_function(fn: FunctionIR) -> str:
    lines = [f"fn {fn.name}({', '.join(fn.params)}) {{"]
    for s in fn.body.stmts:
        _print_stmt(s, 1, lines)
    lines.append("}")
    return "\n".join(lines)


def pretty(program: Program) -> str:
    parts = []
    for g in program.globals:
        if g.length is None:
            parts.append(f"global {g.name};")
        else:
            parts.append(f"global {g.name}[{g.length}];")
    for fn in program.functions.values():
        parts.append(print_function(fn))
    return "\n\n".join(parts) + "\n"

"""Value semantics shared by the interpreter and the constant folder.

Integers are 64-bit two's-complement with wrapping arithmetic; floats are
IEEE-754 doubles.  Division or modulo by zero (int or float) is a runtime
error.  Comparisons and logical operators yield int 0/1.
"""

from __future__ import annotations

import math

from .errors import MiniRuntimeError

U64 = 2**64
I64_SIGN = 2**63


def wrap64(x: int) -> int:
    return (x + I64_SIGN) % U64 - I64_SIGN


def truthy(v) -> bool:
    if v is None:
        raise MiniRuntimeError("void value used in condition")
    return v != 0


def _num(v):
    if v is None:
        raise MiniRuntimeError("void value used in expression")
    return v


def _trunc_div(a: int, b: int) -> int:
    q = a // b
    if q < 0 and q * b != a:
        q += 1
    return q


def apply_binop(op: str, a, b):
    a, b = _num(a), _num(b)
    if op in ("&&", "||"):
        # non-short-circuit path (both already evaluated, e.g. by the folder)
        if op == "&&":
            return 1 if (truthy(a) and truthy(b)) else 0
        return 1 if (truthy(a) or truthy(b)) else 0
    if op == "==":
        return 1 if a == b else 0
    if op == "!=":
        return 1 if a != b else 0
    if op == "<":
        return 1 if a < b else 0
    if op == "<=":
        return 1 if a <= b else 0
    if op == ">":
        return 1 if a > b else 0
    if op == ">=":
        return 1 if a >= b else 0

    both_int = isinstance(a, int) and isinstance(b, int)
    if op == "+":
        return wrap64(a + b) if both_int else float(a) + float(b)
    if op == "-":
        return wrap64(a - b) if both_int else float(a) - float(b)
    if op == "*":
        return wrap64(a * b) if both_int else float(a) * float(b)
    if op == "/":
        if both_int:
            if b == 0:
                raise MiniRuntimeError("division by zero")
            return wrap64(_trunc_div(a, b))
        if float(b) == 0.0:
            raise MiniRuntimeError("division by zero")
        return float(a) / float(b)
    if op == "%":
        if both_int:
            if b == 0:
                raise MiniRuntimeError("modulo by zero")
            return wrap64(a - _trunc_div(a, b) * b)
        if float(b) == 0.0:
            raise MiniRuntimeError("modulo by zero")
        return math.fmod(float(a), float(b))
    raise AssertionError(f"unknown operator {op!r}")


def apply_unary(op: str, v):
    v = _num(v)
    if op == "-":
        return wrap64(-v) if isinstance(v, int) else -v
    if op == "!":
        return 0 if truthy(v) else 1
    raise AssertionError(f"unknown operator {op!r}")

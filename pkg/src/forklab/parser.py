"""Recursive-descent parser for MiniLang.

Grammar:

    program := (global | func)*
    global  := "global" IDENT ("[" INT "]")? ";"
    func    := "fn" IDENT "(" (IDENT ("," IDENT)*)? ")" block
    block   := "{" stmt* "}"
    stmt    := "let" IDENT "=" expr ";" | IDENT "=" expr ";"
             | IDENT "[" expr "]" "=" expr ";"
             | "if" "(" expr ")" block ("else" block)?
             | "while" "(" expr ")" block
             | "for" "(" IDENT "=" expr ";" IDENT "<" expr ";" IDENT "+=" expr ")" block
             | "return" expr? ";" | expr ";"
    expr    := precedence climbing over || && == != < <= > >= + - * / % unary- unary!

Builtins `out(x)` and `pause(n)` parse into dedicated node kinds.  Name
resolution runs after the whole program is parsed (globals may appear after
their uses), turning identifier reads into LocalRead/GlobalRead and checking
call arity.  Node ids and loop ids are assigned in preorder per function.
"""

from __future__ import annotations

from dataclasses import dataclass

from .ast import (
    INT64_MAX,
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
    GlobalDecl,
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
    renumber,
)
from .errors import ParseError

KEYWORDS = {"global", "fn", "let", "if", "else", "while", "for", "return"}

_PUNCT = [
    "+=", "||", "&&", "==", "!=", "<=", ">=",
    "(", ")", "{", "}", "[", "]", ",", ";", "=", "<", ">",
    "+", "-", "*", "/", "%", "!",
]

# binary operator precedence (higher binds tighter)
_PREC = {
    "||": 1, "&&": 2,
    "==": 3, "!=": 3,
    "<": 4, "<=": 4, ">": 4, ">=": 4,
    "+": 5, "-": 5,
    "*": 6, "/": 6, "%": 6,
}


@dataclass
class Token:
    kind: str  # "ident" | "int" | "float" | "punct" | "kw" | "eof"
    text: str
    line: int
    col: int


def tokenize(source: str) -> list[Token]:
    toks: list[Token] = []
    i, line, col = 0, 1, 1
    n = len(source)
    while i < n:
        c = source[i]
        if c == "\n":
            i += 1
            line += 1
            col = 1
            continue
        if c in " \t\r":
            i += 1
            col += 1
            continue
        if c.isdigit():
            j = i
            while j < n and source[j].isdigit():
                j += 1
            is_float = False
            if j < n and source[j] == "." and j + 1 < n and source[j + 1].isdigit():
                is_float = True
                j += 1
                while j < n and source[j].isdigit():
                    j += 1
            if j < n and source[j] in "eE":
                k = j + 1
                if k < n and source[k] in "+-":
                    k += 1
                if k < n and source[k].isdigit():
                    is_float = True
                    j = k
                    while j < n and source[j].isdigit():
                        j += 1
            text = source[i:j]
            if is_float:
                toks.append(Token("float", text, line, col))
            else:
                if int(text) > INT64_MAX:
                    raise ParseError(f"integer literal {text} exceeds 64-bit range", line, col)
                toks.append(Token("int", text, line, col))
            col += j - i
            i = j
            continue
        if c.isalpha() or c == "_":
            j = i
            while j < n and (source[j].isalnum() or source[j] == "_"):
                j += 1
            text = source[i:j]
            toks.append(Token("kw" if text in KEYWORDS else "ident", text, line, col))
            col += j - i
            i = j
            continue
        for p in _PUNCT:
            if source.startswith(p, i):
                toks.append(Token("punct", p, line, col))
                i += len(p)
                col += len(p)
                break
        else:
            raise ParseError(f"unexpected character {c!r}", line, col)
    toks.append(Token("eof", "", line, col))
    return toks


class _Parser:
    def __init__(self, tokens: list[Token]):
        self.toks = tokens
        self.pos = 0

    def peek(self) -> Token:
        return self.toks[self.pos]

    def next(self) -> Token:
        t = self.toks[self.pos]
        self.pos += 1
        return t

    def error(self, expected: str, tok: Token | None = None):
        t = tok or self.peek()
        got = t.text if t.kind != "eof" else "end of input"
        raise ParseError(f"expected {expected}, got {got!r}", t.line, t.col)

    def expect(self, text: str) -> Token:
        t = self.peek()
        if t.kind == "punct" and t.text == text:
            return self.next()
        self.error(f"'{text}'")

    def expect_kw(self, word: str) -> Token:
        t = self.peek()
        if t.kind == "kw" and t.text == word:
            return self.next()
        self.error(f"'{word}'")

    def expect_ident(self) -> Token:
        t = self.peek()
        if t.kind == "ident":
            return self.next()
        self.error("identifier")

    def at(self, text: str) -> bool:
        t = self.peek()
        return t.kind == "punct" and t.text == text

    def at_kw(self, word: str) -> bool:
        t = self.peek()
        return t.kind == "kw" and t.text == word

    # -- grammar productions ------------------------------------------------

    def program(self) -> tuple[list[GlobalDecl], list[FunctionIR]]:
        globs: list[GlobalDecl] = []
        funcs: list[FunctionIR] = []
        while self.peek().kind != "eof":
            if self.at_kw("global"):
                globs.append(self.global_decl())
            elif self.at_kw("fn"):
                funcs.append(self.func())
            else:
                self.error("'global' or 'fn'")
        return globs, funcs

    def global_decl(self) -> GlobalDecl:
        self.expect_kw("global")
        name = self.expect_ident().text
        length = None
        if self.at("["):
            self.next()
            t = self.peek()
            if t.kind != "int":
                self.error("array length")
            length = int(self.next().text)
            self.expect("]")
        self.expect(";")
        return GlobalDecl(name, length)

    def func(self) -> FunctionIR:
        self.expect_kw("fn")
        name = self.expect_ident().text
        self.expect("(")
        params: list[str] = []
        if not self.at(")"):
            params.append(self.expect_ident().text)
            while self.at(","):
                self.next()
                params.append(self.expect_ident().text)
        self.expect(")")
        body = self.block()
        return FunctionIR(name, params, body)

    def block(self) -> Block:
        open_tok = self.expect("{")
        stmts: list[Node] = []
        while not self.at("}"):
            if self.peek().kind == "eof":
                self.error("'}'", self.peek())
            stmts.append(self.stmt())
        self.expect("}")
        return Block(stmts, loc=(open_tok.line, open_tok.col))

    def stmt(self) -> Node:
        t = self.peek()
        if t.kind == "kw":
            if t.text == "let":
                self.next()
                name = self.expect_ident()
                self.expect("=")
                value = self.expr()
                self.expect(";")
                return Let(name.text, value, loc=(t.line, t.col))
            if t.text == "if":
                self.next()
                self.expect("(")
                cond = self.expr()
                self.expect(")")
                then = self.block()
                orelse = None
                if self.at_kw("else"):
                    self.next()
                    orelse = self.block()
                return If(cond, then, orelse, loc=(t.line, t.col))
            if t.text == "while":
                self.next()
                self.expect("(")
                cond = self.expr()
                self.expect(")")
                body = self.block()
                return While(cond, body, loc=(t.line, t.col))
            if t.text == "for":
                return self.for_stmt()
            if t.text == "return":
                self.next()
                value = None
                if not self.at(";"):
                    value = self.expr()
                self.expect(";")
                return Return(value, loc=(t.line, t.col))
            self.error("statement")
        if t.kind == "ident":
            nxt = self.toks[self.pos + 1]
            if nxt.kind == "punct" and nxt.text == "=":
                self.next()
                self.next()
                value = self.expr()
                self.expect(";")
                return Assign(t.text, value, loc=(t.line, t.col))
            if nxt.kind == "punct" and nxt.text == "[":
                # could be `a[i] = v;` or an expression statement `f(a[i]);`
                save = self.pos
                self.next()
                self.next()
                index = self.expr()
                self.expect("]")
                if self.at("="):
                    self.next()
                    value = self.expr()
                    self.expect(";")
                    return ArrayStore(t.text, index, value, loc=(t.line, t.col))
                self.pos = save
        expr = self.expr()
        self.expect(";")
        return ExprStmt(expr, loc=(t.line, t.col))

    def for_stmt(self) -> For:
        t = self.expect_kw("for")
        self.expect("(")
        iv = self.expect_ident()
        self.expect("=")
        init = self.expr()
        self.expect(";")
        iv2 = self.expect_ident()
        if iv2.text != iv.text:
            raise ParseError(
                f"for-loop condition must test '{iv.text}', got '{iv2.text}'", iv2.line, iv2.col
            )
        self.expect("<")
        limit = self.expr()
        self.expect(";")
        iv3 = self.expect_ident()
        if iv3.text != iv.text:
            raise ParseError(
                f"for-loop update must assign '{iv.text}', got '{iv3.text}'", iv3.line, iv3.col
            )
        self.expect("+=")
        step = self.expr()
        self.expect(")")
        body = self.block()
        return For(iv.text, init, limit, step, body, loc=(t.line, t.col))

    def expr(self, min_prec: int = 1) -> Node:
        lhs = self.unary()
        while True:
            t = self.peek()
            if t.kind != "punct" or t.text not in _PREC or _PREC[t.text] < min_prec:
                return lhs
            op = self.next().text
            rhs = self.expr(_PREC[op] + 1)
            lhs = BinOp(op, lhs, rhs, loc=(t.line, t.col))

    def unary(self) -> Node:
        t = self.peek()
        if t.kind == "punct" and t.text in ("-", "!"):
            self.next()
            return UnaryOp(t.text, self.unary(), loc=(t.line, t.col))
        return self.primary()

    def primary(self) -> Node:
        t = self.peek()
        if t.kind == "int":
            self.next()
            return Const(int(t.text), loc=(t.line, t.col))
        if t.kind == "float":
            self.next()
            return Const(float(t.text), loc=(t.line, t.col))
        if t.kind == "punct" and t.text == "(":
            self.next()
            e = self.expr()
            self.expect(")")
            return e
        if t.kind == "ident":
            self.next()
            if self.at("("):
                self.next()
                args: list[Node] = []
                if not self.at(")"):
                    args.append(self.expr())
                    while self.at(","):
                        self.next()
                        args.append(self.expr())
                self.expect(")")
                return Call(t.text, args, loc=(t.line, t.col))
            if self.at("["):
                self.next()
                index = self.expr()
                self.expect("]")
                return ArrayLoad(t.text, index, loc=(t.line, t.col))
            # reads start as LocalRead; resolution may rewrite to GlobalRead
            return LocalRead(t.text, loc=(t.line, t.col))
        self.error("expression")


class _Resolver:
    """Scope/arity checking and identifier classification.

    Rewrites identifier reads into LocalRead/GlobalRead, classifies Assign
    targets, turns out/pause calls into Out/Pause nodes, and forbids writes
    to For induction variables (keeps the counted shape honest).
    """

    def __init__(self, program_globals: dict[str, GlobalDecl], arities: dict[str, int]):
        self.globals = program_globals
        self.arities = arities
        self.scopes: list[set[str]] = []
        self.frozen: set[str] = set()  # For induction variables in scope

    def err(self, msg: str, node: Node):
        raise ParseError(msg, node.loc[0], node.loc[1])

    def declared(self, name: str) -> bool:
        return any(name in s for s in self.scopes)

    def declare(self, name: str, node: Node):
        if name in self.scopes[-1]:
            self.err(f"'{name}' already declared in this scope", node)
        if name in self.frozen:
            self.err(f"cannot shadow induction variable '{name}'", node)
        self.scopes[-1].add(name)

    def resolve_function(self, fn: FunctionIR):
        self.scopes = [set(fn.params)]
        if len(set(fn.params)) != len(fn.params):
            self.err(f"duplicate parameter in '{fn.name}'", fn.body)
        self.frozen = set()
        self.block(fn.body)

    def block(self, blk: Block):
        self.scopes.append(set())
        blk.stmts = [self.stmt(s) for s in blk.stmts]
        self.scopes.pop()

    def stmt(self, node: Node) -> Node:
        if isinstance(node, Let):
            node.value = self.expr(node.value)
            self.declare(node.name, node)
            return node
        if isinstance(node, Assign):
            node.value = self.expr(node.value)
            if self.declared(node.name):
                if node.name in self.frozen:
                    self.err(f"cannot assign induction variable '{node.name}'", node)
                node.scope = "local"
            elif node.name in self.globals and self.globals[node.name].length is None:
                node.scope = "global"
            elif node.name in self.globals:
                self.err(f"'{node.name}' is an array; use '{node.name}[i] = ...'", node)
            else:
                self.err(f"assignment to undeclared name '{node.name}'", node)
            return node
        if isinstance(node, ArrayStore):
            g = self.globals.get(node.name)
            if self.declared(node.name) or g is None or g.length is None:
                self.err(f"'{node.name}' is not a global array", node)
            node.index = self.expr(node.index)
            node.value = self.expr(node.value)
            return node
        if isinstance(node, If):
            node.cond = self.expr(node.cond)
            self.block(node.then)
            if node.orelse is not None:
                self.block(node.orelse)
            return node
        if isinstance(node, While):
            node.cond = self.expr(node.cond)
            self.block(node.body)
            return node
        if isinstance(node, For):
            if node.var in self.frozen:
                self.err(f"cannot shadow induction variable '{node.var}'", node)
            node.init = self.expr(node.init)
            self.scopes.append({node.var})
            self.frozen.add(node.var)
            node.limit = self.expr(node.limit)
            node.step = self.expr(node.step)
            self.block(node.body)
            self.frozen.discard(node.var)
            self.scopes.pop()
            return node
        if isinstance(node, Return):
            if node.value is not None:
                node.value = self.expr(node.value)
            return node
        if isinstance(node, ExprStmt):
            node.expr = self.expr(node.expr)
            return node
        raise AssertionError(f"unexpected statement {node!r}")

    def expr(self, node: Node) -> Node:
        if isinstance(node, LocalRead):
            if self.declared(node.name):
                return node
            g = self.globals.get(node.name)
            if g is not None and g.length is None:
                return GlobalRead(node.name, loc=node.loc)
            if g is not None:
                self.err(f"'{node.name}' is an array; index it", node)
            self.err(f"unknown identifier '{node.name}'", node)
        if isinstance(node, ArrayLoad):
            g = self.globals.get(node.name)
            if self.declared(node.name) or g is None or g.length is None:
                self.err(f"'{node.name}' is not a global array", node)
            node.index = self.expr(node.index)
            return node
        if isinstance(node, Call):
            node.args = [self.expr(a) for a in node.args]
            if node.callee == "out":
                if len(node.args) != 1:
                    self.err("out() takes exactly one argument", node)
                return Out(node.args[0], loc=node.loc)
            if node.callee == "pause":
                if len(node.args) != 1:
                    self.err("pause() takes exactly one argument", node)
                return Pause(node.args[0], loc=node.loc)
            if node.callee not in self.arities:
                self.err(f"call to unknown function '{node.callee}'", node)
            if self.arities[node.callee] != len(node.args):
                self.err(
                    f"'{node.callee}' takes {self.arities[node.callee]} argument(s), "
                    f"got {len(node.args)}",
                    node,
                )
            return node
        if isinstance(node, BinOp):
            node.lhs = self.expr(node.lhs)
            node.rhs = self.expr(node.rhs)
            return node
        if isinstance(node, UnaryOp):
            node.operand = self.expr(node.operand)
            return node
        if isinstance(node, Const):
            return node
        raise AssertionError(f"unexpected expression {node!r}")


def assign_loop_ids(fn: FunctionIR) -> None:
    lid = 0
    for node in fn.walk():
        if isinstance(node, (While, For)):
            node.loop_id = lid
            lid += 1


def parse(source: str) -> Program:
    """Parse MiniLang source into a Program.

    Node ids are assigned in preorder per function; loop ids likewise.
    The entry point is `main` when present, otherwise the first function.
    """
    toks = tokenize(source)
    p = _Parser(toks)
    globs, funcs = p.program()

    seen_g: set[str] = set()
    for g in globs:
        if g.name in seen_g:
            raise ParseError(f"duplicate global '{g.name}'", 1, 1)
        seen_g.add(g.name)
    seen_f: set[str] = set()
    for f in funcs:
        if f.name in seen_f:
            raise ParseError(f"duplicate function '{f.name}'", 1, 1)
        seen_f.add(f.name)
    if not funcs:
        raise ParseError("program has no functions", 1, 1)

    gmap = {g.name: g for g in globs}
    arities = {f.name: len(f.params) for f in funcs}
    resolver = _Resolver(gmap, arities)
    for f in funcs:
        resolver.resolve_function(f)
        renumber(f)
        assign_loop_ids(f)

    entry = "main" if "main" in seen_f else funcs[0].name
    return Program(globs, {f.name: f for f in funcs}, entry)


def loop_node(fn: FunctionIR, loop_id: int):
    """First preorder While/For with the given loop id, or None."""
    for node in fn.walk():
        if isinstance(node, (While, For)) and node.loop_id == loop_id:
            return node
    return None

"""Parser, type checker and parameter resolution for the modeling language.

The language is deliberately small::

    input w: array(uint(W), m);
    output span: uint(L);
    local x: uint(W);
    for j in m {
        x := w[j];
        if span < x { span := x; }
    }
    halt(span);

Count expressions (loop bounds, widths, array lengths) are built from integer
literals, parameter names, ``+``, ``-`` and ``*``.  They are folded to
integers by :func:`resolve`.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field, replace
from typing import Iterator, Mapping, Union

from .errors import ParamError, ParseError, ResolveError, TypeCheckError

MAX_WIDTH = 62

KEYWORDS = {
    "input", "output", "local", "bool", "uint", "array",
    "for", "in", "if", "else", "halt", "true", "false",
}
DECL_KINDS = ("input", "output", "local")
CMP_OPS = ("<", "<=", ">", ">=", "==", "!=")


# ---------------------------------------------------------------------------
# Syntax tree
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Pos:
    line: int
    col: int


@dataclass(frozen=True)
class Param:
    name: str
    pos: Pos | None = field(default=None, compare=False)


@dataclass(frozen=True)
class Arith:
    op: str
    left: "Count"
    right: "Count"


Count = Union[int, Param, Arith]


@dataclass(frozen=True)
class BoolType:
    pass


@dataclass(frozen=True)
class UIntType:
    width: Count


@dataclass(frozen=True)
class ArrayType:
    elem: "Type"
    length: Count


Type = Union[BoolType, UIntType, ArrayType]


@dataclass(frozen=True)
class Const:
    value: int | bool
    pos: Pos | None = field(default=None, compare=False)


@dataclass(frozen=True)
class Var:
    name: str
    pos: Pos | None = field(default=None, compare=False)


@dataclass(frozen=True)
class Index:
    base: "Expr"
    index: "Expr"
    pos: Pos | None = field(default=None, compare=False)


@dataclass(frozen=True)
class Unary:
    op: str
    operand: "Expr"
    pos: Pos | None = field(default=None, compare=False)


@dataclass(frozen=True)
class Binary:
    op: str
    left: "Expr"
    right: "Expr"
    pos: Pos | None = field(default=None, compare=False)


Expr = Union[Const, Var, Index, Unary, Binary]


@dataclass(frozen=True)
class Decl:
    name: str
    kind: str
    type: Type
    pos: Pos | None = field(default=None, compare=False)


@dataclass(frozen=True)
class Assign:
    target: Union[Var, Index]
    expr: Expr
    pos: Pos | None = field(default=None, compare=False)


@dataclass(frozen=True)
class If:
    cond: Expr
    then: tuple["Stmt", ...]
    orelse: tuple["Stmt", ...] | None = None
    pos: Pos | None = field(default=None, compare=False)


@dataclass(frozen=True)
class For:
    var: str
    count: Count
    body: tuple["Stmt", ...]
    pos: Pos | None = field(default=None, compare=False)


@dataclass(frozen=True)
class Halt:
    outputs: tuple[str, ...]
    pos: Pos | None = field(default=None, compare=False)


Stmt = Union[Assign, If, For, Halt]


@dataclass(frozen=True)
class SourceProgram:
    decls: tuple[Decl, ...]
    stmts: tuple[Stmt, ...]
    params: Mapping[str, int] = field(default_factory=dict, compare=False)

    def decl(self, name: str) -> Decl | None:
        for d in self.decls:
            if d.name == name:
                return d
        return None

    @property
    def resolved(self) -> bool:
        return all(_is_resolved_type(d.type) for d in self.decls) and all(
            isinstance(s.count, int) for s in walk_stmts(self.stmts) if isinstance(s, For)
        )


def walk_stmts(stmts: tuple[Stmt, ...]) -> Iterator[Stmt]:
    for s in stmts:
        yield s
        if isinstance(s, If):
            yield from walk_stmts(s.then)
            if s.orelse is not None:
                yield from walk_stmts(s.orelse)
        elif isinstance(s, For):
            yield from walk_stmts(s.body)


def _is_resolved_type(t: Type) -> bool:
    if isinstance(t, BoolType):
        return True
    if isinstance(t, UIntType):
        return isinstance(t.width, int)
    return isinstance(t.length, int) and _is_resolved_type(t.elem)


# ---------------------------------------------------------------------------
# Tokenizer
# ---------------------------------------------------------------------------

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r\n]+)
  | (?P<comment>\#[^\n]*)
  | (?P<num>[0-9]+)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<op>:=|<=|>=|==|!=|[<>+\-*!&|^()\[\]{}:;,])
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class Token:
    kind: str  # num, ident, kw, op, eof
    text: str
    line: int
    col: int


def tokenize(text: str) -> list[Token]:
    tokens: list[Token] = []
    line, line_start, i = 1, 0, 0
    while i < len(text):
        m = _TOKEN_RE.match(text, i)
        if m is None:
            raise ParseError(f"unexpected character {text[i]!r}", line, i - line_start + 1)
        kind = m.lastgroup
        tok = m.group()
        col = i - line_start + 1
        if kind == "ident":
            if tok in KEYWORDS:
                kind = "kw"
            elif "_" in tok:
                raise ParseError(f"identifier {tok!r} may not contain '_'", line, col)
        if kind not in ("ws", "comment"):
            tokens.append(Token(kind, tok, line, col))
        nl = tok.count("\n")
        if nl:
            line += nl
            line_start = i + tok.rindex("\n") + 1
        i = m.end()
    tokens.append(Token("eof", "", line, i - line_start + 1))
    return tokens


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

class _Parser:
    def __init__(self, text: str):
        self.toks = tokenize(text)
        self.i = 0

    @property
    def tok(self) -> Token:
        return self.toks[self.i]

    def error(self, msg: str, tok: Token | None = None) -> ParseError:
        tok = tok or self.tok
        return ParseError(msg, tok.line, tok.col)

    def at(self, text: str) -> bool:
        return self.tok.kind in ("op", "kw") and self.tok.text == text

    def accept(self, text: str) -> Token | None:
        if self.at(text):
            tok = self.tok
            self.i += 1
            return tok
        return None

    def expect(self, text: str) -> Token:
        tok = self.accept(text)
        if tok is None:
            found = self.tok.text or "end of input"
            raise self.error(f"expected {text!r}, found {found!r}")
        return tok

    def ident(self) -> Token:
        if self.tok.kind != "ident":
            found = self.tok.text or "end of input"
            raise self.error(f"expected identifier, found {found!r}")
        tok = self.tok
        self.i += 1
        return tok

    def pos(self) -> Pos:
        return Pos(self.tok.line, self.tok.col)

    # program level

    def program(self) -> SourceProgram:
        decls: list[Decl] = []
        stmts: list[Stmt] = []
        while self.tok.kind != "eof":
            if self.tok.kind == "kw" and self.tok.text in DECL_KINDS:
                decls.append(self.decl())
            else:
                stmts.append(self.stmt())
        return SourceProgram(tuple(decls), tuple(stmts), {})

    def decl(self) -> Decl:
        pos = self.pos()
        kind = self.tok.text
        self.i += 1
        name = self.ident().text
        self.expect(":")
        ty = self.type()
        self.accept(";")
        return Decl(name, kind, ty, pos)

    def type(self) -> Type:
        if self.accept("bool"):
            return BoolType()
        if self.accept("uint"):
            self.expect("(")
            width = self.count()
            self.expect(")")
            return UIntType(width)
        if self.accept("array"):
            self.expect("(")
            elem = self.type()
            self.expect(",")
            length = self.count()
            self.expect(")")
            return ArrayType(elem, length)
        raise self.error(f"expected a type, found {self.tok.text!r}")

    # count expressions

    def count(self) -> Count:
        left = self.count_term()
        while self.at("+") or self.at("-"):
            op = self.tok.text
            self.i += 1
            left = Arith(op, left, self.count_term())
        return left

    def count_term(self) -> Count:
        left = self.count_factor()
        while self.accept("*"):
            left = Arith("*", left, self.count_factor())
        return left

    def count_factor(self) -> Count:
        if self.tok.kind == "num":
            value = int(self.tok.text)
            self.i += 1
            return value
        if self.tok.kind == "ident":
            tok = self.ident()
            return Param(tok.text, Pos(tok.line, tok.col))
        if self.accept("("):
            c = self.count()
            self.expect(")")
            return c
        raise self.error(f"expected a count expression, found {self.tok.text!r}")

    # statements

    def block(self) -> tuple[Stmt, ...]:
        self.expect("{")
        body: list[Stmt] = []
        while not self.at("}"):
            if self.tok.kind == "eof":
                raise self.error("unterminated block")
            if self.tok.kind == "kw" and self.tok.text in DECL_KINDS:
                raise self.error("declarations are only allowed at top level")
            body.append(self.stmt())
        self.expect("}")
        return tuple(body)

    def stmt(self) -> Stmt:
        pos = self.pos()
        if self.accept("if"):
            s = self.if_rest(pos)
        elif self.accept("for"):
            var = self.ident().text
            self.expect("in")
            count = self.count()
            s = For(var, count, self.block(), pos)
        elif self.accept("halt"):
            self.expect("(")
            names: list[str] = []
            if not self.at(")"):
                names.append(self.ident().text)
                while self.accept(","):
                    names.append(self.ident().text)
            self.expect(")")
            s = Halt(tuple(names), pos)
        elif self.tok.kind == "ident":
            target = self.lvalue()
            self.expect(":=")
            s = Assign(target, self.expr(), pos)
        else:
            found = self.tok.text or "end of input"
            raise self.error(f"expected a statement, found {found!r}")
        self.accept(";")
        return s

    def if_rest(self, pos: Pos) -> If:
        cond = self.expr()
        then = self.block()
        orelse = None
        if self.accept("else"):
            if self.at("if"):
                inner_pos = self.pos()
                self.i += 1
                orelse = (self.if_rest(inner_pos),)
            else:
                orelse = self.block()
        return If(cond, then, orelse, pos)

    def lvalue(self) -> Union[Var, Index]:
        tok = self.ident()
        target: Union[Var, Index] = Var(tok.text, Pos(tok.line, tok.col))
        while self.at("["):
            pos = self.pos()
            self.i += 1
            idx = self.expr()
            self.expect("]")
            target = Index(target, idx, pos)
        return target

    # expressions, lowest precedence first

    def expr(self) -> Expr:
        return self.binary_level(0)

    _LEVELS: tuple[tuple[str, ...], ...] = (("|",), ("^",), ("&",))

    def binary_level(self, level: int) -> Expr:
        if level == len(self._LEVELS):
            return self.comparison()
        left = self.binary_level(level + 1)
        while any(self.at(op) for op in self._LEVELS[level]):
            pos = self.pos()
            op = self.tok.text
            self.i += 1
            left = Binary(op, left, self.binary_level(level + 1), pos)
        return left

    def comparison(self) -> Expr:
        left = self.sum()
        if any(self.at(op) for op in CMP_OPS):
            pos = self.pos()
            op = self.tok.text
            self.i += 1
            left = Binary(op, left, self.sum(), pos)
            if any(self.at(op) for op in CMP_OPS):
                raise self.error("comparisons do not chain; use parentheses")
        return left

    def sum(self) -> Expr:
        left = self.unary()
        while self.at("+"):
            pos = self.pos()
            self.i += 1
            left = Binary("+", left, self.unary(), pos)
        return left

    def unary(self) -> Expr:
        if self.at("!"):
            pos = self.pos()
            self.i += 1
            return Unary("!", self.unary(), pos)
        return self.postfix()

    def postfix(self) -> Expr:
        e = self.primary()
        while self.at("["):
            pos = self.pos()
            self.i += 1
            idx = self.expr()
            self.expect("]")
            e = Index(e, idx, pos)
        return e

    def primary(self) -> Expr:
        pos = self.pos()
        if self.tok.kind == "num":
            value = int(self.tok.text)
            self.i += 1
            return Const(value, pos)
        if self.accept("true"):
            return Const(True, pos)
        if self.accept("false"):
            return Const(False, pos)
        if self.tok.kind == "ident":
            return Var(self.ident().text, pos)
        if self.accept("("):
            e = self.expr()
            self.expect(")")
            return e
        found = self.tok.text or "end of input"
        raise self.error(f"expected an expression, found {found!r}")


def parse_source(text: str) -> SourceProgram:
    """Parse and type check a program; widths may still be symbolic."""
    prog = _Parser(text).program()
    check_program(prog)
    return prog


# ---------------------------------------------------------------------------
# Parameters
# ---------------------------------------------------------------------------

_PARAM_RE = re.compile(r"^([A-Za-z][A-Za-z0-9]*)\s*=\s*(\S+)$")


def parse_params(text: str) -> dict[str, int]:
    params: dict[str, int] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        m = _PARAM_RE.match(line)
        if m is None:
            raise ParamError(f"malformed parameter line {raw.strip()!r}", lineno, 1)
        name, value = m.groups()
        if not value.isdigit():
            raise ParamError(f"parameter {name!r} must be a nonnegative integer, got {value!r}", lineno, 1)
        if name in params:
            raise ParamError(f"duplicate parameter {name!r}", lineno, 1)
        params[name] = int(value)
    return params


# ---------------------------------------------------------------------------
# Type checking
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class _Lit:
    """Type of an integer literal; adapts to the width of its context."""
    value: int


def _err(msg: str, node) -> TypeCheckError:
    pos = getattr(node, "pos", None)
    return TypeCheckError(msg, pos.line if pos else None, pos.col if pos else None)


def counter_width(count: int) -> int:
    """Bits of a loop counter that runs 0..count."""
    return max(1, count.bit_length())


def width_of(ty) -> int | None:
    if isinstance(ty, UIntType):
        return ty.width if isinstance(ty.width, int) else None
    if isinstance(ty, _Lit):
        return max(1, ty.value.bit_length())
    return None


def _describe(ty) -> str:
    if isinstance(ty, BoolType):
        return "bool"
    if isinstance(ty, _Lit):
        return "integer literal"
    if isinstance(ty, UIntType):
        return f"uint({ty.width if isinstance(ty.width, int) else '?'})"
    return "array"


class _Checker:
    def __init__(self, prog: SourceProgram):
        self.prog = prog
        self.decls: dict[str, Decl] = {}
        self.counters: dict[str, UIntType] = {}

    def run(self) -> None:
        for d in self.prog.decls:
            if d.name in self.decls:
                raise _err(f"{d.name!r} declared more than once", d)
            self.decls[d.name] = d
        halts = [s for s in walk_stmts(self.prog.stmts) if isinstance(s, Halt)]
        if not halts:
            raise TypeCheckError("program has no halt")
        if len(halts) > 1:
            raise _err("program has more than one halt", halts[1])
        if self.prog.stmts[-1] is not halts[0]:
            raise _err("halt must be the final top-level statement", halts[0])
        self.stmts(self.prog.stmts)

    def stmts(self, stmts: tuple[Stmt, ...]) -> None:
        for s in stmts:
            self.stmt(s)

    def stmt(self, s: Stmt) -> None:
        if isinstance(s, Assign):
            self.assign(s)
        elif isinstance(s, If):
            if not isinstance(self.expr(s.cond), BoolType):
                raise _err("if condition must be bool", s.cond)
            self.stmts(s.then)
            if s.orelse is not None:
                self.stmts(s.orelse)
        elif isinstance(s, For):
            if s.var in self.decls or s.var in self.counters:
                raise _err(f"loop counter {s.var!r} shadows another name", s)
            width = counter_width(s.count) if isinstance(s.count, int) else "?"
            self.counters[s.var] = UIntType(width)
            self.stmts(s.body)
            del self.counters[s.var]
        elif isinstance(s, Halt):
            seen = set()
            for name in s.outputs:
                d = self.decls.get(name)
                if d is None:
                    raise _err(f"undeclared identifier {name!r}", s)
                if d.kind != "output":
                    raise _err(f"halt argument {name!r} is not an output", s)
                if name in seen:
                    raise _err(f"halt lists {name!r} twice", s)
                seen.add(name)

    def assign(self, s: Assign) -> None:
        root = s.target
        while isinstance(root, Index):
            root = root.base
        if root.name in self.counters:
            raise _err(f"loop counter {root.name!r} is read-only", s)
        d = self.decls.get(root.name)
        if d is None:
            raise _err(f"undeclared identifier {root.name!r}", root)
        if d.kind == "input":
            raise _err(f"cannot assign to input {root.name!r}", s)
        tty = self.expr(s.target)
        ety = self.expr(s.expr)
        if isinstance(tty, ArrayType):
            raise _err("whole-array assignment is not supported", s)
        if isinstance(tty, BoolType):
            if not isinstance(ety, BoolType):
                raise _err(f"cannot assign {_describe(ety)} to bool", s)
            return
        if not isinstance(ety, (UIntType, _Lit)):
            raise _err(f"cannot assign {_describe(ety)} to uint", s)
        tw, ew = width_of(tty), width_of(ety)
        if tw is not None and ew is not None and ew > tw:
            raise _err(f"value of width {ew} does not fit in uint({tw})", s)

    def expr(self, e: Expr):
        if isinstance(e, Const):
            if isinstance(e.value, bool):
                return BoolType()
            return _Lit(e.value)
        if isinstance(e, Var):
            if e.name in self.counters:
                return self.counters[e.name]
            d = self.decls.get(e.name)
            if d is None:
                raise _err(f"undeclared identifier {e.name!r}", e)
            return d.type
        if isinstance(e, Index):
            bty = self.expr(e.base)
            if not isinstance(bty, ArrayType):
                raise _err("indexing a non-array", e)
            ity = self.expr(e.index)
            if not isinstance(ity, (UIntType, _Lit)):
                raise _err("array index must be uint", e)
            if isinstance(ity, _Lit) and isinstance(bty.length, int) and ity.value >= bty.length:
                raise _err(f"index {ity.value} out of bounds for length {bty.length}", e)
            return bty.elem
        if isinstance(e, Unary):
            if not isinstance(self.expr(e.operand), BoolType):
                raise _err("'!' needs a bool operand", e)
            return BoolType()
        assert isinstance(e, Binary)
        lt, rt = self.expr(e.left), self.expr(e.right)
        if e.op in ("&", "|", "^"):
            if not (isinstance(lt, BoolType) and isinstance(rt, BoolType)):
                raise _err(f"{e.op!r} needs bool operands", e)
            return BoolType()
        if e.op in ("==", "!=") and isinstance(lt, BoolType) and isinstance(rt, BoolType):
            return BoolType()
        if not (isinstance(lt, (UIntType, _Lit)) and isinstance(rt, (UIntType, _Lit))):
            raise _err(f"{e.op!r} needs uint operands, got {_describe(lt)} and {_describe(rt)}", e)
        if e.op == "+":
            if isinstance(lt, _Lit) and isinstance(rt, _Lit):
                return _Lit(lt.value + rt.value)
            widths = [w for w in (width_of(lt), width_of(rt)) if w is not None]
            if any(isinstance(t, UIntType) and not isinstance(t.width, int) for t in (lt, rt)):
                return UIntType("?")
            return UIntType(max(widths))
        return BoolType()


def check_program(prog: SourceProgram) -> None:
    _Checker(prog).run()


def expr_type(prog: SourceProgram, e: Expr, counters: Mapping[str, int]):
    """Type of ``e`` in a resolved program; ``counters`` maps loop vars to counts."""
    c = _Checker(prog)
    c.decls = {d.name: d for d in prog.decls}
    c.counters = {k: UIntType(counter_width(v)) for k, v in counters.items()}
    return c.expr(e)


# ---------------------------------------------------------------------------
# Resolution
# ---------------------------------------------------------------------------

def eval_count(c: Count, params: Mapping[str, int]) -> int:
    if isinstance(c, int):
        return c
    if isinstance(c, Param):
        if c.name not in params:
            pos = c.pos
            raise ResolveError(f"missing parameter {c.name!r}", pos.line if pos else None, pos.col if pos else None)
        return params[c.name]
    left, right = eval_count(c.left, params), eval_count(c.right, params)
    if c.op == "+":
        return left + right
    if c.op == "-":
        return left - right
    return left * right


def _resolve_type(t: Type, params: Mapping[str, int], decl: Decl) -> Type:
    if isinstance(t, BoolType):
        return t
    if isinstance(t, UIntType):
        w = eval_count(t.width, params)
        if not 1 <= w <= MAX_WIDTH:
            raise _resolve_err(f"width {w} of {decl.name!r} outside 1..{MAX_WIDTH}", decl)
        return UIntType(w)
    n = eval_count(t.length, params)
    if n < 1:
        raise _resolve_err(f"array {decl.name!r} has length {n}", decl)
    return ArrayType(_resolve_type(t.elem, params, decl), n)


def _resolve_err(msg: str, node) -> ResolveError:
    pos = getattr(node, "pos", None)
    return ResolveError(msg, pos.line if pos else None, pos.col if pos else None)


def _resolve_stmts(stmts: tuple[Stmt, ...], params: Mapping[str, int]) -> tuple[Stmt, ...]:
    out: list[Stmt] = []
    for s in stmts:
        if isinstance(s, If):
            orelse = None if s.orelse is None else _resolve_stmts(s.orelse, params)
            s = replace(s, then=_resolve_stmts(s.then, params), orelse=orelse)
        elif isinstance(s, For):
            n = eval_count(s.count, params)
            if n < 1:
                raise _resolve_err(f"loop over {s.var!r} has non-positive count {n}", s)
            s = replace(s, count=n, body=_resolve_stmts(s.body, params))
        out.append(s)
    return tuple(out)


def resolve(program: SourceProgram, params: Mapping[str, int]) -> SourceProgram:
    """Fold every count expression to an integer and re-check widths."""
    decls = tuple(replace(d, type=_resolve_type(d.type, params, d)) for d in program.decls)
    stmts = _resolve_stmts(program.stmts, params)
    resolved = SourceProgram(decls, stmts, dict(params))
    check_program(resolved)
    return resolved


def compile_source(text: str, params: Mapping[str, int]) -> SourceProgram:
    return resolve(parse_source(text), params)


# ---------------------------------------------------------------------------
# Pretty printer
# ---------------------------------------------------------------------------

_PREC = {"|": 1, "^": 2, "&": 3, "<": 4, "<=": 4, ">": 4, ">=": 4, "==": 4, "!=": 4, "+": 5}


def format_count(c: Count, parent: int = 0) -> str:
    if isinstance(c, int):
        return str(c)
    if isinstance(c, Param):
        return c.name
    prec = 1 if c.op in "+-" else 2
    # right operand of '-' needs brackets at equal precedence
    text = f"{format_count(c.left, prec)} {c.op} {format_count(c.right, prec + (c.op == '-'))}"
    return f"({text})" if prec < parent else text


def format_type(t: Type) -> str:
    if isinstance(t, BoolType):
        return "bool"
    if isinstance(t, UIntType):
        return f"uint({format_count(t.width)})"
    return f"array({format_type(t.elem)}, {format_count(t.length)})"


def format_expr(e: Expr, parent: int = 0) -> str:
    if isinstance(e, Const):
        if isinstance(e.value, bool):
            return "true" if e.value else "false"
        return str(e.value)
    if isinstance(e, Var):
        return e.name
    if isinstance(e, Index):
        return f"{format_expr(e.base, 9)}[{format_expr(e.index)}]"
    if isinstance(e, Unary):
        return f"!{format_expr(e.operand, 8)}"
    prec = _PREC[e.op]
    # comparisons are non-associative; all other operators are left-associative
    right_prec = prec + 1
    left_prec = prec + 1 if prec == 4 else prec
    text = f"{format_expr(e.left, left_prec)} {e.op} {format_expr(e.right, right_prec)}"
    return f"({text})" if prec < parent else text


def _format_stmts(stmts: tuple[Stmt, ...], indent: int, out: list[str]) -> None:
    pad = "    " * indent
    for s in stmts:
        if isinstance(s, Assign):
            out.append(f"{pad}{format_expr(s.target)} := {format_expr(s.expr)};")
        elif isinstance(s, If):
            out.append(f"{pad}if {format_expr(s.cond)} {{")
            _format_stmts(s.then, indent + 1, out)
            if s.orelse is None:
                out.append(f"{pad}}}")
            else:
                out.append(f"{pad}}} else {{")
                _format_stmts(s.orelse, indent + 1, out)
                out.append(f"{pad}}}")
        elif isinstance(s, For):
            out.append(f"{pad}for {s.var} in {format_count(s.count)} {{")
            _format_stmts(s.body, indent + 1, out)
            out.append(f"{pad}}}")
        else:
            out.append(f"{pad}halt({', '.join(s.outputs)});")


def pretty_print(program: SourceProgram) -> str:
    lines = [f"{d.kind} {d.name}: {format_type(d.type)};" for d in program.decls]
    _format_stmts(program.stmts, 0, lines)
    return "\n".join(lines) + "\n"

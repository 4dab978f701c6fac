"""Model files: tokenizer, recursive-descent parser, AST printer and compiler.

Grammar (EBNF; ``NL`` is a newline outside brackets, ``#`` starts a comment)::

    model      = { [ statement ] NL } ;
    statement  = chart | coords | pair | metric | symbol | bind | theta | data | check ;
    chart      = "chart" [ "degree" int ] ;
    coords     = "coords" ident [ "[" int ".." int "]" ] ":" int ;
    pair       = "pair" ref "<->" ref [ "weight" rational ] [ "for" ident "in" int ".." int ] ;
    metric     = "metric" ident "=" matrix ;
    symbol     = "symbol" ident "[" int "]" [ symmetry ] [ "explicit" | "formal" ] ;
    symmetry   = "none" | "antisymmetric" | "symmetric" | "totally-antisymmetric" ;
    bind       = "bind" ident "[" int { "," int } "]" "=" expr ;
    theta      = "theta" "=" expr ;
    data       = "data" word { param } ;
    check      = "check" word { param } ;
    param      = ident "=" ( rational | word | matrix ) ;
    matrix     = "[" row { "," row } "]" ;
    row        = "[" rational { "," rational } "]" ;
    rational   = int [ "/" digits ] ;
    int        = [ "-" ] digits ;
    word       = ident { "-" ident } ;          (no spaces around "-")
    expr       = term { ( "+" | "-" ) term } ;
    term       = unary { "*" unary | "/" digits } ;
    unary      = "-" unary | sum | atom ;
    sum        = "sum" "(" ident "in" index ".." index ")" term ;
    atom       = digits | "hbar" | "I" | ref { "," index } | "(" expr ")" ;
    ref        = ident [ "[" index { "," index } "]" ] ;
    index      = int | ident ;

A derivative suffix ``,k`` differentiates a symbol along the ``k``-th
degree-0 coordinate (canonical coordinate order).
"""

from __future__ import annotations

import hashlib
import re
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Union

from . import bracket_engine as be
from .errors import (
    DegreeMismatch,
    IndexOutOfRange,
    InvalidData,
    ModelDegreeMismatch,
    ModelError,
    ModelSyntaxError,
    QPError,
    UndeclaredIdentifier,
)
from .graded_core import SYMMETRIES, GradedAlgebra, GradedCoordinate, GradedPolynomial, Symbol, derive

KEYWORDS = ("chart", "degree", "coords", "pair", "metric", "symbol", "bind", "theta", "data", "check")
DATA_KINDS = ("poisson", "lie_algebroid", "courant", "twisted_poisson", "pre_courant")


@dataclass(frozen=True)
class Span:
    line: int
    column: int


def _span():
    return field(default=None, compare=False, repr=False)


# -- expression AST ------------------------------------------------------------------

Index = Union[int, str]


@dataclass(frozen=True)
class Num:
    value: int
    span: Span = _span()


@dataclass(frozen=True)
class Hbar:
    span: Span = _span()


@dataclass(frozen=True)
class Imag:
    span: Span = _span()


@dataclass(frozen=True)
class Ref:
    name: str
    indices: tuple = ()
    deriv: tuple = ()
    span: Span = _span()


@dataclass(frozen=True)
class Neg:
    operand: object
    span: Span = _span()


@dataclass(frozen=True)
class BinOp:
    op: str
    left: object
    right: object
    span: Span = _span()


@dataclass(frozen=True)
class Div:
    operand: object
    divisor: int
    span: Span = _span()


@dataclass(frozen=True)
class Sum:
    var: str
    lo: Index
    hi: Index
    body: object
    span: Span = _span()


# -- statements ------------------------------------------------------------------------

@dataclass(frozen=True)
class ChartDecl:
    degree: int | None
    span: Span = _span()


@dataclass(frozen=True)
class CoordsDecl:
    name: str
    lo: int | None
    hi: int | None
    degree: int
    span: Span = _span()


@dataclass(frozen=True)
class PairDecl:
    left: Ref
    right: Ref
    weight: Fraction | None = None
    loop: tuple | None = None
    span: Span = _span()


@dataclass(frozen=True)
class MetricDecl:
    name: str
    matrix: tuple
    span: Span = _span()


@dataclass(frozen=True)
class SymbolDecl:
    name: str
    arity: int
    symmetry: str = "none"
    mode: str = "formal"
    span: Span = _span()


@dataclass(frozen=True)
class BindDecl:
    name: str
    indices: tuple
    expr: object
    span: Span = _span()


@dataclass(frozen=True)
class ThetaDecl:
    expr: object
    span: Span = _span()


@dataclass(frozen=True)
class DataDecl:
    kind: str
    params: tuple
    span: Span = _span()

    def param(self, key, default=None):
        return dict(self.params).get(key, default)


@dataclass(frozen=True)
class CheckDecl:
    name: str
    params: tuple
    span: Span = _span()

    def param(self, key, default=None):
        return dict(self.params).get(key, default)


@dataclass(frozen=True)
class ModelFile:
    statements: tuple
    source: str = field(default="", compare=False, repr=False)
    compiled: "CompiledModel | None" = field(default=None, compare=False, repr=False)

    @property
    def checks(self) -> list[CheckDecl]:
        return [s for s in self.statements if isinstance(s, CheckDecl)]

    @property
    def digest(self) -> str:
        return "sha256:" + hashlib.sha256(self.source.encode("utf-8")).hexdigest()


# -- tokenizer --------------------------------------------------------------------------

_TOKEN = re.compile(r"""
    (?P<ws>[ \t\r]+)
  | (?P<comment>\#[^\n]*)
  | (?P<nl>\n)
  | (?P<num>\d+)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<op><->|\.\.|[()\[\],=:+\-*/])
""", re.VERBOSE)


@dataclass(frozen=True)
class Token:
    kind: str
    text: str
    line: int
    column: int

    @property
    def end(self) -> int:
        return self.column + len(self.text)


def tokenize(text: str) -> list[Token]:
    tokens, pos, line, line_start, depth = [], 0, 1, 0, 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            raise ModelSyntaxError(f"unexpected character {text[pos]!r}", line, pos - line_start + 1)
        kind = m.lastgroup
        col = pos - line_start + 1
        if kind == "nl":
            if depth == 0:
                tokens.append(Token("nl", "\n", line, col))
            line += 1
            line_start = m.end()
        elif kind not in ("ws", "comment"):
            tokens.append(Token(kind, m.group(), line, col))
            if m.group() in "([":
                depth += 1
            elif m.group() in ")]":
                depth = max(depth - 1, 0)
        pos = m.end()
    tokens.append(Token("nl", "\n", line, pos - line_start + 1))
    tokens.append(Token("eof", "", line + 1, 1))
    return tokens


# -- parser -----------------------------------------------------------------------------

class Parser:
    def __init__(self, text: str):
        self.tokens = tokenize(text)
        self.pos = 0

    # token helpers
    @property
    def tok(self) -> Token:
        return self.tokens[self.pos]

    def peek(self, offset=1) -> Token:
        return self.tokens[min(self.pos + offset, len(self.tokens) - 1)]

    def at(self, text, kind=None) -> bool:
        t = self.tok
        return t.text == text and (kind is None or t.kind == kind)

    def advance(self) -> Token:
        t = self.tok
        self.pos += 1
        return t

    def error(self, message, tok=None) -> ModelSyntaxError:
        tok = tok or self.tok
        found = "end of line" if tok.kind == "nl" else "end of file" if tok.kind == "eof" else repr(tok.text)
        return ModelSyntaxError(f"{message}, found {found}", tok.line, tok.column)

    def expect(self, text) -> Token:
        if self.tok.text != text or self.tok.kind in ("nl", "eof"):
            raise self.error(f"expected {text!r}")
        return self.advance()

    def expect_kind(self, kind, what) -> Token:
        if self.tok.kind != kind:
            raise self.error(f"expected {what}")
        return self.advance()

    @staticmethod
    def span(tok: Token) -> Span:
        return Span(tok.line, tok.column)

    # lexical pieces
    def ident(self) -> str:
        return self.expect_kind("ident", "identifier").text

    def word(self) -> str:
        first = self.expect_kind("ident", "name")
        parts, last = [first.text], first
        while self.at("-") and self.tok.column == last.end and self.peek().kind == "ident" \
                and self.peek().column == self.tok.end:
            self.advance()
            last = self.advance()
            parts.append(last.text)
        return "-".join(parts)

    def integer(self) -> int:
        sign = -1 if self.at("-") and self.advance() else 1
        return sign * int(self.expect_kind("num", "integer").text)

    def rational(self) -> Fraction:
        value = Fraction(self.integer())
        if self.at("/"):
            self.advance()
            den = int(self.expect_kind("num", "integer").text)
            if den == 0:
                raise self.error("division by zero")
            value /= den
        return value

    def index(self) -> Index:
        if self.tok.kind == "ident":
            return self.advance().text
        return self.integer()

    def matrix(self) -> tuple:
        self.expect("[")
        rows = [self.row()]
        while self.at(","):
            self.advance()
            rows.append(self.row())
        self.expect("]")
        return tuple(rows)

    def row(self) -> tuple:
        self.expect("[")
        vals = [self.rational()]
        while self.at(","):
            self.advance()
            vals.append(self.rational())
        self.expect("]")
        return tuple(vals)

    def params(self) -> tuple:
        out = []
        while self.tok.kind == "ident":
            key = self.ident()
            self.expect("=")
            if self.at("["):
                value = self.matrix()
            elif self.tok.kind == "ident":
                value = self.word()
            else:
                value = self.rational()
            out.append((key, value))
        return tuple(out)

    # statements
    def parse(self, source: str) -> ModelFile:
        stmts = []
        while self.tok.kind != "eof":
            if self.tok.kind == "nl":
                self.advance()
                continue
            stmts.append(self.statement())
            if self.tok.kind != "nl":
                raise self.error("expected end of statement")
        return ModelFile(tuple(stmts), source)

    def statement(self):
        t = self.tok
        if t.kind != "ident" or t.text not in KEYWORDS or t.text == "degree":
            raise self.error("expected a statement keyword")
        self.advance()
        sp = self.span(t)
        if t.text == "chart":
            degree = None
            if self.at("degree"):
                self.advance()
                degree = self.integer()
            return ChartDecl(degree, sp)
        if t.text == "coords":
            name = self.ident()
            lo = hi = None
            if self.at("["):
                self.advance()
                lo = self.integer()
                self.expect("..")
                hi = self.integer()
                self.expect("]")
            self.expect(":")
            return CoordsDecl(name, lo, hi, self.integer(), sp)
        if t.text == "pair":
            left = self.ref()
            self.expect("<->")
            right = self.ref()
            weight = loop = None
            if self.at("weight"):
                self.advance()
                weight = self.rational()
            if self.at("for"):
                self.advance()
                var = self.ident()
                self.expect("in")
                lo = self.integer()
                self.expect("..")
                loop = (var, lo, self.integer())
            return PairDecl(left, right, weight, loop, sp)
        if t.text == "metric":
            name = self.ident()
            self.expect("=")
            return MetricDecl(name, self.matrix(), sp)
        if t.text == "symbol":
            name = self.ident()
            self.expect("[")
            arity = self.integer()
            self.expect("]")
            symmetry, mode = "none", "formal"
            if self.tok.kind == "ident" and self.tok.text not in ("explicit", "formal"):
                tok = self.tok
                symmetry = self.word()
                if symmetry not in SYMMETRIES:
                    raise ModelSyntaxError(f"unknown symmetry {symmetry!r}", tok.line, tok.column)
            if self.at("explicit") or self.at("formal"):
                mode = self.advance().text
            return SymbolDecl(name, arity, symmetry, mode, sp)
        if t.text == "bind":
            name = self.ident()
            self.expect("[")
            idx = [self.integer()]
            while self.at(","):
                self.advance()
                idx.append(self.integer())
            self.expect("]")
            self.expect("=")
            return BindDecl(name, tuple(idx), self.expr(), sp)
        if t.text == "theta":
            self.expect("=")
            return ThetaDecl(self.expr(), sp)
        if t.text == "data":
            return DataDecl(self.word(), self.params(), sp)
        return CheckDecl(self.word(), self.params(), sp)

    # expressions
    def expr(self):
        node = self.term()
        while self.at("+") or self.at("-"):
            op = self.advance()
            node = BinOp(op.text, node, self.term(), self.span(op))
        return node

    def term(self):
        node = self.unary()
        while self.at("*") or self.at("/"):
            op = self.advance()
            if op.text == "*":
                node = BinOp("*", node, self.unary(), self.span(op))
            else:
                den = int(self.expect_kind("num", "integer divisor").text)
                if den == 0:
                    raise ModelSyntaxError("division by zero", op.line, op.column)
                node = Div(node, den, self.span(op))
        return node

    def unary(self):
        if self.at("-"):
            t = self.advance()
            return Neg(self.unary(), self.span(t))
        if self.at("sum") and self.peek().text == "(":
            t = self.advance()
            self.expect("(")
            var = self.ident()
            self.expect("in")
            lo = self.index()
            self.expect("..")
            hi = self.index()
            self.expect(")")
            return Sum(var, lo, hi, self.term(), self.span(t))
        return self.atom()

    def atom(self):
        t = self.tok
        if t.kind == "num":
            self.advance()
            return Num(int(t.text), self.span(t))
        if t.text == "(":
            self.advance()
            node = self.expr()
            self.expect(")")
            return node
        if t.kind == "ident":
            if t.text == "hbar":
                self.advance()
                return Hbar(self.span(t))
            if t.text == "I":
                self.advance()
                return Imag(self.span(t))
            ref = self.ref()
            deriv = []
            while self.at(","):
                self.advance()
                deriv.append(self.index())
            return Ref(ref.name, ref.indices, tuple(deriv), ref.span)
        raise self.error("expected an expression")

    def ref(self) -> Ref:
        t = self.expect_kind("ident", "identifier")
        idx = []
        if self.at("["):
            self.advance()
            idx.append(self.index())
            while self.at(","):
                self.advance()
                idx.append(self.index())
            self.expect("]")
        return Ref(t.text, tuple(idx), (), self.span(t))


# -- printer ------------------------------------------------------------------------------

def _fmt_rational(q: Fraction) -> str:
    q = Fraction(q)
    return str(q.numerator) if q.denominator == 1 else f"{q.numerator}/{q.denominator}"


def _fmt_ref(r: Ref) -> str:
    text = r.name
    if r.indices:
        text += "[" + ",".join(str(i) for i in r.indices) + "]"
    for d in r.deriv:
        text += f",{d}"
    return text


def _prec(node) -> int:
    if isinstance(node, (Sum,)):
        return 1
    if isinstance(node, BinOp):
        return 1 if node.op in "+-" else 2
    if isinstance(node, Div):
        return 2
    if isinstance(node, Neg):
        return 3
    return 4


def format_expr(node, need: int = 0) -> str:
    if isinstance(node, Num):
        text = str(node.value)
    elif isinstance(node, Hbar):
        text = "hbar"
    elif isinstance(node, Imag):
        text = "I"
    elif isinstance(node, Ref):
        text = _fmt_ref(node)
    elif isinstance(node, Neg):
        text = "-" + format_expr(node.operand, 3)
    elif isinstance(node, Div):
        text = f"{format_expr(node.operand, 2)}/{node.divisor}"
    elif isinstance(node, BinOp):
        if node.op == "*":
            text = f"{format_expr(node.left, 2)}*{format_expr(node.right, 3)}"
        else:
            text = f"{format_expr(node.left, 1)} {node.op} {format_expr(node.right, 2)}"
    elif isinstance(node, Sum):
        body = format_expr(node.body, 0) if isinstance(node.body, Sum) else format_expr(node.body, 2)
        text = f"sum({node.var} in {node.lo}..{node.hi}) {body}"
    else:
        raise TypeError(f"not an expression node: {node!r}")
    return f"({text})" if _prec(node) < need else text


def _fmt_params(params) -> str:
    out = []
    for key, value in params:
        if isinstance(value, tuple):
            value = _fmt_matrix(value)
        elif isinstance(value, Fraction):
            value = _fmt_rational(value)
        out.append(f" {key}={value}")
    return "".join(out)


def _fmt_matrix(m) -> str:
    return "[" + ", ".join("[" + ", ".join(_fmt_rational(v) for v in row) + "]" for row in m) + "]"


def format_statement(s) -> str:
    if isinstance(s, ChartDecl):
        return "chart" if s.degree is None else f"chart degree {s.degree}"
    if isinstance(s, CoordsDecl):
        rng = "" if s.lo is None else f"[{s.lo}..{s.hi}]"
        return f"coords {s.name}{rng} : {s.degree}"
    if isinstance(s, PairDecl):
        text = f"pair {_fmt_ref(s.left)} <-> {_fmt_ref(s.right)}"
        if s.weight is not None:
            text += f" weight {_fmt_rational(s.weight)}"
        if s.loop is not None:
            text += f" for {s.loop[0]} in {s.loop[1]}..{s.loop[2]}"
        return text
    if isinstance(s, MetricDecl):
        return f"metric {s.name} = {_fmt_matrix(s.matrix)}"
    if isinstance(s, SymbolDecl):
        return f"symbol {s.name}[{s.arity}] {s.symmetry} {s.mode}"
    if isinstance(s, BindDecl):
        return f"bind {s.name}[{','.join(map(str, s.indices))}] = {format_expr(s.expr)}"
    if isinstance(s, ThetaDecl):
        return f"theta = {format_expr(s.expr)}"
    if isinstance(s, DataDecl):
        return f"data {s.kind}{_fmt_params(s.params)}"
    if isinstance(s, CheckDecl):
        return f"check {s.name}{_fmt_params(s.params)}"
    raise TypeError(f"not a statement: {s!r}")


def format_model(model: ModelFile) -> str:
    return "".join(format_statement(s) + "\n" for s in model.statements)


# -- compiler -------------------------------------------------------------------------------

def _err(cls, message, node) -> ModelError:
    span = getattr(node, "span", None)
    return cls(message, span.line if span else None, span.column if span else None)


@dataclass
class SymbolInfo:
    decl: SymbolDecl
    symbol: Symbol
    bindings: dict = field(default_factory=dict)  # canonical indices -> body polynomial
    bind_decls: list = field(default_factory=list)

    def component(self, body: GradedAlgebra, *idx) -> GradedPolynomial:
        sign, jet = self.symbol.canonical(idx)
        if jet is None:
            return body.zero()
        value = self.bindings.get(jet.indices)
        if value is not None:
            return body.embed(value).scale(sign)
        if self.decl.mode == "explicit":
            return body.zero()
        return body.jet(self.symbol, *idx)


@dataclass
class CompiledModel:
    algebra: GradedAlgebra
    body: GradedAlgebra
    chart: be.Chart | None
    symbols: dict
    theta: GradedPolynomial | None
    theta_decl: ThetaDecl | None
    data: dict
    data_decls: dict


class Compiler:
    def __init__(self, model: ModelFile):
        self.model = model
        self.stmts = model.statements

    def compile(self) -> CompiledModel:
        charts = [s for s in self.stmts if isinstance(s, ChartDecl)]
        if len(charts) > 1:
            raise _err(ModelSyntaxError, "more than one chart statement", charts[1])
        self.chart_decl = charts[0] if charts else None
        self._coords()
        self._symbols()
        chart = self._chart()
        theta_decls = [s for s in self.stmts if isinstance(s, ThetaDecl)]
        if len(theta_decls) > 1:
            raise _err(ModelSyntaxError, "more than one theta statement", theta_decls[1])
        theta_decl = theta_decls[0] if theta_decls else None
        theta = self.expr(theta_decl.expr, self.algebra, {}) if theta_decl else None
        data, data_decls = {}, {}
        for s in self.stmts:
            if isinstance(s, DataDecl):
                if s.kind not in DATA_KINDS:
                    raise _err(ModelSyntaxError, f"unknown data kind {s.kind!r}", s)
                if s.kind in data:
                    raise _err(ModelSyntaxError, f"duplicate data {s.kind}", s)
                data[s.kind] = self._data(s)
                data_decls[s.kind] = s
        return CompiledModel(self.algebra, self.body, chart, self.symbols, theta, theta_decl, data, data_decls)

    # coordinates and chart
    def _coords(self):
        coords, self.families = [], {}
        for s in self.stmts:
            if not isinstance(s, CoordsDecl):
                continue
            if s.name in self.families or s.name in ("hbar", "I", "sum"):
                raise _err(ModelSyntaxError, f"coordinate family {s.name!r} declared twice or reserved", s)
            if s.lo is None:
                idx = [()]
            else:
                if s.lo > s.hi:
                    raise _err(IndexOutOfRange, f"empty index range {s.lo}..{s.hi}", s)
                idx = [(i,) for i in range(s.lo, s.hi + 1)]
            self.families[s.name] = (s, idx)
            coords.extend(GradedCoordinate(s.name, i, s.degree) for i in idx)
        self.algebra = GradedAlgebra(coords)
        self.body = GradedAlgebra([c for c in self.algebra.coordinates if c.degree == 0])

    def _coord_key(self, ref: Ref, env) -> tuple:
        if ref.name not in self.families:
            raise _err(UndeclaredIdentifier, f"undeclared coordinate {ref.name!r}", ref)
        decl, valid = self.families[ref.name]
        idx = tuple(self._index(i, env, ref) for i in ref.indices)
        if idx not in valid:
            raise _err(IndexOutOfRange, f"{ref.name}{list(idx)} outside the declared range", ref)
        return (ref.name, idx)

    def _index(self, i, env, node) -> int:
        if isinstance(i, int):
            return i
        if i not in env:
            raise _err(UndeclaredIdentifier, f"undeclared index variable {i!r}", node)
        return env[i]

    def _chart(self):
        pairs, metric = [], None
        n = self.chart_decl.degree if self.chart_decl else None
        for s in self.stmts:
            if isinstance(s, PairDecl):
                loops = [{}] if s.loop is None else [{s.loop[0]: i} for i in range(s.loop[1], s.loop[2] + 1)]
                for env in loops:
                    a, b = self._coord_key(s.left, env), self._coord_key(s.right, env)
                    da = self.algebra.coordinates[self.algebra.position(a)].degree
                    db = self.algebra.coordinates[self.algebra.position(b)].degree
                    if n is None:
                        raise _err(ModelSyntaxError, "pairs need 'chart degree n'", s)
                    if da + db != n:
                        raise _err(ModelDegreeMismatch, f"pair degrees {da}+{db} != chart degree {n}", s)
                    pairs.append((a, b, s.weight if s.weight is not None else 1))
            elif isinstance(s, MetricDecl):
                if s.name not in self.families:
                    raise _err(UndeclaredIdentifier, f"undeclared coordinate {s.name!r}", s)
                if metric is not None:
                    raise _err(ModelSyntaxError, "more than one metric block", s)
                decl, idx = self.families[s.name]
                if n is None or 2 * decl.degree != n:
                    raise _err(ModelDegreeMismatch, f"metric coordinates must have degree n/2 (n={n})", s)
                metric = ([(s.name, i) for i in idx], s.matrix)
        if n is None:
            return None
        try:
            return be.Chart(self.algebra, n, pairs, metric)
        except DegreeMismatch as exc:
            raise _err(ModelDegreeMismatch, str(exc), self.chart_decl)
        except QPError as exc:
            raise _err(ModelError, str(exc), self.chart_decl)

    # symbols
    def _symbols(self):
        self.symbols = {}
        for s in self.stmts:
            if isinstance(s, SymbolDecl):
                if s.name in self.symbols or s.name in self.families:
                    raise _err(ModelSyntaxError, f"symbol {s.name!r} clashes with an earlier declaration", s)
                if s.arity < 0:
                    raise _err(ModelSyntaxError, "symbol arity must be nonnegative", s)
                self.symbols[s.name] = SymbolInfo(s, Symbol(s.name, s.arity, s.symmetry))
        for s in self.stmts:
            if isinstance(s, BindDecl):
                info = self.symbols.get(s.name)
                if info is None:
                    raise _err(UndeclaredIdentifier, f"undeclared symbol {s.name!r}", s)
                if len(s.indices) != info.symbol.arity:
                    raise _err(IndexOutOfRange, f"{s.name} takes {info.symbol.arity} indices", s)
                if any(i < 1 for i in s.indices):
                    raise _err(IndexOutOfRange, "symbol indices start at 1", s)
                value = self.expr(s.expr, self.body, {}, allow_symbols=False)
                sign, jet = info.symbol.canonical(s.indices)
                if jet is None:
                    if not value.is_zero():
                        raise _err(InvalidDataError, f"{s.name}{list(s.indices)} must vanish by symmetry", s)
                    continue
                value = value.scale(sign)
                if jet.indices in info.bindings and info.bindings[jet.indices] != value:
                    raise _err(InvalidDataError, f"conflicting bindings for {s.name}{list(jet.indices)}", s)
                info.bindings[jet.indices] = value
                info.bind_decls.append(s)

    # expressions
    def expr(self, node, alg: GradedAlgebra, env: dict, allow_symbols: bool = True) -> GradedPolynomial:
        ev = lambda n: self.expr(n, alg, env, allow_symbols)
        if isinstance(node, Num):
            return alg.const(node.value)
        if isinstance(node, Hbar):
            return alg.hbar()
        if isinstance(node, Imag):
            return alg.imag_unit()
        if isinstance(node, Neg):
            return -ev(node.operand)
        if isinstance(node, Div):
            return ev(node.operand).scale(Fraction(1, node.divisor))
        if isinstance(node, BinOp):
            a, b = ev(node.left), ev(node.right)
            return a + b if node.op == "+" else a - b if node.op == "-" else a * b
        if isinstance(node, Sum):
            if node.var in env or node.var in self.families or node.var in self.symbols:
                raise _err(ModelSyntaxError, f"summation index {node.var!r} shadows another name", node)
            lo, hi = self._index(node.lo, env, node), self._index(node.hi, env, node)
            out = alg.zero()
            for i in range(lo, hi + 1):
                out = out + self.expr(node.body, alg, {**env, node.var: i}, allow_symbols)
            return out
        if isinstance(node, Ref):
            return self._ref(node, alg, env, allow_symbols)
        raise TypeError(node)

    def _ref(self, ref: Ref, alg, env, allow_symbols) -> GradedPolynomial:
        if ref.name in self.families:
            if ref.deriv:
                raise _err(ModelSyntaxError, "derivative suffix only applies to symbols", ref)
            key = self._coord_key(ref, env)
            if key not in alg:
                raise _err(ModelDegreeMismatch, f"{ref.name} is not a degree-0 coordinate", ref)
            return alg.var(key)
        info = self.symbols.get(ref.name)
        if info is None:
            raise _err(UndeclaredIdentifier, f"undeclared identifier {ref.name!r}", ref)
        if not allow_symbols:
            raise _err(ModelSyntaxError, "bindings may only use coordinates and numbers", ref)
        if len(ref.indices) != info.symbol.arity:
            raise _err(IndexOutOfRange, f"{ref.name} takes {info.symbol.arity} indices", ref)
        idx = tuple(self._index(i, env, ref) for i in ref.indices)
        if any(i < 1 for i in idx):
            raise _err(IndexOutOfRange, "symbol indices start at 1", ref)
        value = alg.embed(info.component(self.body, *idx))
        for d in ref.deriv:
            k = self._index(d, env, ref)
            if not 1 <= k <= len(self.body.coordinates):
                raise _err(IndexOutOfRange, f"derivative index {k} exceeds the number of degree-0 coordinates", ref)
            value = derive(value, self.body.coordinates[k - 1].key)
        return value

    # structure data
    def _symbol_param(self, decl: DataDecl, key: str, arity: int, required: bool = True):
        name = decl.param(key)
        if name is None:
            if required:
                raise _err(ModelSyntaxError, f"data {decl.kind} needs {key}=<symbol>", decl)
            return None
        info = self.symbols.get(name) if isinstance(name, str) else None
        if info is None:
            raise _err(UndeclaredIdentifier, f"undeclared symbol {name!r}", decl)
        if info.symbol.arity != arity:
            raise _err(IndexOutOfRange, f"{name} must take {arity} indices for {key}", decl)
        return info

    def _check_ranges(self, info: SymbolInfo, sizes):
        for b in info.bind_decls:
            for i, n in zip(b.indices, sizes):
                if not 1 <= i <= n:
                    raise _err(IndexOutOfRange, f"{b.name}{list(b.indices)} is outside 1..{n}", b)

    def _data(self, decl: DataDecl):
        from . import structures as st
        from .forms import AltForm

        body, d = self.body, len(self.body.coordinates)
        comp = lambda info: (lambda *idx: info.component(body, *idx))
        try:
            if decl.kind in ("poisson", "twisted_poisson"):
                pi = self._symbol_param(decl, "pi", 2)
                self._check_ranges(pi, (d, d))
                poisson = st.PoissonData.from_function(body, comp(pi))
                if decl.kind == "poisson":
                    return poisson
                H = self._symbol_param(decl, "H", 3)
                self._check_ranges(H, (d, d, d))
                return st.TwistedPoissonData(poisson, AltForm.from_function(body, d, 3, lambda i: comp(H)(*i)))
            if decl.kind == "lie_algebroid":
                r = decl.param("rank")
                if not isinstance(r, Fraction) or r.denominator != 1 or r < 0:
                    raise _err(ModelSyntaxError, "lie_algebroid needs rank=<integer>", decl)
                r = int(r)
                rho, C = self._symbol_param(decl, "rho", 2), self._symbol_param(decl, "C", 3)
                self._check_ranges(rho, (d, r))
                self._check_ranges(C, (r, r, r))
                data = st.LieAlgebroidData.from_functions(body, r, comp(rho), comp(C))
                return data, self._connection(decl, r)
            # courant / pre_courant
            k = decl.param("k")
            if k is None:
                chart = self._chart()
                if chart is None or chart.metric is None:
                    raise _err(ModelSyntaxError, f"data {decl.kind} needs k=[[..]] or a chart metric", decl)
                k = chart.metric
            r = len(k)
            rho, C = self._symbol_param(decl, "rho", 2), self._symbol_param(decl, "C", 3)
            self._check_ranges(rho, (d, r))
            self._check_ranges(C, (r, r, r))
            cd = st.CourantData.from_functions(body, k, comp(rho), AltForm.from_function(body, r, 3, lambda i: comp(C)(*i)))
            conn = self._connection(decl, r, metric=cd.k)
            if decl.kind == "courant":
                return cd, conn
            H = self._symbol_param(decl, "H", 4)
            self._check_ranges(H, (d, d, d, d))
            return st.PreCourantData(cd, AltForm.from_function(body, d, 4, lambda i: comp(H)(*i))), conn
        except ModelError:
            raise
        except (QPError, ValueError) as exc:
            raise _err(ModelError, f"invalid {decl.kind} data: {exc}", decl)

    def _connection(self, decl: DataDecl, rank: int, metric=None):
        from .algebroid_calculus import ConnectionData

        info = self._symbol_param(decl, "connection", 3, required=False)
        if info is None:
            return None
        d = len(self.body.coordinates)
        self._check_ranges(info, (d, rank, rank))
        conn = ConnectionData.from_functions(self.body, rank, lambda i, a, b: info.component(self.body, i, a, b))
        if metric is not None and not conn.metric_defect(metric):
            conn = ConnectionData(conn.body, conn.rank, conn.omega, conn.gamma, metric)
        return conn


class InvalidDataError(ModelError, InvalidData):
    pass


def parse_model(text: str, compile: bool = True) -> ModelFile:
    """Parse (and by default resolve) a model file."""
    model = Parser(text).parse(text)
    if compile:
        compiled = Compiler(model).compile()
        model = ModelFile(model.statements, text, compiled)
    return model

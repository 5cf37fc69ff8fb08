"""Text format for polynomial maps and vector fields.

Example::

    # the counterexample field
    vars: x, y
    field: i*x, -i*y + x*y^2
    degree: 8

Lines are ``key: value``; ``#`` starts a comment. Expressions support
``+ - * ^`` (non-negative integer exponents), parentheses, real literals,
imaginary literals such as ``2i`` or ``1.5e-3i`` and the bare unit ``i``.
Multiplication is always explicit.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Mapping, Sequence

from .errors import GermflowError
from .jet_core import MapJet

Poly = dict[tuple[int, ...], complex]


class ParseError(GermflowError, ValueError):
    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        self.bare_message = message
        self.line = line
        self.column = column
        where = f"line {line}, column {column}: " if line is not None else ""
        super().__init__(where + message)


class UndeclaredVariable(ParseError):
    pass


class NonzeroConstantTerm(ParseError):
    pass


_TOKEN = re.compile(
    r"""
    (?P<ws>[ \t]+)
  | (?P<num>(?:\d+\.\d*|\.\d+|\d+)(?:[eE][+-]?\d+)?)
  | (?P<name>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<op>[-+*^(),])
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class Token:
    kind: str  # num, imag, name, op, end
    text: str
    col: int


def tokenize(text: str, line: int = 1, col0: int = 1) -> list[Token]:
    out = []
    pos = 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m:
            raise ParseError(f"unexpected character {text[pos]!r}", line, col0 + pos)
        kind = m.lastgroup
        if kind == "num":
            end = m.end()
            # "2i" is an imaginary literal, "2ix" is a number glued to a name
            if end < len(text) and text[end] == "i" and not re.match(r"[A-Za-z0-9_]", text[end + 1: end + 2]):
                out.append(Token("imag", m.group(), col0 + pos))
                pos = end + 1
                continue
        if kind != "ws":
            out.append(Token(kind, m.group(), col0 + pos))
        pos = m.end()
    out.append(Token("end", "", col0 + len(text)))
    return out


def _padd(a: Poly, b: Poly) -> Poly:
    out = dict(a)
    for k, v in b.items():
        out[k] = out.get(k, 0) + v
    return out


def _pmul(a: Poly, b: Poly) -> Poly:
    out: Poly = {}
    for ka, va in a.items():
        for kb, vb in b.items():
            k = tuple(x + y for x, y in zip(ka, kb))
            out[k] = out.get(k, 0) + va * vb
    return out


def _clean(p: Poly) -> Poly:
    return {k: complex(v) for k, v in p.items() if v != 0}


class _ExprParser:
    """LL(1) recursive descent producing expanded polynomials."""

    def __init__(self, tokens: list[Token], variables: Sequence[str], line: int):
        self.toks = tokens
        self.i = 0
        self.vars = {v: k for k, v in enumerate(variables)}
        self.n = len(variables)
        self.line = line

    @property
    def tok(self) -> Token:
        return self.toks[self.i]

    def error(self, msg, tok=None, cls=ParseError):
        tok = tok or self.tok
        return cls(msg, self.line, tok.col)

    def expect(self, text):
        if self.tok.text != text or self.tok.kind != "op":
            raise self.error(f"expected {text!r}, found {self.tok.text or 'end of line'!r}")
        self.i += 1

    def const(self, c: complex) -> Poly:
        return {(0,) * self.n: complex(c)}

    def expr(self) -> Poly:
        acc = self.term()
        while self.tok.kind == "op" and self.tok.text in "+-":
            sign = 1 if self.tok.text == "+" else -1
            self.i += 1
            rhs = self.term()
            acc = _padd(acc, {k: sign * v for k, v in rhs.items()})
        return acc

    def term(self) -> Poly:
        acc = self.unary()
        while self.tok.kind == "op" and self.tok.text == "*":
            self.i += 1
            acc = _pmul(acc, self.unary())
        return acc

    def unary(self) -> Poly:
        if self.tok.kind == "op" and self.tok.text in "+-":
            sign = 1 if self.tok.text == "+" else -1
            self.i += 1
            return {k: sign * v for k, v in self.unary().items()}
        return self.power()

    def power(self) -> Poly:
        base = self.atom()
        if self.tok.kind == "op" and self.tok.text == "^":
            self.i += 1
            if self.tok.kind != "num" or not self.tok.text.isdigit():
                raise self.error("exponent must be a non-negative integer")
            e = int(self.tok.text)
            self.i += 1
            out = self.const(1)
            for _ in range(e):
                out = _pmul(out, base)
            return out
        return base

    def atom(self) -> Poly:
        tok = self.tok
        if tok.kind == "num":
            self.i += 1
            return self.const(float(tok.text))
        if tok.kind == "imag":
            self.i += 1
            return self.const(complex(0, float(tok.text)))
        if tok.kind == "name":
            self.i += 1
            if tok.text == "i":
                return self.const(1j)
            if tok.text not in self.vars:
                raise self.error(f"undeclared variable {tok.text!r}", tok, UndeclaredVariable)
            alpha = [0] * self.n
            alpha[self.vars[tok.text]] = 1
            return {tuple(alpha): 1.0 + 0j}
        if tok.kind == "op" and tok.text == "(":
            self.i += 1
            inner = self.expr()
            self.expect(")")
            return inner
        raise self.error(f"unexpected {tok.text or 'end of line'!r}")

    def expr_list(self) -> list[tuple[Poly, int]]:
        out = []
        while True:
            col = self.tok.col
            out.append((self.expr(), col))
            if self.tok.kind == "op" and self.tok.text == ",":
                self.i += 1
                continue
            break
        if self.tok.kind != "end":
            raise self.error(f"unexpected {self.tok.text!r}; multiplication must be explicit")
        return out


def parse_expression(text: str, variables: Sequence[str], line: int = 1, col0: int = 1) -> Poly:
    p = _ExprParser(tokenize(text, line, col0), variables, line)
    items = p.expr_list()
    if len(items) != 1:
        raise ParseError("expected a single expression", line, col0)
    return _clean(items[0][0])


def parse_complex_list(text: str) -> list[complex]:
    """Comma-separated constant expressions, e.g. ``"0.1, 0.05+0.02i"``."""
    p = _ExprParser(tokenize(text), [], 1)
    return [complex(poly.get((), 0)) for poly, _ in p.expr_list()]


@dataclass(frozen=True)
class SystemSpec:
    variables: tuple[str, ...]
    components: tuple[tuple[tuple[tuple[int, ...], complex], ...], ...]
    kind: str
    degree: int | None = None
    domain_radius: float | None = None

    @property
    def n(self) -> int:
        return len(self.variables)

    @property
    def polynomials(self) -> list[Poly]:
        return [dict(c) for c in self.components]

    @property
    def max_degree(self) -> int:
        return max((sum(a) for c in self.components for a, _ in c), default=0)

    def to_mapjet(self, D: int | None = None) -> MapJet:
        D = D if D is not None else (self.degree if self.degree is not None else 8)
        return MapJet.from_dicts(self.n, D, self.polynomials)


def _freeze(poly: Mapping) -> tuple:
    # graded-lex term order, matching the jet layout
    return tuple(sorted(_clean(dict(poly)).items(), key=lambda kv: (sum(kv[0]), [-e for e in kv[0]])))


def make_system(variables, polys, kind, degree=None, domain_radius=None) -> SystemSpec:
    return SystemSpec(tuple(variables), tuple(_freeze(p) for p in polys), kind, degree, domain_radius)


_NAME = re.compile(r"[A-Za-z_][A-Za-z0-9_]*$")


def parse_system(text: str, require_germ: bool = True) -> SystemSpec:
    """Parse the line-oriented system format.

    Raises :class:`ParseError` (with line and column) on bad syntax,
    :class:`UndeclaredVariable` and :class:`NonzeroConstantTerm`.
    """
    variables = None
    body = None
    meta: dict[str, tuple[str, int, int]] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0]
        if not line.strip():
            continue
        if ":" not in line:
            raise ParseError("expected 'key: value'", lineno, 1)
        key, value = line.split(":", 1)
        key = key.strip().lower()
        vcol = line.index(":") + 2
        if key == "vars":
            if variables is not None:
                raise ParseError("duplicate 'vars' line", lineno, 1)
            names = [v.strip() for v in value.split(",")]
            for name in names:
                if not _NAME.match(name):
                    raise ParseError(f"bad variable name {name!r}", lineno, vcol)
                if name == "i":
                    raise ParseError("'i' is the imaginary unit, not a variable", lineno, vcol)
            if len(set(names)) != len(names):
                raise ParseError("duplicate variable names", lineno, vcol)
            variables = names
        elif key in ("map", "field"):
            if body is not None:
                raise ParseError("only one 'map' or 'field' line is allowed", lineno, 1)
            body = (key, value, lineno, vcol)
        elif key in ("degree", "radius"):
            meta[key] = (value.strip(), lineno, vcol)
        else:
            raise ParseError(f"unknown key {key!r}", lineno, 1)

    if variables is None:
        raise ParseError("missing 'vars:' line")
    if body is None:
        raise ParseError("missing 'map:' or 'field:' line")
    kind, value, lineno, vcol = body
    parser = _ExprParser(tokenize(value, lineno, vcol), variables, lineno)
    items = parser.expr_list()
    if len(items) != len(variables):
        raise ParseError(
            f"{len(variables)} variables but {len(items)} components", lineno, vcol
        )
    polys = []
    zero = (0,) * len(variables)
    for poly, col in items:
        poly = _clean(poly)
        if require_germ and poly.get(zero, 0) != 0:
            raise NonzeroConstantTerm(
                f"component has constant term {poly[zero]}; a {kind} must vanish at the origin",
                lineno, col,
            )
        polys.append(poly)

    degree = radius = None
    if "degree" in meta:
        text_, ln, col = meta["degree"]
        if not text_.isdigit():
            raise ParseError("degree must be a non-negative integer", ln, col)
        degree = int(text_)
    if "radius" in meta:
        text_, ln, col = meta["radius"]
        try:
            radius = float(text_)
        except ValueError:
            raise ParseError("radius must be a number", ln, col) from None
        if not radius > 0:
            raise ParseError("radius must be positive", ln, col)
    return make_system(variables, polys, kind, degree, radius)


def format_complex(c: complex) -> str:
    sign = "-" if math.copysign(1.0, c.imag) < 0 else "+"
    return f"({c.real!r}{sign}{abs(c.imag)!r}i)"


def format_polynomial(terms, variables: Sequence[str]) -> str:
    parts = []
    for alpha, c in terms:
        factors = [format_complex(c)]
        for name, e in zip(variables, alpha):
            if e == 1:
                factors.append(name)
            elif e > 1:
                factors.append(f"{name}^{e}")
        parts.append("*".join(factors))
    return " + ".join(parts) if parts else "0"


def serialize_system(spec: SystemSpec) -> str:
    lines = [
        "vars: " + ", ".join(spec.variables),
        f"{spec.kind}: " + ", ".join(format_polynomial(c, spec.variables) for c in spec.components),
    ]
    if spec.degree is not None:
        lines.append(f"degree: {spec.degree}")
    if spec.domain_radius is not None:
        lines.append(f"radius: {spec.domain_radius!r}")
    return "\n".join(lines) + "\n"

"""Tiny expression language for componentwise self-maps.

A map is written as a tuple of coordinate expressions, one per output
coordinate, over the input variables z1, z2, ...  Supported pieces:

    mobius(a)(t)        (t + a) / (1 + conj(a) * t),  |a| < 1
    conj(t)             complex conjugate
    scale(s, c)(t)      s * t + (1 - s) * c
    complex literals    e.g.  0.5,  0+1i,  0.25-0.75i
    binary + - * /      usual precedence, left associative

There is no unary minus; negative constants are spelled as differences
("0-0.5").  Whitespace carries no meaning.  A parsed map is validated by
sampling: every sampled interior point must land strictly inside the
domain.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .geometry import BOUNDARY_TOL, DomainSpec, GeometryError, gauge, sample_interior

__all__ = [
    "ParseError",
    "SelfMapError",
    "SelfMapExpr",
    "parse_map",
    "evaluate",
    "compose",
    "validate_self_map",
]

VALIDATION_SAMPLES = 1000
VALIDATION_SEED = 911405
_VALIDATION_GAUGE_CAP = 0.995


class ParseError(ValueError):
    """Syntax or arity problem in a map expression; carries the offset."""

    def __init__(self, message: str, position: int):
        super().__init__(f"{message} (at offset {position})")
        self.position = position


class SelfMapError(ValueError):
    """The expression does not describe a self-map of the domain."""


# ---------------------------------------------------------------------------
# syntax tree


@dataclass(frozen=True)
class Const:
    value: complex


@dataclass(frozen=True)
class Var:
    index: int  # zero-based coordinate


@dataclass(frozen=True)
class BinOp:
    op: str
    left: object
    right: object


@dataclass(frozen=True)
class Mobius:
    param: complex
    arg: object


@dataclass(frozen=True)
class Conj:
    arg: object


@dataclass(frozen=True)
class Scale:
    factor: float
    anchor: complex
    arg: object


# ---------------------------------------------------------------------------
# lexer


_SYMBOLS = set("(),+-*/")


@dataclass(frozen=True)
class _Token:
    kind: str  # "num" | "name" | one of the symbols | "end"
    text: str
    value: float
    pos: int


def _tokenize(text: str) -> list[_Token]:
    toks = []
    i, n = 0, len(text)
    while i < n:
        ch = text[i]
        if ch.isspace():
            i += 1
            continue
        if ch in _SYMBOLS:
            toks.append(_Token(ch, ch, 0.0, i))
            i += 1
            continue
        if ch.isdigit():
            j = i + 1
            while j < n and text[j].isdigit():
                j += 1
            if j < n and text[j] == ".":
                j += 1
                while j < n and text[j].isdigit():
                    j += 1
            if j < n and text[j] in "eE":
                k = j + 1
                if k < n and text[k] in "+-":
                    k += 1
                if k < n and text[k].isdigit():
                    j = k + 1
                    while j < n and text[j].isdigit():
                        j += 1
            lit = text[i:j]
            toks.append(_Token("num", lit, float(lit), i))
            i = j
            continue
        if ch.isalpha() and ch.islower():
            j = i + 1
            while j < n and text[j].isalpha() and text[j].islower():
                j += 1
            while j < n and text[j].isdigit():
                j += 1
            toks.append(_Token("name", text[i:j], 0.0, i))
            i = j
            continue
        raise ParseError(f"unexpected character {ch!r}", i)
    toks.append(_Token("end", "", 0.0, n))
    return toks


# ---------------------------------------------------------------------------
# parser


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.toks = _tokenize(text)
        self.pos = 0

    def peek(self, ahead: int = 0) -> _Token:
        return self.toks[min(self.pos + ahead, len(self.toks) - 1)]

    def take(self, kind: str | None = None) -> _Token:
        tok = self.toks[self.pos]
        if kind is not None and tok.kind != kind:
            raise ParseError(f"expected {kind!r}, found {tok.text or 'end of input'!r}", tok.pos)
        self.pos += 1
        return tok

    # expr := tuple | term
    def parse_parts(self) -> list:
        if self.peek().kind == "(":
            mark = self.pos
            try:
                return self._parse_tuple()
            except ParseError as err:
                tuple_err = err
                self.pos = mark
            try:
                return [self._parse_to_end()]
            except ParseError as err:
                raise err if err.position >= tuple_err.position else tuple_err
        return [self._parse_to_end()]

    def _parse_to_end(self):
        node = self.parse_term()
        tok = self.take()
        if tok.kind != "end":
            raise ParseError(f"trailing input {tok.text!r}", tok.pos)
        return node

    def _parse_tuple(self) -> list:
        self.take("(")
        parts = [self.parse_term()]
        while self.peek().kind == ",":
            self.take(",")
            parts.append(self.parse_term())
        self.take(")")
        self.take("end")
        return parts

    def parse_term(self):
        node = self.parse_product()
        while self.peek().kind in ("+", "-"):
            op = self.take().kind
            node = BinOp(op, node, self.parse_product())
        return node

    def parse_product(self):
        node = self.parse_atom()
        while self.peek().kind in ("*", "/"):
            op = self.take().kind
            node = BinOp(op, node, self.parse_atom())
        return node

    def parse_atom(self):
        tok = self.peek()
        if tok.kind == "(":
            self.take("(")
            node = self.parse_term()
            if self.peek().kind == ",":
                raise ParseError("tuple not allowed inside a coordinate expression",
                                 self.peek().pos)
            self.take(")")
            return node
        if tok.kind == "num":
            return Const(self._finish_complex())
        if tok.kind == "name":
            if tok.text == "mobius":
                return self._parse_mobius()
            if tok.text == "conj":
                self.take("name")
                self.take("(")
                node = self.parse_term()
                self.take(")")
                return Conj(node)
            if tok.text == "scale":
                return self._parse_scale()
            if tok.text.startswith("z") and tok.text[1:].isdigit():
                self.take("name")
                idx = int(tok.text[1:])
                if idx < 1:
                    raise ParseError("coordinate variables start at z1", tok.pos)
                return Var(idx - 1)
            raise ParseError(f"unknown name {tok.text!r}", tok.pos)
        raise ParseError(f"expected an operand, found {tok.text or 'end of input'!r}", tok.pos)

    def _finish_complex(self) -> complex:
        """A number, optionally continued as 'num (+|-) num i'."""
        first = self.take("num")
        sign_tok = self.peek()
        if (sign_tok.kind in ("+", "-") and self.peek(1).kind == "num"
                and self.peek(2).kind == "name" and self.peek(2).text == "i"):
            self.take(sign_tok.kind)
            imag = self.take("num")
            self.take("name")
            s = 1.0 if sign_tok.kind == "+" else -1.0
            return complex(first.value, s * imag.value)
        return complex(first.value, 0.0)

    def _parse_complex_literal(self) -> complex:
        tok = self.peek()
        if tok.kind != "num":
            raise ParseError("expected a complex literal", tok.pos)
        first = self.take("num")
        if self.peek().kind in ("+", "-"):
            sign = self.take().kind
            imag = self.take("num")
            itok = self.take("name")
            if itok.text != "i":
                raise ParseError("complex literal must end in 'i'", itok.pos)
            s = 1.0 if sign == "+" else -1.0
            return complex(first.value, s * imag.value)
        return complex(first.value, 0.0)

    def _parse_mobius(self):
        tok = self.take("name")
        self.take("(")
        a = self._parse_complex_literal()
        self.take(")")
        if abs(a) >= 1.0:
            raise ParseError("mobius parameter must satisfy |a| < 1", tok.pos)
        self.take("(")
        node = self.parse_term()
        self.take(")")
        return Mobius(a, node)

    def _parse_scale(self):
        tok = self.take("name")
        self.take("(")
        stok = self.take("num")
        s = stok.value
        if not 0.0 < s <= 1.0:
            raise ParseError("scale factor must lie in (0, 1]", stok.pos)
        self.take(",")
        anchor = self._parse_complex_literal()
        self.take(")")
        if abs(anchor) >= 1.0:
            raise ParseError("scale anchor must be interior", tok.pos)
        self.take("(")
        node = self.parse_term()
        self.take(")")
        return Scale(s, anchor, node)


# ---------------------------------------------------------------------------
# evaluation


def _eval_node(node, z: np.ndarray):
    if isinstance(node, Const):
        return node.value
    if isinstance(node, Var):
        if node.index >= z.shape[1]:
            raise GeometryError(f"variable z{node.index + 1} exceeds the domain dimension")
        return z[:, node.index]
    if isinstance(node, BinOp):
        a = _eval_node(node.left, z)
        b = _eval_node(node.right, z)
        if node.op == "+":
            return a + b
        if node.op == "-":
            return a - b
        if node.op == "*":
            return a * b
        with np.errstate(divide="ignore", invalid="ignore"):
            return a / b
    if isinstance(node, Mobius):
        t = _eval_node(node.arg, z)
        return (t + node.param) / (1.0 + np.conj(node.param) * t)
    if isinstance(node, Conj):
        return np.conj(_eval_node(node.arg, z))
    if isinstance(node, Scale):
        t = _eval_node(node.arg, z)
        return node.factor * t + (1.0 - node.factor) * node.anchor
    raise TypeError(f"unknown node {node!r}")


def _max_var(node) -> int:
    if isinstance(node, Var):
        return node.index + 1
    if isinstance(node, BinOp):
        return max(_max_var(node.left), _max_var(node.right))
    if isinstance(node, (Mobius, Conj, Scale)):
        return _max_var(node.arg)
    return 0


# ---------------------------------------------------------------------------
# rendering (used by compose; round-trips whenever every literal is
# expressible in the grammar, i.e. has nonnegative real part)


def _real_lit(v: float) -> str:
    return repr(float(v))


def _complex_lit(c: complex) -> str:
    if c.imag == 0.0:
        return _real_lit(c.real)
    sign = "+" if c.imag >= 0 else "-"
    return f"{_real_lit(c.real)}{sign}{_real_lit(abs(c.imag))}i"


def _const_text(c: complex) -> str:
    if c.real >= 0:
        return _complex_lit(c)
    flipped = _complex_lit(-c)
    return f"(0-{flipped})" if c.imag == 0.0 else f"(0-({flipped}))"


_PREC = {"+": 1, "-": 1, "*": 2, "/": 2}


def _render(node, prec: int = 0) -> str:
    if isinstance(node, Const):
        return _const_text(node.value)
    if isinstance(node, Var):
        return f"z{node.index + 1}"
    if isinstance(node, BinOp):
        mine = _PREC[node.op]
        left = _render(node.left, mine)
        right = _render(node.right, mine + 1)
        text = f"{left}{node.op}{right}"
        return f"({text})" if mine < prec else text
    if isinstance(node, Mobius):
        return f"mobius({_complex_lit(node.param)})({_render(node.arg)})"
    if isinstance(node, Conj):
        return f"conj({_render(node.arg)})"
    if isinstance(node, Scale):
        return f"scale({_real_lit(node.factor)}, {_complex_lit(node.anchor)})({_render(node.arg)})"
    raise TypeError(f"unknown node {node!r}")


# ---------------------------------------------------------------------------
# public surface


@dataclass(frozen=True)
class SelfMapExpr:
    """A validated componentwise self-map of a supported domain."""

    domain: DomainSpec
    parts: tuple
    source: str

    def __call__(self, z):
        return evaluate(self, z)


def parse_map(text: str, d: DomainSpec, validate: bool = True,
              samples: int = VALIDATION_SAMPLES) -> SelfMapExpr:
    """Parse a map expression for domain d and check it maps D into D.

    Raises ParseError on syntax or arity problems, SelfMapError when a
    sampled interior point leaves the domain.
    """
    parts = _Parser(text).parse_parts()
    if len(parts) != d.dim:
        raise ParseError(f"map has {len(parts)} coordinate(s), domain needs {d.dim}", 0)
    used = max(_max_var(p) for p in parts)
    if used > d.dim:
        raise ParseError(f"variable z{used} exceeds the domain dimension {d.dim}", 0)
    m = SelfMapExpr(d, tuple(parts), text)
    if validate:
        validate_self_map(m, samples=samples)
    return m


def evaluate(m: SelfMapExpr, z) -> np.ndarray:
    """Apply the map to one point of shape (dim,) or a batch (N, dim)."""
    arr = np.asarray(z, dtype=complex)
    single = arr.ndim == 1
    if single:
        arr = arr[None, :]
    if arr.ndim != 2 or arr.shape[1] != m.domain.dim:
        raise GeometryError("point batch shape does not match the map domain")
    cols = []
    for part in m.parts:
        val = np.asarray(_eval_node(part, arr), dtype=complex)
        cols.append(np.broadcast_to(val, (arr.shape[0],)))
    out = np.stack(cols, axis=-1)
    return out[0] if single else out


def compose(outer: SelfMapExpr, inner: SelfMapExpr) -> SelfMapExpr:
    """outer after inner, as a new expression (variables substituted)."""
    if outer.domain != inner.domain:
        raise GeometryError("composition needs matching domains")

    def subst(node):
        if isinstance(node, Var):
            return inner.parts[node.index]
        if isinstance(node, BinOp):
            return BinOp(node.op, subst(node.left), subst(node.right))
        if isinstance(node, Mobius):
            return Mobius(node.param, subst(node.arg))
        if isinstance(node, Conj):
            return Conj(subst(node.arg))
        if isinstance(node, Scale):
            return Scale(node.factor, node.anchor, subst(node.arg))
        return node

    parts = tuple(subst(p) for p in outer.parts)
    rendered = [_render(p) for p in parts]
    source = f"({', '.join(rendered)})" if len(parts) > 1 else rendered[0]
    return SelfMapExpr(outer.domain, parts, source)


def validate_self_map(m: SelfMapExpr, samples: int = VALIDATION_SAMPLES,
                      rng: np.random.Generator | None = None) -> None:
    """Sample interior points; every image must stay strictly interior."""
    if rng is None:
        rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(VALIDATION_SEED)))
    pts = sample_interior(m.domain, rng, samples, max_gauge=_VALIDATION_GAUGE_CAP)
    img = evaluate(m, pts)
    if not np.all(np.isfinite(img)):
        bad = int(np.argmax(~np.all(np.isfinite(img), axis=1)))
        raise SelfMapError(f"map produced a non-finite value at sample {bad}: {pts[bad]}")
    g = np.asarray(gauge(m.domain, img))
    worst = int(np.argmax(g))
    if g[worst] >= 1.0 - BOUNDARY_TOL:
        raise SelfMapError(
            "not a self-map: sample "
            f"{np.array2string(pts[worst], precision=4)} maps to gauge {g[worst]:.6f}")

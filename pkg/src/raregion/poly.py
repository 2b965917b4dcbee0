"""Sparse multivariate polynomials with exact rational coefficients.

Variables are written ``x1 ... xn`` (1-based).  Coordinate index sets
(``VarSet``) are sorted tuples of 1-based indices.

Text grammar accepted by :func:`parse`::

    expr    := term (("+" | "-") term)*
    term    := factor (("*" | "/") factor)*
    factor  := ("+" | "-") factor | power
    power   := atom (("^" | "**") integer)?
    atom    := number | variable | "(" expr ")"
    number  := digits ("." digits)?          # at most 12 fractional digits
    variable:= "x" digits                    # 1 <= index <= nvars

Division is only allowed by a nonzero constant, so ``3/4*x1`` is a rational
coefficient times a variable.  Decimals are converted exactly.
"""
from __future__ import annotations

import re
from fractions import Fraction
from functools import cached_property
from typing import Iterable, Mapping, Sequence

import numpy as np

VarSet = tuple[int, ...]
Monomial = tuple[int, ...]


class ParseError(ValueError):
    """Syntax error in polynomial text; ``pos`` is the 0-based offset."""

    def __init__(self, message: str, pos: int, text: str = ""):
        self.pos = pos
        self.text = text
        super().__init__(f"{message} at position {pos}")


def varset(indices: Iterable[int]) -> VarSet:
    return tuple(sorted(set(int(i) for i in indices)))


def _to_fraction(c) -> Fraction:
    if isinstance(c, Fraction):
        return c
    if isinstance(c, (int, np.integer)):
        return Fraction(int(c))
    if isinstance(c, (float, np.floating)):
        return Fraction(float(c))
    if isinstance(c, str):
        return Fraction(c)
    raise TypeError(f"cannot use {type(c).__name__} as a coefficient")


class Polynomial:
    """Immutable polynomial in ``nvars`` variables.

    ``terms`` maps exponent tuples to nonzero :class:`Fraction` coefficients.
    Equality and hashing are on the canonical term map.
    """

    __slots__ = ("nvars", "_terms", "_key", "__dict__")

    def __init__(self, nvars: int, terms: Mapping[Sequence[int], object] | None = None):
        if nvars < 1:
            raise ValueError("nvars must be positive")
        acc: dict[Monomial, Fraction] = {}
        for exps, c in (terms or {}).items():
            exps = tuple(int(e) for e in exps)
            if len(exps) != nvars:
                raise ValueError(f"exponent vector {exps} has length != {nvars}")
            if any(e < 0 for e in exps):
                raise ValueError(f"negative exponent in {exps}")
            acc[exps] = acc.get(exps, Fraction(0)) + _to_fraction(c)
        self.nvars = nvars
        self._terms = {m: c for m, c in acc.items() if c != 0}
        self._key = frozenset(self._terms.items())

    # construction helpers
    @classmethod
    def constant(cls, nvars: int, c=1) -> "Polynomial":
        return cls(nvars, {(0,) * nvars: c})

    @classmethod
    def variable(cls, nvars: int, i: int) -> "Polynomial":
        if not 1 <= i <= nvars:
            raise ValueError(f"variable index x{i} out of range 1..{nvars}")
        e = [0] * nvars
        e[i - 1] = 1
        return cls(nvars, {tuple(e): 1})

    @property
    def terms(self) -> Mapping[Monomial, Fraction]:
        return dict(self._terms)

    def is_zero(self) -> bool:
        return not self._terms

    def is_constant(self) -> bool:
        return all(not any(m) for m in self._terms)

    @property
    def degree(self) -> int:
        return max((sum(m) for m in self._terms), default=0)

    def __eq__(self, other):
        if isinstance(other, Polynomial):
            return self.nvars == other.nvars and self._key == other._key
        if isinstance(other, (int, Fraction)):
            return self == Polynomial.constant(self.nvars, other)
        return NotImplemented

    def __hash__(self):
        return hash((self.nvars, self._key))

    def _coerce(self, other) -> "Polynomial":
        if isinstance(other, Polynomial):
            if other.nvars != self.nvars:
                raise ValueError(f"nvars mismatch: {self.nvars} vs {other.nvars}")
            return other
        return Polynomial.constant(self.nvars, _to_fraction(other))

    def __add__(self, other):
        other = self._coerce(other)
        out = dict(self._terms)
        for m, c in other._terms.items():
            out[m] = out.get(m, Fraction(0)) + c
        return Polynomial(self.nvars, out)

    __radd__ = __add__

    def __neg__(self):
        return Polynomial(self.nvars, {m: -c for m, c in self._terms.items()})

    def __sub__(self, other):
        return self + (-self._coerce(other))

    def __rsub__(self, other):
        return self._coerce(other) - self

    def __mul__(self, other):
        other = self._coerce(other)
        out: dict[Monomial, Fraction] = {}
        for m1, c1 in self._terms.items():
            for m2, c2 in other._terms.items():
                m = tuple(a + b for a, b in zip(m1, m2))
                out[m] = out.get(m, Fraction(0)) + c1 * c2
        return Polynomial(self.nvars, out)

    __rmul__ = __mul__

    def __pow__(self, k: int):
        if not isinstance(k, int) or k < 0:
            raise ValueError("exponent must be a nonnegative integer")
        result = Polynomial.constant(self.nvars, 1)
        base = self
        while k:
            if k & 1:
                result = result * base
            base = base * base
            k >>= 1
        return result

    def derivative(self, i: int) -> "Polynomial":
        """Partial derivative with respect to ``x_i`` (1-based)."""
        k = i - 1
        out = {}
        for m, c in self._terms.items():
            if m[k]:
                e = list(m)
                e[k] -= 1
                out[tuple(e)] = c * m[k]
        return Polynomial(self.nvars, out)

    def __call__(self, point):
        return evaluate(self, point)

    def __repr__(self):
        return f"Polynomial({self.nvars}, {str(self)!r})"

    def __str__(self):
        return to_text(self)

    # numeric evaluation -------------------------------------------------
    @cached_property
    def numeric(self) -> "CompiledPolynomial":
        return CompiledPolynomial(self)

    @cached_property
    def grad(self) -> tuple["Polynomial", ...]:
        return tuple(self.derivative(i) for i in range(1, self.nvars + 1))

    @cached_property
    def hessian(self) -> tuple[tuple["Polynomial", ...], ...]:
        return tuple(g.grad for g in self.grad)


class CompiledPolynomial:
    """Float evaluator for a :class:`Polynomial` over batches of points."""

    def __init__(self, p: Polynomial):
        self.nvars = p.nvars
        items = sorted(p._terms.items())
        self.exps = np.array([m for m, _ in items], dtype=int).reshape(len(items), p.nvars)
        self.coeffs = np.array([float(c) for _, c in items], dtype=float)

    def __call__(self, X: np.ndarray) -> np.ndarray:
        """Evaluate at rows of ``X`` (shape ``(..., nvars)``)."""
        X = np.asarray(X, dtype=float)
        out = np.zeros(X.shape[:-1])
        cache: dict[tuple[int, int], np.ndarray] = {}
        for e, c in zip(self.exps, self.coeffs):
            t = np.full(X.shape[:-1], c)
            for i in np.nonzero(e)[0]:
                key = (int(i), int(e[i]))
                if key not in cache:
                    cache[key] = X[..., i] ** e[i]
                t = t * cache[key]
            out = out + t
        return out

    def on_grid(self, axes: Sequence[np.ndarray]) -> np.ndarray:
        """Evaluate on the tensor grid spanned by ``axes`` via broadcasting."""
        n = len(axes)
        shape = tuple(len(a) for a in axes)
        shaped = []
        for i, a in enumerate(axes):
            s = [1] * n
            s[i] = len(a)
            shaped.append(np.asarray(a, dtype=float).reshape(s))
        out = np.zeros(shape)
        for e, c in zip(self.exps, self.coeffs):
            t = c
            for i in np.nonzero(e)[0]:
                t = t * shaped[i] ** e[i]
            out = out + t
        return out


# ---------------------------------------------------------------------------
# operations


def evaluate(p: Polynomial, point) -> float:
    """Exact rational accumulation, rounded to float once at the end."""
    point = list(point)
    if len(point) != p.nvars:
        raise ValueError(f"point has length {len(point)}, expected {p.nvars}")
    xs = [_to_fraction(v) for v in point]
    total = Fraction(0)
    for m, c in p._terms.items():
        t = c
        for x, e in zip(xs, m):
            if e:
                t *= x**e
        total += t
    return float(total)


def evaluate_exact(p: Polynomial, point) -> Fraction:
    xs = [_to_fraction(v) for v in point]
    if len(xs) != p.nvars:
        raise ValueError(f"point has length {len(xs)}, expected {p.nvars}")
    total = Fraction(0)
    for m, c in p._terms.items():
        t = c
        for x, e in zip(xs, m):
            if e:
                t *= x**e
        total += t
    return total


def gradient(p: Polynomial) -> tuple[Polynomial, ...]:
    return p.grad


def support(p: Polynomial) -> VarSet:
    used = set()
    for m in p._terms:
        used.update(i + 1 for i, e in enumerate(m) if e)
    return varset(used)


def relabel(p: Polynomial, A: Iterable[int]) -> Polynomial:
    """Rewrite ``p`` in ``|A|`` variables via the order-preserving map A -> 1..|A|."""
    A = varset(A)
    if not A:
        raise ValueError("relabel needs a nonempty index set")
    missing = set(support(p)) - set(A)
    if missing:
        raise ValueError(f"support of polynomial uses x{sorted(missing)} outside {list(A)}")
    cols = [a - 1 for a in A]
    return Polynomial(len(A), {tuple(m[c] for c in cols): c_ for m, c_ in p._terms.items()})


def embed(p: Polynomial, nvars: int, positions: Sequence[int]) -> Polynomial:
    """Inverse of :func:`relabel`: variable ``k`` of ``p`` becomes ``x_{positions[k]}``."""
    if len(positions) != p.nvars:
        raise ValueError("positions must list one target index per variable")
    out = {}
    for m, c in p._terms.items():
        e = [0] * nvars
        for k, pos in enumerate(positions):
            e[pos - 1] += m[k]
        out[tuple(e)] = c
    return Polynomial(nvars, out)


def _fmt_coeff(c: Fraction) -> str:
    return str(c.numerator) if c.denominator == 1 else f"{c.numerator}/{c.denominator}"


def _fmt_monomial(m: Monomial) -> str:
    parts = []
    for i, e in enumerate(m):
        if e == 1:
            parts.append(f"x{i + 1}")
        elif e > 1:
            parts.append(f"x{i + 1}^{e}")
    return "*".join(parts)


def to_text(p: Polynomial) -> str:
    """Canonical text, reparseable by :func:`parse`."""
    if p.is_zero():
        return "0"
    order = sorted(p._terms, key=lambda m: (-sum(m), tuple(-e for e in m)))
    out = []
    for k, m in enumerate(order):
        c = p._terms[m]
        sign = "-" if c < 0 else "+"
        a = abs(c)
        mono = _fmt_monomial(m)
        if not mono:
            body = _fmt_coeff(a)
        elif a == 1:
            body = mono
        else:
            body = f"{_fmt_coeff(a)}*{mono}"
        if k == 0:
            out.append(body if sign == "+" else f"-{body}")
        else:
            out.append(f" {sign} {body}")
    return "".join(out)


# ---------------------------------------------------------------------------
# parser

_TOKEN = re.compile(
    r"\s*(?:(?P<num>\d+(?:\.\d*)?|\.\d+)|(?P<var>x\d+)|(?P<op>\*\*|[-+*/^()]))"
)


def _tokenize(text: str):
    pos = 0
    toks = []
    while pos < len(text):
        if text[pos:].strip() == "":
            break
        m = _TOKEN.match(text, pos)
        if not m:
            start = pos + len(text[pos:]) - len(text[pos:].lstrip())
            raise ParseError(f"unexpected character {text[start]!r}", start, text)
        kind = m.lastgroup
        start = m.start(kind)
        toks.append((kind, m.group(kind), start))
        pos = m.end()
    toks.append(("end", "", len(text)))
    return toks


class _Parser:
    def __init__(self, text: str, nvars: int):
        self.text = text
        self.nvars = nvars
        self.toks = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.toks[self.i]

    def take(self):
        t = self.toks[self.i]
        self.i += 1
        return t

    def error(self, msg, tok=None):
        tok = tok or self.peek()
        return ParseError(msg, tok[2], self.text)

    def parse(self) -> Polynomial:
        if self.peek()[0] == "end":
            raise self.error("empty expression")
        p = self.expr()
        if self.peek()[0] != "end":
            raise self.error(f"unexpected token {self.peek()[1]!r}")
        return p

    def expr(self):
        p = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.take()[1]
            q = self.term()
            p = p + q if op == "+" else p - q
        return p

    def term(self):
        p = self.factor()
        while self.peek()[0] == "op" and self.peek()[1] in ("*", "/"):
            tok = self.take()
            q = self.factor()
            if tok[1] == "*":
                p = p * q
            else:
                if not q.is_constant() or q.is_zero():
                    raise self.error("division only by a nonzero constant", tok)
                c = q.terms[(0,) * self.nvars]
                p = p * Polynomial.constant(self.nvars, 1 / c)
        return p

    def factor(self):
        t = self.peek()
        if t[0] == "op" and t[1] in ("+", "-"):
            self.take()
            p = self.factor()
            return -p if t[1] == "-" else p
        return self.power()

    def power(self):
        base = self.atom()
        t = self.peek()
        if t[0] == "op" and t[1] in ("^", "**"):
            self.take()
            e = self.take()
            if e[0] != "num" or not e[1].isdigit():
                raise self.error("exponent must be a nonnegative integer", e)
            return base ** int(e[1])
        return base

    def atom(self):
        t = self.take()
        kind, val, pos = t
        if kind == "num":
            if "." in val:
                frac = val.split(".", 1)[1]
                if len(frac) > 12:
                    raise ParseError("decimal with more than 12 fractional digits", pos, self.text)
            return Polynomial.constant(self.nvars, Fraction(val))
        if kind == "var":
            k = int(val[1:])
            if not 1 <= k <= self.nvars:
                raise ParseError(f"variable {val} out of range 1..{self.nvars}", pos, self.text)
            return Polynomial.variable(self.nvars, k)
        if kind == "op" and val == "(":
            p = self.expr()
            close = self.take()
            if close[1] != ")":
                raise ParseError("expected ')'", close[2], self.text)
            return p
        if kind == "end":
            raise ParseError("unexpected end of input", pos, self.text)
        raise ParseError(f"unexpected token {val!r}", pos, self.text)


def parse(text: str, nvars: int) -> Polynomial:
    """Parse ``text`` into a canonical :class:`Polynomial` in ``nvars`` variables."""
    if nvars < 1:
        raise ValueError("nvars must be positive")
    return _Parser(text, nvars).parse()

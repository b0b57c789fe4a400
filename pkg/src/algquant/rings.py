"""Exact coefficient rings: sparse rational polynomials on a chart, a small
expression parser, truncated formal power series, and Laurent polynomials in
the fiber variable eta.

All values are immutable after construction and all operations are pure, so
everything in this module is safe to share across threads.

Canonical printing uses explicit ``*`` and ``^`` and orders terms by graded
lexicographic degree (highest first), so printed forms are stable enough for
golden-file tests and round-trip through :func:`parse_poly`.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from fractions import Fraction

_IDENT_RE = re.compile(r"[A-Za-z][A-Za-z0-9_]*\Z")


class ParseError(ValueError):
    """Syntax or name error in an input expression, with a position."""

    def __init__(self, message, position):
        super().__init__(f"{message} (at position {position})")
        self.message = message
        self.position = position


@dataclass(frozen=True)
class Chart:
    """A coordinate chart: an ordered tuple of distinct coordinate names.

    A zero-dimensional chart (no coordinates) is allowed; polynomials over it
    are plain rational constants.  That case carries the structure constants
    of a Lie algebra sitting over a single point.
    """

    coords: tuple

    def __post_init__(self):
        coords = tuple(self.coords)
        object.__setattr__(self, "coords", coords)
        for name in coords:
            if not _IDENT_RE.match(name):
                raise ValueError(f"invalid coordinate name {name!r}")
        if len(set(coords)) != len(coords):
            raise ValueError("coordinate names must be distinct")

    @property
    def dim(self):
        return len(self.coords)

    def axis(self, name):
        try:
            return self.coords.index(name)
        except ValueError:
            raise KeyError(f"unknown coordinate {name!r}") from None


def _as_coeff(x):
    if isinstance(x, Fraction):
        return x
    if isinstance(x, int):
        return Fraction(x)
    raise TypeError(f"expected an exact rational coefficient, got {type(x).__name__}")


class PolyFn:
    """Sparse multivariate polynomial with exact rational coefficients.

    Terms map exponent tuples (length = chart dimension) to nonzero
    ``Fraction`` coefficients.
    """

    __slots__ = ("chart", "terms")

    def __init__(self, chart, terms):
        self.chart = chart
        clean = {}
        for exp, c in terms.items():
            c = _as_coeff(c)
            if c == 0:
                continue
            exp = tuple(exp)
            if len(exp) != chart.dim or any(e < 0 or not isinstance(e, int) for e in exp):
                raise ValueError(f"bad exponent {exp} for chart of dimension {chart.dim}")
            clean[exp] = c
        self.terms = clean

    # -- constructors -------------------------------------------------------

    @classmethod
    def zero(cls, chart):
        return cls(chart, {})

    @classmethod
    def const(cls, chart, value):
        return cls(chart, {(0,) * chart.dim: _as_coeff(value)})

    @classmethod
    def coord(cls, chart, axis):
        if isinstance(axis, str):
            axis = chart.axis(axis)
        exp = [0] * chart.dim
        exp[axis] = 1
        return cls(chart, {tuple(exp): Fraction(1)})

    # -- ring structure -----------------------------------------------------

    def _check(self, other):
        if self.chart != other.chart:
            raise ValueError("polynomials live on different charts")

    def __add__(self, other):
        if isinstance(other, (int, Fraction)):
            other = PolyFn.const(self.chart, other)
        if not isinstance(other, PolyFn):
            return NotImplemented
        self._check(other)
        terms = dict(self.terms)
        for exp, c in other.terms.items():
            s = terms.get(exp, Fraction(0)) + c
            if s == 0:
                terms.pop(exp, None)
            else:
                terms[exp] = s
        return PolyFn(self.chart, terms)

    __radd__ = __add__

    def __neg__(self):
        return PolyFn(self.chart, {e: -c for e, c in self.terms.items()})

    def __sub__(self, other):
        if isinstance(other, (int, Fraction)):
            other = PolyFn.const(self.chart, other)
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, (int, Fraction)):
            c = _as_coeff(other)
            if c == 0:
                return PolyFn.zero(self.chart)
            return PolyFn(self.chart, {e: c * v for e, v in self.terms.items()})
        if not isinstance(other, PolyFn):
            return NotImplemented
        self._check(other)
        out = {}
        for e1, c1 in self.terms.items():
            for e2, c2 in other.terms.items():
                e = tuple(a + b for a, b in zip(e1, e2))
                s = out.get(e, Fraction(0)) + c1 * c2
                if s == 0:
                    out.pop(e, None)
                else:
                    out[e] = s
        return PolyFn(self.chart, out)

    __rmul__ = __mul__

    def __pow__(self, n):
        if not isinstance(n, int) or n < 0:
            raise ValueError("exponent must be a nonnegative integer")
        result = PolyFn.const(self.chart, 1)
        base = self
        while n:
            if n & 1:
                result = result * base
            base = base * base
            n >>= 1
        return result

    def __eq__(self, other):
        if isinstance(other, (int, Fraction)):
            other = PolyFn.const(self.chart, other)
        if not isinstance(other, PolyFn):
            return NotImplemented
        return self.chart == other.chart and self.terms == other.terms

    def __hash__(self):
        return hash((self.chart, frozenset(self.terms.items())))

    # -- queries ------------------------------------------------------------

    def is_zero(self):
        return not self.terms

    def is_constant(self):
        return all(sum(e) == 0 for e in self.terms)

    def constant_value(self):
        if not self.is_constant():
            raise ValueError(f"polynomial {self} is not constant")
        return self.terms.get((0,) * self.chart.dim, Fraction(0))

    def total_degree(self):
        return max((sum(e) for e in self.terms), default=0)

    def derive(self, axis):
        if not 0 <= axis < self.chart.dim:
            raise ValueError(f"axis {axis} out of range for {self.chart.dim}-dim chart")
        out = {}
        for exp, c in self.terms.items():
            k = exp[axis]
            if k == 0:
                continue
            new = list(exp)
            new[axis] = k - 1
            out[tuple(new)] = c * k
        return PolyFn(self.chart, out)

    def eval(self, values):
        if len(values) != self.chart.dim:
            raise ValueError("wrong number of coordinate values")
        total = 0
        for exp, c in self.terms.items():
            acc = 1
            for v, e in zip(values, exp):
                if e:
                    acc *= v**e
            total = total + c * acc
        return total

    # -- printing -----------------------------------------------------------

    def __str__(self):
        if not self.terms:
            return "0"
        items = sorted(self.terms.items(), key=lambda kv: (sum(kv[0]), kv[0]), reverse=True)
        pieces = []
        for exp, c in items:
            factors = [
                f"{name}^{e}" if e > 1 else name
                for name, e in zip(self.chart.coords, exp)
                if e > 0
            ]
            mono = "*".join(factors)
            mag = abs(c)
            if not mono:
                body = str(mag)
            elif mag == 1:
                body = mono
            else:
                body = f"{mag}*{mono}"
            pieces.append(("-" if c < 0 else "+", body))
        sign, body = pieces[0]
        out = ("-" if sign == "-" else "") + body
        for sign, body in pieces[1:]:
            out += f" {sign} {body}"
        return out

    __repr__ = __str__


def poly_derive(p, axis):
    """Exact partial derivative along the given coordinate axis."""
    return p.derive(axis)


# ---------------------------------------------------------------------------
# expression parser
#
# Grammar: rational literals, coordinate identifiers, + - * ^ with
# nonnegative integer exponents, parentheses.  `/` only forms rational
# literals (integer numerator and denominator).


def _tokenize(src):
    tokens = []
    pos = 0
    n = len(src)
    while pos < n:
        ch = src[pos]
        if ch.isspace():
            pos += 1
            continue
        if ch.isdigit():
            end = pos
            while end < n and src[end].isdigit():
                end += 1
            tokens.append(("int", src[pos:end], pos))
            pos = end
            continue
        if ch.isalpha():
            end = pos
            while end < n and (src[end].isalnum() or src[end] == "_"):
                end += 1
            tokens.append(("ident", src[pos:end], pos))
            pos = end
            continue
        if ch in "+-*^/()":
            tokens.append((ch, ch, pos))
            pos += 1
            continue
        raise ParseError(f"unexpected character {ch!r}", pos)
    tokens.append(("end", "", n))
    return tokens


class _Parser:
    def __init__(self, tokens, chart):
        self.tokens = tokens
        self.chart = chart
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def next(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, kind):
        tok = self.next()
        if tok[0] != kind:
            raise ParseError(f"expected {kind!r}, found {tok[1]!r}", tok[2])
        return tok

    def parse(self):
        p = self.expr()
        tok = self.peek()
        if tok[0] != "end":
            raise ParseError(f"unexpected token {tok[1]!r}", tok[2])
        return p

    def expr(self):
        sign = 1
        if self.peek()[0] in "+-":
            sign = -1 if self.next()[0] == "-" else 1
        p = self.term() * sign
        while self.peek()[0] in "+-":
            op = self.next()[0]
            q = self.term()
            p = p + q if op == "+" else p - q
        return p

    def term(self):
        p = self.factor()
        while self.peek()[0] == "*":
            self.next()
            p = p * self.factor()
        return p

    def factor(self):
        p = self.atom()
        while self.peek()[0] == "^":
            self.next()
            tok = self.expect("int")
            p = p ** int(tok[1])
        return p

    def atom(self):
        kind, text, pos = self.next()
        if kind == "int":
            value = Fraction(int(text))
            if self.peek()[0] == "/":
                self.next()
                den = self.expect("int")
                if int(den[1]) == 0:
                    raise ParseError("zero denominator", den[2])
                value = Fraction(int(text), int(den[1]))
            return PolyFn.const(self.chart, value)
        if kind == "ident":
            try:
                axis = self.chart.axis(text)
            except KeyError:
                raise ParseError(f"unknown identifier `{text}`", pos) from None
            return PolyFn.coord(self.chart, axis)
        if kind == "(":
            p = self.expr()
            self.expect(")")
            return p
        raise ParseError(f"unexpected token {text!r}", pos)


def parse_poly(src, chart):
    """Parse an expression string into canonical sparse form.

    Round trip holds: ``parse_poly(str(p), p.chart) == p``.
    """
    return _Parser(_tokenize(src), chart).parse()


# ---------------------------------------------------------------------------
# complex-rational polynomials (Gaussian rational coefficients)


class CPoly:
    """Polynomial with Gaussian-rational coefficients, stored as a real and
    an imaginary :class:`PolyFn` part.  The exact carrier of star products.
    """

    __slots__ = ("re", "im")

    def __init__(self, re, im=None):
        if im is None:
            im = PolyFn.zero(re.chart)
        if re.chart != im.chart:
            raise ValueError("real and imaginary parts live on different charts")
        self.re = re
        self.im = im

    @property
    def chart(self):
        return self.re.chart

    @classmethod
    def zero(cls, chart):
        return cls(PolyFn.zero(chart))

    @classmethod
    def const(cls, chart, re, im=0):
        return cls(PolyFn.const(chart, re), PolyFn.const(chart, im))

    @classmethod
    def of(cls, p):
        return p if isinstance(p, CPoly) else cls(p)

    def __add__(self, other):
        other = CPoly.of(other)
        return CPoly(self.re + other.re, self.im + other.im)

    def __sub__(self, other):
        other = CPoly.of(other)
        return CPoly(self.re - other.re, self.im - other.im)

    def __neg__(self):
        return CPoly(-self.re, -self.im)

    def __mul__(self, other):
        if isinstance(other, (int, Fraction)):
            return CPoly(self.re * other, self.im * other)
        other = CPoly.of(other)
        return CPoly(
            self.re * other.re - self.im * other.im,
            self.re * other.im + self.im * other.re,
        )

    __rmul__ = __mul__

    def scale(self, re, im=0):
        """Multiply by the exact complex scalar ``re + i*im``."""
        re, im = _as_coeff(re), _as_coeff(im)
        return CPoly(self.re * re - self.im * im, self.re * im + self.im * re)

    def conj(self):
        return CPoly(self.re, -self.im)

    def is_zero(self):
        return self.re.is_zero() and self.im.is_zero()

    def eval(self, values):
        return self.re.eval(values) + 1j * self.im.eval(values)

    def __eq__(self, other):
        if isinstance(other, PolyFn):
            other = CPoly(other)
        if not isinstance(other, CPoly):
            return NotImplemented
        return self.re == other.re and self.im == other.im

    def __hash__(self):
        return hash((self.re, self.im))

    def __str__(self):
        if self.im.is_zero():
            return str(self.re)
        if self.re.is_zero():
            return f"i*({self.im})"
        return f"({self.re}) + i*({self.im})"

    __repr__ = __str__


# ---------------------------------------------------------------------------
# truncated formal power series


def _elem_zero_like(x):
    if isinstance(x, PolyFn):
        return PolyFn.zero(x.chart)
    if isinstance(x, CPoly):
        return CPoly.zero(x.chart)
    return Fraction(0)


def _elem_is_zero(x):
    if isinstance(x, (PolyFn, CPoly)):
        return x.is_zero()
    return x == 0


class FormalSeries:
    """Truncated power series in the deformation parameter.

    Coefficients may be rationals, :class:`PolyFn`, or :class:`CPoly`;
    arithmetic closes at the fixed truncation order.
    """

    __slots__ = ("coeffs",)

    def __init__(self, coeffs):
        coeffs = tuple(coeffs)
        if not coeffs:
            raise ValueError("a series needs at least the order-0 coefficient")
        charts = {c.chart for c in coeffs if isinstance(c, (PolyFn, CPoly))}
        if len(charts) > 1:
            raise ValueError("series coefficients live on different charts")
        self.coeffs = coeffs

    @property
    def order(self):
        return len(self.coeffs) - 1

    def _check(self, other):
        if self.order != other.order:
            raise ValueError(
                f"truncation orders differ: {self.order} vs {other.order}"
            )
        mine = {c.chart for c in self.coeffs if isinstance(c, (PolyFn, CPoly))}
        theirs = {c.chart for c in other.coeffs if isinstance(c, (PolyFn, CPoly))}
        if mine and theirs and mine != theirs:
            raise ValueError("series live on different charts")

    def __add__(self, other):
        self._check(other)
        return FormalSeries([a + b for a, b in zip(self.coeffs, other.coeffs)])

    def __sub__(self, other):
        self._check(other)
        return FormalSeries([a - b for a, b in zip(self.coeffs, other.coeffs)])

    def __neg__(self):
        return FormalSeries([-a for a in self.coeffs])

    def __mul__(self, other):
        self._check(other)
        n = self.order
        out = []
        for k in range(n + 1):
            acc = None
            for i in range(k + 1):
                term = self.coeffs[i] * other.coeffs[k - i]
                acc = term if acc is None else acc + term
            out.append(acc if acc is not None else _elem_zero_like(self.coeffs[0]))
        return FormalSeries(out)

    def __eq__(self, other):
        if not isinstance(other, FormalSeries):
            return NotImplemented
        return len(self.coeffs) == len(other.coeffs) and all(
            _elem_is_zero(a - b) for a, b in zip(self.coeffs, other.coeffs)
        )

    def __hash__(self):
        return hash(self.coeffs)

    def is_zero(self):
        return all(_elem_is_zero(c) for c in self.coeffs)

    def __str__(self):
        return "; ".join(f"h^{k}: {c}" for k, c in enumerate(self.coeffs))

    __repr__ = __str__


def series_mul(a, b):
    """Cauchy product truncated at the (shared) truncation order."""
    return a * b


# ---------------------------------------------------------------------------
# Laurent polynomials in eta


class EtaLaurent:
    """Finite sum of ``eta**k * p_k(x)`` with integer (possibly negative)
    powers of the fiber variable eta and :class:`PolyFn` coefficients.
    """

    __slots__ = ("chart", "terms")

    def __init__(self, chart, terms):
        self.chart = chart
        clean = {}
        for k, p in terms.items():
            if isinstance(p, (int, Fraction)):
                p = PolyFn.const(chart, p)
            if p.chart != chart:
                raise ValueError("coefficient on wrong chart")
            if not p.is_zero():
                clean[int(k)] = p
        self.terms = clean

    @classmethod
    def zero(cls, chart):
        return cls(chart, {})

    @classmethod
    def eta_power(cls, chart, k, coeff=1):
        return cls(chart, {k: PolyFn.const(chart, coeff)})

    def __add__(self, other):
        if self.chart != other.chart:
            raise ValueError("different charts")
        terms = dict(self.terms)
        for k, p in other.terms.items():
            s = terms.get(k, PolyFn.zero(self.chart)) + p
            if s.is_zero():
                terms.pop(k, None)
            else:
                terms[k] = s
        return EtaLaurent(self.chart, terms)

    def __neg__(self):
        return EtaLaurent(self.chart, {k: -p for k, p in self.terms.items()})

    def __sub__(self, other):
        return self + (-other)

    def __mul__(self, other):
        if isinstance(other, (int, Fraction, PolyFn)):
            return EtaLaurent(self.chart, {k: p * other for k, p in self.terms.items()})
        if self.chart != other.chart:
            raise ValueError("different charts")
        out = {}
        for k1, p1 in self.terms.items():
            for k2, p2 in other.terms.items():
                k = k1 + k2
                s = out.get(k, PolyFn.zero(self.chart)) + p1 * p2
                if s.is_zero():
                    out.pop(k, None)
                else:
                    out[k] = s
        return EtaLaurent(self.chart, out)

    __rmul__ = __mul__

    def is_zero(self):
        return not self.terms

    def __eq__(self, other):
        if not isinstance(other, EtaLaurent):
            return NotImplemented
        return self.chart == other.chart and self.terms == other.terms

    def __str__(self):
        if not self.terms:
            return "0"
        parts = []
        for k in sorted(self.terms, reverse=True):
            p = self.terms[k]
            if k == 0:
                parts.append(f"({p})")
            else:
                parts.append(f"eta^{k}*({p})")
        return " + ".join(parts)

    __repr__ = __str__

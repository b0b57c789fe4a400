"""Lie algebroids over a single chart, presented by an anchor matrix and
structure functions in a fixed frame.

The bracket of sections follows the standard Leibniz rule

    [X, Y]^k = sum_ij X^i Y^j c_ij^k
             + sum_i X^i rho(e_i)(Y^k) - sum_j Y^j rho(e_j)(X^k),

and the frame-form differential is the Chevalley-Eilenberg formula with the
anchor.  Axioms are verified, never assumed: construction accepts invalid
structure data so that failure detection stays testable.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations

from .rings import Chart, PolyFn, parse_poly


def _as_poly(chart, x):
    if isinstance(x, PolyFn):
        if x.chart != chart:
            raise ValueError("polynomial on wrong chart")
        return x
    if isinstance(x, str):
        return parse_poly(x, chart)
    return PolyFn.const(chart, x)


class AlgebroidPresentation:
    """Anchor rows and structure functions of a Lie algebroid in one frame.

    ``anchor[i][a]`` is the coefficient of d/dx_a in rho(e_i); the structure
    array is stored in full so that antisymmetry violations are observable.
    """

    __slots__ = ("chart", "rank", "anchor", "structure")

    def __init__(self, chart, rank, anchor, structure):
        if rank <= 0:
            raise ValueError("rank must be positive")
        self.chart = chart
        self.rank = rank
        anchor = tuple(tuple(_as_poly(chart, x) for x in row) for row in anchor)
        if len(anchor) != rank or any(len(row) != chart.dim for row in anchor):
            raise ValueError("anchor must be a rank x dim matrix")
        self.anchor = anchor
        structure = tuple(
            tuple(tuple(_as_poly(chart, x) for x in col) for col in plane)
            for plane in structure
        )
        if len(structure) != rank or any(
            len(plane) != rank or any(len(col) != rank for col in plane)
            for plane in structure
        ):
            raise ValueError("structure must be a rank^3 array")
        self.structure = structure

    @classmethod
    def build(cls, chart, rank, anchor, structure=None):
        """Build from sparse structure entries {(i, j, k): expr} with i < j;
        the (j, i) entries are filled in antisymmetrically.
        """
        zero = PolyFn.zero(chart)
        full = [[[zero] * rank for _ in range(rank)] for _ in range(rank)]
        for (i, j, k), expr in (structure or {}).items():
            p = _as_poly(chart, expr)
            if not (0 <= i < rank and 0 <= j < rank and 0 <= k < rank):
                raise ValueError(f"structure index out of range: {(i, j, k)}")
            full[i][j][k] = full[i][j][k] + p
            full[j][i][k] = full[j][i][k] - p
        return cls(chart, rank, anchor, full)

    def frame_section(self, i):
        coeffs = [PolyFn.zero(self.chart) for _ in range(self.rank)]
        coeffs[i] = PolyFn.const(self.chart, 1)
        return Section(self, coeffs)

    def anchor_apply(self, i, p):
        """rho(e_i) acting on a function: sum_a anchor[i][a] * d p / d x_a."""
        out = PolyFn.zero(self.chart)
        for a in range(self.chart.dim):
            coeff = self.anchor[i][a]
            if not coeff.is_zero():
                out = out + coeff * p.derive(a)
        return out

    def vf_apply(self, field, p):
        """A coordinate vector field (tuple of PolyFn) acting on p."""
        out = PolyFn.zero(self.chart)
        for a in range(self.chart.dim):
            if not field[a].is_zero():
                out = out + field[a] * p.derive(a)
        return out

    def __eq__(self, other):
        if not isinstance(other, AlgebroidPresentation):
            return NotImplemented
        return (
            self.chart == other.chart
            and self.rank == other.rank
            and self.anchor == other.anchor
            and self.structure == other.structure
        )


class Section:
    """A section of the algebroid: coefficient vector over the frame."""

    __slots__ = ("presentation", "coeffs")

    def __init__(self, presentation, coeffs):
        coeffs = tuple(_as_poly(presentation.chart, c) for c in coeffs)
        if len(coeffs) != presentation.rank:
            raise ValueError("section coefficient vector has wrong length")
        self.presentation = presentation
        self.coeffs = coeffs

    def __add__(self, other):
        if self.presentation is not other.presentation and self.presentation != other.presentation:
            raise ValueError("sections over different presentations")
        return Section(self.presentation, [a + b for a, b in zip(self.coeffs, other.coeffs)])

    def __sub__(self, other):
        return self + (-1) * other

    def __rmul__(self, p):
        return Section(self.presentation, [p * c for c in self.coeffs])

    def __eq__(self, other):
        if not isinstance(other, Section):
            return NotImplemented
        return self.presentation == other.presentation and self.coeffs == other.coeffs

    def is_zero(self):
        return all(c.is_zero() for c in self.coeffs)

    def __str__(self):
        return "(" + ", ".join(str(c) for c in self.coeffs) + ")"

    __repr__ = __str__


def bracket_sections(X, Y):
    """The algebroid bracket [X, Y] of two sections over the same frame."""
    A = X.presentation
    if A != Y.presentation:
        raise ValueError("sections over different presentations")
    out = []
    for k in range(A.rank):
        acc = PolyFn.zero(A.chart)
        for i in range(A.rank):
            xi = X.coeffs[i]
            if xi.is_zero():
                continue
            for j in range(A.rank):
                c = A.structure[i][j][k]
                if not c.is_zero() and not Y.coeffs[j].is_zero():
                    acc = acc + xi * Y.coeffs[j] * c
        for i in range(A.rank):
            if not X.coeffs[i].is_zero():
                acc = acc + X.coeffs[i] * A.anchor_apply(i, Y.coeffs[k])
        for j in range(A.rank):
            if not Y.coeffs[j].is_zero():
                acc = acc - Y.coeffs[j] * A.anchor_apply(j, X.coeffs[k])
        out.append(acc)
    return Section(A, out)


@dataclass(frozen=True)
class CheckItem:
    name: str
    passed: bool
    witness: str | None = None


@dataclass(frozen=True)
class AxiomReport:
    antisymmetry: CheckItem
    anchor_morphism: CheckItem
    jacobi: CheckItem

    @property
    def passed(self):
        return self.antisymmetry.passed and self.anchor_morphism.passed and self.jacobi.passed

    def items(self):
        return (self.antisymmetry, self.anchor_morphism, self.jacobi)


def check_axioms(A):
    """Exact verification of antisymmetry, the anchor morphism property and
    the Jacobi identity; failures carry a witnessing polynomial.
    """
    anti_witness = None
    for i in range(A.rank):
        for j in range(i, A.rank):
            for k in range(A.rank):
                s = A.structure[i][j][k] + A.structure[j][i][k]
                if not s.is_zero():
                    anti_witness = f"c[{i+1}][{j+1}][{k+1}] + c[{j+1}][{i+1}][{k+1}] = {s}"
                    break
            if anti_witness:
                break
        if anti_witness:
            break

    morph_witness = None
    for i in range(A.rank):
        for j in range(i + 1, A.rank):
            for a in range(A.chart.dim):
                lhs = PolyFn.zero(A.chart)
                for k in range(A.rank):
                    c = A.structure[i][j][k]
                    if not c.is_zero():
                        lhs = lhs + c * A.anchor[k][a]
                rhs = PolyFn.zero(A.chart)
                for b in range(A.chart.dim):
                    rhs = rhs + A.anchor[i][b] * A.anchor[j][a].derive(b)
                    rhs = rhs - A.anchor[j][b] * A.anchor[i][a].derive(b)
                diff = lhs - rhs
                if not diff.is_zero():
                    coord = A.chart.coords[a]
                    morph_witness = (
                        f"rho([e{i+1},e{j+1}]) - [rho(e{i+1}),rho(e{j+1})] has "
                        f"d/d{coord} component {diff}"
                    )
                    break
            if morph_witness:
                break
        if morph_witness:
            break

    jacobi_witness = None
    for i, j, k in combinations(range(A.rank), 3):
        ei, ej, ek = A.frame_section(i), A.frame_section(j), A.frame_section(k)
        total = (
            bracket_sections(ei, bracket_sections(ej, ek))
            + bracket_sections(ej, bracket_sections(ek, ei))
            + bracket_sections(ek, bracket_sections(ei, ej))
        )
        for m, comp in enumerate(total.coeffs):
            if not comp.is_zero():
                jacobi_witness = (
                    f"jacobiator(e{i+1},e{j+1},e{k+1}) has e{m+1} component {comp}"
                )
                break
        if jacobi_witness:
            break

    return AxiomReport(
        CheckItem("antisymmetry", anti_witness is None, anti_witness),
        CheckItem("anchor_morphism", morph_witness is None, morph_witness),
        CheckItem("jacobi", jacobi_witness is None, jacobi_witness),
    )


def _perm_sign_and_sorted(idx):
    idx = list(idx)
    sign = 1
    for i in range(len(idx)):
        for j in range(len(idx) - 1 - i):
            if idx[j] > idx[j + 1]:
                idx[j], idx[j + 1] = idx[j + 1], idx[j]
                sign = -sign
    return sign, tuple(idx)


class FrameKForm:
    """Fully antisymmetric degree-k form on the frame, with PolyFn values.

    Components are stored on strictly increasing index tuples; ``value``
    applies the permutation sign for arbitrary index order.
    """

    __slots__ = ("presentation", "degree", "comps")

    def __init__(self, presentation, degree, comps):
        self.presentation = presentation
        self.degree = degree
        chart = presentation.chart
        clean = {}
        for idx, p in comps.items():
            idx = tuple(idx)
            if len(idx) != degree or any(not 0 <= m < presentation.rank for m in idx):
                raise ValueError(f"bad index tuple {idx}")
            if len(set(idx)) != degree:
                raise ValueError(f"repeated index in {idx}")
            sign, key = _perm_sign_and_sorted(idx)
            p = _as_poly(chart, p) * sign
            if key in clean:
                clean[key] = clean[key] + p
            else:
                clean[key] = p
        self.comps = {k: v for k, v in clean.items() if not v.is_zero()}

    @classmethod
    def zero(cls, presentation, degree):
        return cls(presentation, degree, {})

    @classmethod
    def from_matrix(cls, presentation, matrix):
        """Degree-2 form from an antisymmetric rank x rank matrix."""
        comps = {}
        for i in range(presentation.rank):
            for j in range(i + 1, presentation.rank):
                comps[(i, j)] = matrix[i][j]
        return cls(presentation, 2, comps)

    def value(self, idx):
        idx = tuple(idx)
        if len(idx) != self.degree:
            raise ValueError("index tuple has wrong length")
        if len(set(idx)) != self.degree:
            return PolyFn.zero(self.presentation.chart)
        sign, key = _perm_sign_and_sorted(idx)
        p = self.comps.get(key)
        if p is None:
            return PolyFn.zero(self.presentation.chart)
        return p * sign

    def __add__(self, other):
        if self.degree != other.degree or self.presentation != other.presentation:
            raise ValueError("forms of different degree or presentation")
        comps = dict(self.comps)
        for k, p in other.comps.items():
            comps[k] = comps.get(k, PolyFn.zero(self.presentation.chart)) + p
        return FrameKForm(self.presentation, self.degree, comps)

    def __neg__(self):
        return FrameKForm(self.presentation, self.degree, {k: -p for k, p in self.comps.items()})

    def __sub__(self, other):
        return self + (-other)

    def is_zero(self):
        return not self.comps

    def __eq__(self, other):
        if not isinstance(other, FrameKForm):
            return NotImplemented
        return (
            self.presentation == other.presentation
            and self.degree == other.degree
            and self.comps == other.comps
        )

    def first_nonzero(self):
        if not self.comps:
            return None
        key = min(self.comps)
        return key, self.comps[key]

    def __str__(self):
        if not self.comps:
            return "0"
        return " + ".join(
            f"({p})*e{'∧e'.join(str(m+1) for m in k)}" for k, p in sorted(self.comps.items())
        )

    __repr__ = __str__


def ce_differential(A, alpha):
    """Chevalley-Eilenberg differential of a frame k-form over the anchor.

    Degree k+1 beyond the rank collapses to the zero form; degrees above the
    rank are rejected.
    """
    k = alpha.degree
    if k > A.rank:
        raise ValueError(f"degree {k} exceeds rank {A.rank}")
    if k + 1 > A.rank:
        return FrameKForm.zero(A, k + 1)
    comps = {}
    for idx in combinations(range(A.rank), k + 1):
        acc = PolyFn.zero(A.chart)
        for s in range(k + 1):
            rest = idx[:s] + idx[s + 1 :]
            sign = -1 if s % 2 else 1
            acc = acc + sign * A.anchor_apply(idx[s], alpha.value(rest))
        for s in range(k + 1):
            for t in range(s + 1, k + 1):
                rest = tuple(m for u, m in enumerate(idx) if u not in (s, t))
                sign = -1 if (s + t) % 2 else 1
                for m in range(A.rank):
                    c = A.structure[idx[s]][idx[t]][m]
                    if not c.is_zero():
                        acc = acc + sign * c * alpha.value((m,) + rest)
        comps[idx] = acc
    return FrameKForm(A, k + 1, comps)

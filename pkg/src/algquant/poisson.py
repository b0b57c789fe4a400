"""Symplectic structure on an algebroid frame, the induced Poisson bivector,
the Heisenberg-type central extension with its contact form, and the linear
and Dirac Poisson brackets on the dual of the extension.

Orientation conventions carry a global sign that the defining diagrams do
not fix.  Both free signs in this module (the bivector composition and the
constraint-matrix orientation in the Dirac bracket) are pinned by the same
anchor: the frame with anchor rows (f d/df, d/dx2) and constant off-diagonal
form must induce pi = f d/df ^ d/dx2 and the bracket comparison
{f~, g~}_S = (1/eta) {f, g}~ must hold exactly.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from itertools import combinations

from . import ratmat
from .algebroid import AlgebroidPresentation, FrameKForm, ce_differential, check_axioms
from .rings import Chart, EtaLaurent, PolyFn, parse_poly


class NondegeneracyError(ValueError):
    """The frame form is not invertible over the polynomial ring."""


def _as_poly(chart, x):
    if isinstance(x, PolyFn):
        if x.chart != chart:
            raise ValueError("polynomial on wrong chart")
        return x
    if isinstance(x, str):
        return parse_poly(x, chart)
    return PolyFn.const(chart, x)


class SymplecticFormOnFrame:
    """Antisymmetric rank x rank matrix of PolyFn over a presentation."""

    __slots__ = ("presentation", "matrix")

    def __init__(self, presentation, matrix):
        chart = presentation.chart
        matrix = tuple(tuple(_as_poly(chart, x) for x in row) for row in matrix)
        r = presentation.rank
        if len(matrix) != r or any(len(row) != r for row in matrix):
            raise ValueError("form matrix has wrong shape")
        for i in range(r):
            for j in range(i, r):
                if not (matrix[i][j] + matrix[j][i]).is_zero():
                    raise ValueError("form matrix is not antisymmetric")
        self.presentation = presentation
        self.matrix = matrix

    @classmethod
    def from_entries(cls, presentation, entries):
        """Build from sparse upper entries {(i, j): expr} with i < j."""
        r = presentation.rank
        zero = PolyFn.zero(presentation.chart)
        m = [[zero] * r for _ in range(r)]
        for (i, j), expr in entries.items():
            if not 0 <= i < j < r:
                raise ValueError(f"omega entries need i < j, got {(i, j)}")
            p = _as_poly(presentation.chart, expr)
            m[i][j] = p
            m[j][i] = -p
        return cls(presentation, m)

    def as_kform(self):
        return FrameKForm.from_matrix(self.presentation, self.matrix)

    def is_constant(self):
        return all(x.is_constant() for row in self.matrix for x in row)

    def constant_matrix(self):
        return [[x.constant_value() for x in row] for row in self.matrix]


def poly_mat_det(matrix):
    """Exact determinant of a square PolyFn matrix by Laplace expansion."""
    n = len(matrix)
    if n == 0:
        raise ValueError("empty matrix")
    chart = matrix[0][0].chart

    def rec(rows, cols):
        if len(cols) == 1:
            return matrix[rows[0]][cols[0]]
        acc = PolyFn.zero(chart)
        r0 = rows[0]
        for s, c in enumerate(cols):
            entry = matrix[r0][c]
            if entry.is_zero():
                continue
            minor = rec(rows[1:], cols[:s] + cols[s + 1 :])
            term = entry * minor
            acc = acc + (term if s % 2 == 0 else -term)
        return acc

    return rec(tuple(range(n)), tuple(range(n)))


def poly_mat_inverse_const_det(matrix):
    """Inverse of a PolyFn matrix whose determinant is a nonzero constant."""
    n = len(matrix)
    d = poly_mat_det(matrix)
    if not d.is_constant() or d.is_zero():
        raise NondegeneracyError(f"determinant {d} is not a nonzero constant")
    dval = d.constant_value()
    chart = matrix[0][0].chart
    out = [[None] * n for _ in range(n)]
    for i in range(n):
        for j in range(n):
            rows = tuple(r for r in range(n) if r != j)
            cols = tuple(c for c in range(n) if c != i)
            if n == 1:
                cof = PolyFn.const(chart, 1)
            else:
                sub = [[matrix[r][c] for c in cols] for r in rows]
                cof = poly_mat_det(sub)
            sign = 1 if (i + j) % 2 == 0 else -1
            out[i][j] = cof * Fraction(sign, 1) * (1 / dval)
    return out


@dataclass(frozen=True)
class SymplecticVerdict:
    closed: bool
    closed_witness: str | None
    determinant: PolyFn
    nondegenerate: bool

    @property
    def passed(self):
        return self.closed and self.nondegenerate


def check_symplectic(A, omega):
    """Closedness for the algebroid differential plus strong nondegeneracy
    (determinant a nonzero constant, so the inverse exists over the ring).
    """
    d = ce_differential(A, omega.as_kform())
    witness = None
    if not d.is_zero():
        key, p = d.first_nonzero()
        witness = f"d(omega)(e{',e'.join(str(m+1) for m in key)}) = {p}"
    detp = poly_mat_det([list(row) for row in omega.matrix]) if A.rank else PolyFn.const(A.chart, 1)
    nondeg = detp.is_constant() and not detp.is_zero()
    return SymplecticVerdict(d.is_zero(), witness, detp, nondeg)


class PoissonBivector:
    """Antisymmetric dim x dim matrix of PolyFn on the base chart."""

    __slots__ = ("chart", "matrix")

    def __init__(self, chart, matrix):
        matrix = tuple(tuple(_as_poly(chart, x) for x in row) for row in matrix)
        d = chart.dim
        if len(matrix) != d or any(len(row) != d for row in matrix):
            raise ValueError("bivector matrix has wrong shape")
        for a in range(d):
            for b in range(a, d):
                if not (matrix[a][b] + matrix[b][a]).is_zero():
                    raise ValueError("bivector matrix is not antisymmetric")
        self.chart = chart
        self.matrix = matrix

    def entry(self, a, b):
        return self.matrix[a][b]

    def __eq__(self, other):
        if not isinstance(other, PoissonBivector):
            return NotImplemented
        return self.chart == other.chart and self.matrix == other.matrix

    def __str__(self):
        parts = [
            f"pi[{a+1}][{b+1}] = {self.matrix[a][b]}"
            for a in range(self.chart.dim)
            for b in range(a + 1, self.chart.dim)
            if not self.matrix[a][b].is_zero()
        ]
        return "; ".join(parts) if parts else "pi = 0"

    __repr__ = __str__


def induced_poisson(A, omega):
    """The bivector of the anchor-conjugated inverse form.

    As matrices (anchor rows R, form matrix W):  pi = - R^T W^{-1} R.  The
    global sign is the one reproducing pi = f d/df ^ d/dx2 on the frame
    (f d/df, d/dx2) with constant standard W.
    """
    verdict = check_symplectic(A, omega)
    if not verdict.nondegenerate:
        raise NondegeneracyError(
            f"form is not invertible over the ring: det = {verdict.determinant}"
        )
    if not verdict.closed:
        raise ValueError(f"form is not closed: {verdict.closed_witness}")
    chart = A.chart
    if chart.dim == 0:
        return PoissonBivector(chart, [])
    inv = poly_mat_inverse_const_det([list(row) for row in omega.matrix])
    d, r = chart.dim, A.rank
    pi = [[PolyFn.zero(chart) for _ in range(d)] for _ in range(d)]
    for a in range(d):
        for b in range(d):
            acc = PolyFn.zero(chart)
            for i in range(r):
                ria = A.anchor[i][a]
                if ria.is_zero():
                    continue
                for j in range(r):
                    if not inv[i][j].is_zero() and not A.anchor[j][b].is_zero():
                        acc = acc + ria * inv[i][j] * A.anchor[j][b]
            pi[a][b] = -acc
    return PoissonBivector(chart, pi)


class Trivector:
    """Fully antisymmetric degree-3 tensor on the base chart."""

    __slots__ = ("chart", "comps")

    def __init__(self, chart, comps):
        self.chart = chart
        self.comps = {k: v for k, v in comps.items() if not v.is_zero()}

    def is_zero(self):
        return not self.comps

    def first_nonzero(self):
        if not self.comps:
            return None
        key = min(self.comps)
        return key, self.comps[key]

    def __str__(self):
        if not self.comps:
            return "0"
        return "; ".join(
            f"[pi,pi][{a+1}][{b+1}][{c+1}] = {p}" for (a, b, c), p in sorted(self.comps.items())
        )

    __repr__ = __str__


def schouten_jacobi(pi):
    """The Schouten bracket [pi, pi] as a trivector; zero iff Jacobi holds.

    [pi,pi]^{abc} = sum_d pi^{da} d_d pi^{bc} + pi^{db} d_d pi^{ca}
                  + pi^{dc} d_d pi^{ab},
    which is already fully antisymmetric for antisymmetric pi.
    """
    chart = pi.chart
    comps = {}
    for a, b, c in combinations(range(chart.dim), 3):
        acc = PolyFn.zero(chart)
        for d in range(chart.dim):
            acc = acc + pi.matrix[d][a] * pi.matrix[b][c].derive(d)
            acc = acc + pi.matrix[d][b] * pi.matrix[c][a].derive(d)
            acc = acc + pi.matrix[d][c] * pi.matrix[a][b].derive(d)
        comps[(a, b, c)] = acc
    return Trivector(chart, comps)


def poisson_bracket(pi, f, g):
    """{f, g} = sum_ab pi^{ab} d_a f d_b g, exact."""
    if f.chart != pi.chart or g.chart != pi.chart:
        raise ValueError("functions live on a different chart than the bivector")
    acc = PolyFn.zero(pi.chart)
    for a in range(pi.chart.dim):
        fa = f.derive(a)
        if fa.is_zero():
            continue
        for b in range(pi.chart.dim):
            if not pi.matrix[a][b].is_zero():
                gb = g.derive(b)
                if not gb.is_zero():
                    acc = acc + pi.matrix[a][b] * fa * gb
    return acc


# ---------------------------------------------------------------------------
# central extension and contact form


@dataclass(frozen=True)
class CentralExtensionPresentation:
    """Rank r+1 presentation with the last frame index the central generator.

    The extension twists the bracket by the 2-cocycle: the only structure
    functions touching the new generator are its images c[i][j][Z] = omega_ij;
    its anchor row is zero.
    """

    base: AlgebroidPresentation
    omega: SymplecticFormOnFrame
    ext: AlgebroidPresentation

    @property
    def central_index(self):
        return self.base.rank


def central_extension(A, omega):
    """Extend by the 2-cocycle; closedness of omega is NOT required here, so
    that the Jacobi <-> closedness equivalence is observable on the output.
    """
    if omega.presentation != A:
        raise ValueError("form is over a different presentation")
    r, chart = A.rank, A.chart
    zero = PolyFn.zero(chart)
    anchor = [list(row) for row in A.anchor] + [[zero] * chart.dim]
    structure = [[[zero] * (r + 1) for _ in range(r + 1)] for _ in range(r + 1)]
    for i in range(r):
        for j in range(r):
            for k in range(r):
                structure[i][j][k] = A.structure[i][j][k]
            structure[i][j][r] = omega.matrix[i][j]
    ext = AlgebroidPresentation(chart, r + 1, anchor, structure)
    return CentralExtensionPresentation(A, omega, ext)


@dataclass(frozen=True)
class ContactVerdict:
    matches_pullback: bool
    pullback_witness: str | None
    differential_closed: bool
    closed_witness: str | None

    @property
    def passed(self):
        return self.matches_pullback and self.differential_closed


def contact_form_check(E):
    """theta = -Z* must have d(theta) equal to the pullback of omega, and
    that differential must itself be closed.

    The first identity holds by construction of the extension bracket; the
    second is where a non-closed omega fails, with d(d theta) = d(omega) as
    witness.
    """
    ext = E.ext
    z = E.central_index
    theta = FrameKForm(ext, 1, {(z,): PolyFn.const(ext.chart, -1)})
    dtheta = ce_differential(ext, theta)
    pull_comps = {}
    for i in range(E.base.rank):
        for j in range(i + 1, E.base.rank):
            pull_comps[(i, j)] = E.omega.matrix[i][j]
    pullback = FrameKForm(ext, 2, pull_comps)
    diff = dtheta - pullback
    pb_witness = None
    if not diff.is_zero():
        key, p = diff.first_nonzero()
        pb_witness = f"(d theta - pullback)(e{',e'.join(str(m+1) for m in key)}) = {p}"
    ddtheta = ce_differential(ext, dtheta)
    cl_witness = None
    if not ddtheta.is_zero():
        key, p = ddtheta.first_nonzero()
        cl_witness = f"d(d theta)(e{',e'.join(str(m+1) for m in key)}) = {p}"
    return ContactVerdict(diff.is_zero(), pb_witness, ddtheta.is_zero(), cl_witness)


# ---------------------------------------------------------------------------
# functions on the dual of the extension


class FiberLinearFn:
    """Polynomial in base coordinates, fiber coordinates xi_1..xi_r dual to
    the frame of the underlying algebroid, and integer (possibly negative)
    powers of the central dual coordinate eta.

    Terms map (base exponents, xi exponents, eta power) to rationals.
    """

    __slots__ = ("chart", "srank", "terms")

    def __init__(self, chart, srank, terms):
        self.chart = chart
        self.srank = srank
        clean = {}
        for (bexp, xexp, epow), c in terms.items():
            c = Fraction(c)
            if c == 0:
                continue
            bexp, xexp = tuple(bexp), tuple(xexp)
            if len(bexp) != chart.dim or len(xexp) != srank:
                raise ValueError("exponent tuples have wrong length")
            if any(e < 0 for e in bexp) or any(e < 0 for e in xexp):
                raise ValueError("base and xi exponents must be nonnegative")
            clean[(bexp, xexp, int(epow))] = c
        self.terms = clean

    # -- constructors -------------------------------------------------------

    @classmethod
    def zero(cls, chart, srank):
        return cls(chart, srank, {})

    @classmethod
    def from_base(cls, p, srank):
        """Pullback of a base function to the dual bundle."""
        zx = (0,) * srank
        return cls(p.chart, srank, {(bexp, zx, 0): c for bexp, c in p.terms.items()})

    @classmethod
    def xi(cls, chart, srank, i):
        xexp = [0] * srank
        xexp[i] = 1
        return cls(chart, srank, {((0,) * chart.dim, tuple(xexp), 0): Fraction(1)})

    @classmethod
    def eta(cls, chart, srank, power=1):
        return cls(chart, srank, {((0,) * chart.dim, (0,) * srank, power): Fraction(1)})

    # -- arithmetic ----------------------------------------------------------

    def _check(self, other):
        if self.chart != other.chart or self.srank != other.srank:
            raise ValueError("fiber functions live on different duals")

    def __add__(self, other):
        self._check(other)
        terms = dict(self.terms)
        for key, c in other.terms.items():
            s = terms.get(key, Fraction(0)) + c
            if s == 0:
                terms.pop(key, None)
            else:
                terms[key] = s
        return FiberLinearFn(self.chart, self.srank, terms)

    def __neg__(self):
        return FiberLinearFn(self.chart, self.srank, {k: -c for k, c in self.terms.items()})

    def __sub__(self, other):
        return self + (-other)

    def __mul__(self, other):
        if isinstance(other, (int, Fraction)):
            return FiberLinearFn(
                self.chart, self.srank, {k: c * other for k, c in self.terms.items()}
            )
        self._check(other)
        out = {}
        for (b1, x1, e1), c1 in self.terms.items():
            for (b2, x2, e2), c2 in other.terms.items():
                key = (
                    tuple(a + b for a, b in zip(b1, b2)),
                    tuple(a + b for a, b in zip(x1, x2)),
                    e1 + e2,
                )
                s = out.get(key, Fraction(0)) + c1 * c2
                if s == 0:
                    out.pop(key, None)
                else:
                    out[key] = s
        return FiberLinearFn(self.chart, self.srank, out)

    __rmul__ = __mul__

    def is_zero(self):
        return not self.terms

    def __eq__(self, other):
        if not isinstance(other, FiberLinearFn):
            return NotImplemented
        return (
            self.chart == other.chart
            and self.srank == other.srank
            and self.terms == other.terms
        )

    # -- calculus ------------------------------------------------------------

    def partial_base(self, a):
        out = {}
        for (bexp, xexp, epow), c in self.terms.items():
            k = bexp[a]
            if k == 0:
                continue
            nb = list(bexp)
            nb[a] = k - 1
            out[(tuple(nb), xexp, epow)] = c * k
        return FiberLinearFn(self.chart, self.srank, out)

    def partial_xi(self, i):
        out = {}
        for (bexp, xexp, epow), c in self.terms.items():
            k = xexp[i]
            if k == 0:
                continue
            nx = list(xexp)
            nx[i] = k - 1
            out[(bexp, tuple(nx), epow)] = c * k
        return FiberLinearFn(self.chart, self.srank, out)

    def partial_eta(self):
        out = {}
        for (bexp, xexp, epow), c in self.terms.items():
            if epow == 0:
                continue
            out[(bexp, xexp, epow - 1)] = c * epow
        return FiberLinearFn(self.chart, self.srank, out)

    def restrict_to_stratum(self):
        """Set all xi coordinates to zero (the submanifold xi = 0, eta > 0)."""
        zx = (0,) * self.srank
        out = {}
        for (bexp, xexp, epow), c in self.terms.items():
            if any(xexp):
                continue
            out[(bexp, zx, epow)] = c
        return FiberLinearFn(self.chart, self.srank, out)

    def mul_eta(self, power):
        return FiberLinearFn(
            self.chart,
            self.srank,
            {(b, x, e + power): c for (b, x, e), c in self.terms.items()},
        )

    def as_eta_laurent(self):
        """Collapse a xi-free function to an EtaLaurent in the base ring."""
        out = {}
        for (bexp, xexp, epow), c in self.terms.items():
            if any(xexp):
                raise ValueError("function still depends on xi coordinates")
            p = out.setdefault(epow, {})
            p[bexp] = p.get(bexp, Fraction(0)) + c
        return EtaLaurent(self.chart, {k: PolyFn(self.chart, t) for k, t in out.items()})

    def __str__(self):
        if not self.terms:
            return "0"
        parts = []
        for (bexp, xexp, epow), c in sorted(self.terms.items()):
            factors = [str(c)]
            factors += [
                f"{n}^{e}" if e > 1 else n
                for n, e in zip(self.chart.coords, bexp)
                if e
            ]
            factors += [f"xi{i+1}^{e}" if e > 1 else f"xi{i+1}" for i, e in enumerate(xexp) if e]
            if epow:
                factors.append(f"eta^{epow}" if epow != 1 else "eta")
            parts.append("*".join(factors))
        return " + ".join(parts)

    __repr__ = __str__


def linear_poisson_bracket(E, F, G):
    """The linear Poisson bracket on the dual of the extension, generated by

        {xi_i, xi_j} = sum_k c_ij^k xi_k + eta * omega_ij,
        {xi_i, p~}   = (rho(e_i) p)~,
        {eta, .} = 0,   {p~, q~} = 0,

    and extended to polynomials as a biderivation.
    """
    ext = E.ext
    r = E.base.rank
    chart = ext.chart
    if F.chart != chart or F.srank != r or G.chart != chart or G.srank != r:
        raise ValueError("fiber functions do not match the extension's dual")

    def dxi(H, m):
        return H.partial_xi(m) if m < r else H.partial_eta()

    def lift_structure(m, n):
        acc = FiberLinearFn.zero(chart, r)
        for k in range(r + 1):
            c = ext.structure[m][n][k]
            if c.is_zero():
                continue
            ck = FiberLinearFn.from_base(c, r)
            gen = FiberLinearFn.xi(chart, r, k) if k < r else FiberLinearFn.eta(chart, r)
            acc = acc + ck * gen
        return acc

    dF = [dxi(F, m) for m in range(r + 1)]
    dG = [dxi(G, m) for m in range(r + 1)]
    acc = FiberLinearFn.zero(chart, r)
    for m in range(r + 1):
        if dF[m].is_zero():
            continue
        for n in range(r + 1):
            if m == n or dG[n].is_zero():
                continue
            B = lift_structure(m, n)
            if not B.is_zero():
                acc = acc + B * dF[m] * dG[n]
    for m in range(r + 1):
        for a in range(chart.dim):
            rho = ext.anchor[m][a]
            if rho.is_zero():
                continue
            lifted = FiberLinearFn.from_base(rho, r)
            term = dF[m] * G.partial_base(a) - F.partial_base(a) * dG[m]
            if not term.is_zero():
                acc = acc + lifted * term
    return acc


def dirac_bracket_on_S(E, f, g):
    """Bracket of two pullbacks on the stratum {xi = 0, eta > 0}, by the
    constrained-bracket formula with constraint functions xi_1..xi_r:

        {F, G}_S = {F, G} - sum_ij K_ij {F, xi_i} {xi_j, G},

    where the constraint matrix on the stratum is eta * omega.  Requires a
    constant invertible omega so the inverse is an exact eta-Laurent matrix.
    The orientation of K (the same global sign freedom as the bivector) is
    pinned by the comparison contract: the result equals (1/eta) {f, g}~.
    """
    if not E.omega.is_constant():
        raise NondegeneracyError("Dirac bracket needs a constant frame form")
    W = ratmat.as_fraction_matrix(E.omega.constant_matrix())
    try:
        Winv = ratmat.inverse(W)
    except ValueError:
        raise NondegeneracyError("frame form is singular") from None
    r = E.base.rank
    chart = E.ext.chart
    F = FiberLinearFn.from_base(f, r)
    G = FiberLinearFn.from_base(g, r)
    acc = linear_poisson_bracket(E, F, G)
    for i in range(r):
        bf = linear_poisson_bracket(E, F, FiberLinearFn.xi(chart, r, i))
        if bf.is_zero():
            continue
        for j in range(r):
            if Winv[i][j] == 0:
                continue
            bg = linear_poisson_bracket(E, FiberLinearFn.xi(chart, r, j), G)
            if bg.is_zero():
                continue
            # K = -(eta*W)^{-1}; the minus is the pinned orientation.
            corr = (bf * bg * (-Winv[i][j])).mul_eta(-1)
            acc = acc - corr
    return acc.restrict_to_stratum()

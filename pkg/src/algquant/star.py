"""Deformation quantization in flat algebroid frames.

The product is the exponential bidifferential series

    (f * g)_k = (1/k!) sum  L^{i1 j1} ... L^{ik jk}
                            (D_{i1}..D_{ik} f) (D_{j1}..D_{jk} g)

with constant Wick tensor L and pairwise commuting derivations D_i = rho(e_i),
computed exactly over Gaussian rationals.  Both signs of L are frozen against
the finite-dimensional Toeplitz model: the antisymmetric part i/2 * W^{-1}
makes f*g - g*f = -i h {f, g} + O(h^2) for the induced Poisson bracket, and
the symmetric part -G/2 (minus the inverse metric of omega(J., .)) makes the
product agree with the composition of Bargmann-Toeplitz compressions to all
orders.  The compression model realizes deformation parameter h through
Gaussian weight 2h (see WEIGHT_RATIO); that calibration is fixed by the
commutator [T_x, T_y] = -i (weight/2) Id of the model.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from . import ratmat
from .fock import FockOperator, bargmann_toeplitz, berezin_symbol, ExtractionError
from .rings import Chart, CPoly, FormalSeries, PolyFn

#: Gaussian weight parameter of the Bargmann model per unit of deformation
#: parameter.  With weight exp(-|z|^2/theta) and z = x + i y the compression
#: model satisfies [T_x, T_y] = -i (theta/2) Id exactly, so operators built
#: at theta = 2 h realize the star product at h.
WEIGHT_RATIO = 2.0


class FlatFrameError(ValueError):
    """The presentation does not satisfy the flat-frame preconditions."""


def frame_commutator_witness(A):
    """First pair of anchor fields that fail to commute, with the commutator
    expressed back in the frame when possible (diagnostic string), or None.
    """
    for i in range(A.rank):
        for j in range(i + 1, A.rank):
            for a in range(A.chart.dim):
                comm = PolyFn.zero(A.chart)
                for b in range(A.chart.dim):
                    comm = comm + A.anchor[i][b] * A.anchor[j][a].derive(b)
                    comm = comm - A.anchor[j][b] * A.anchor[i][a].derive(b)
                if not comm.is_zero():
                    coord = A.chart.coords[a]
                    return (
                        f"[D{i+1}, D{j+1}] has d/d{coord} component {comm}"
                    )
    return None


def wick_tensor(chart, omega, jmat):
    """The composition tensor L = (i W^{-1} - G)/2 of a constant frame form
    W and a compatible rational complex structure, with G the inverse of the
    metric J^T W.

    The returned matrix satisfies L - L^T = i W^{-1} (frozen by the
    commutator contract) and L + L^T = -G, negative semidefinite (frozen by
    agreement with the Toeplitz compression model).
    """
    w = ratmat.as_fraction_matrix(omega)
    j = ratmat.as_fraction_matrix(jmat)
    r = len(w)
    for row in w:
        if len(row) != r:
            raise ValueError("form matrix must be square")
    jj = ratmat.mat_mul(j, j)
    for i in range(r):
        for k in range(r):
            if jj[i][k] != (-1 if i == k else 0):
                raise ValueError("J^2 != -I")
    jt = ratmat.transpose(j)
    if ratmat.mat_mul(ratmat.mat_mul(jt, w), j) != w:
        raise ValueError("omega is not J-invariant")
    gmetric = ratmat.mat_mul(jt, w)
    if gmetric != ratmat.transpose(gmetric):
        raise ValueError("omega(J., .) is not symmetric")
    if not ratmat.is_positive_definite(gmetric):
        raise ValueError("omega(J., .) is not positive definite")
    winv = ratmat.inverse(w)
    ginv = ratmat.inverse(gmetric)
    lam = [
        [
            CPoly.const(chart, -Fraction(ginv[i][k], 2), Fraction(winv[i][k], 2))
            for k in range(r)
        ]
        for i in range(r)
    ]
    return lam


@dataclass
class FlatFrameConfig:
    """A flat frame for the exact star engine: commuting derivations D_i
    from the anchor, a constant invertible antisymmetric form, and the Wick
    tensor frozen against the operator model."""

    presentation: object
    omega: list
    jmat: list
    lam: list

    @property
    def chart(self):
        return self.presentation.chart

    @property
    def rank(self):
        return self.presentation.rank

    @classmethod
    def build(cls, A, omega, jmat=None):
        """From a presentation and a constant form; the default complex
        structure is the form matrix itself (valid whenever W^2 = -I, which
        covers all standard block frames)."""
        if hasattr(omega, "matrix"):
            if not omega.is_constant():
                raise FlatFrameError("flat frames need a constant frame form")
            wm = omega.constant_matrix()
        else:
            wm = omega
        wm = ratmat.as_fraction_matrix(wm)
        witness = frame_commutator_witness(A)
        if witness is not None:
            raise FlatFrameError(f"anchor fields do not commute: {witness}")
        if jmat is None:
            ww = ratmat.mat_mul(wm, wm)
            if any(
                ww[i][k] != (-1 if i == k else 0) for i in range(len(wm)) for k in range(len(wm))
            ):
                raise FlatFrameError(
                    "no default complex structure: form squared is not -I; pass jmat"
                )
            jmat = wm
        lam = wick_tensor(A.chart, wm, jmat)
        return cls(A, wm, ratmat.as_fraction_matrix(jmat), lam)

    def validate(self, strict=True):
        """Returns a list of human-readable invariant violations (empty when
        the configuration is usable by the exact engine)."""
        problems = []
        witness = frame_commutator_witness(self.presentation)
        if witness is not None:
            problems.append(f"derivations do not commute: {witness}")
        r = self.rank
        if strict:
            for i in range(r):
                for k in range(r):
                    entry = self.lam[i][k]
                    if isinstance(entry, CPoly) and not (
                        entry.re.is_constant() and entry.im.is_constant()
                    ):
                        problems.append(f"Wick tensor entry ({i+1},{k+1}) is not constant")
        try:
            winv = ratmat.inverse(self.omega)
        except ValueError:
            problems.append("frame form is singular")
            return problems
        for i in range(r):
            for k in range(r):
                a = self.lam[i][k]
                b = self.lam[k][i]
                if isinstance(a, CPoly) and isinstance(b, CPoly):
                    if a.re.is_constant() and b.re.is_constant():
                        anti_im = a.im.constant_value() - b.im.constant_value() if (
                            a.im.is_constant() and b.im.is_constant()
                        ) else None
                        if anti_im is not None and anti_im != winv[i][k]:
                            problems.append(
                                f"antisymmetric part of L at ({i+1},{k+1}) is not i*Winv/2"
                            )
                        sym_re = (
                            a.re.constant_value() + b.re.constant_value()
                            if (a.re.is_constant() and b.re.is_constant())
                            else None
                        )
                        if sym_re is not None and sym_re > 0:
                            problems.append(
                                f"symmetric part of L at ({i+1},{k+1}) is positive"
                            )
        return problems

    # -- derivations ---------------------------------------------------------

    def derive(self, i, F):
        """D_i = rho(e_i) acting on a CPoly."""
        A = self.presentation
        re = PolyFn.zero(self.chart)
        im = PolyFn.zero(self.chart)
        for a in range(self.chart.dim):
            coeff = A.anchor[i][a]
            if coeff.is_zero():
                continue
            re = re + coeff * F.re.derive(a)
            im = im + coeff * F.im.derive(a)
        return CPoly(re, im)


def _pair_coefficients(cfg, order):
    """c_k[(alpha, beta)] = sum over index tuples with the given derivative
    multisets of the product of Wick entries; cached on the configuration."""
    cache = getattr(cfg, "_pair_cache", None)
    if cache is None:
        cache = {0: {((0,) * cfg.rank, (0,) * cfg.rank): CPoly.const(cfg.chart, 1)}}
        cfg._pair_cache = cache
    while max(cache) < order:
        k = max(cache)
        nxt = {}
        for (alpha, beta), c in cache[k].items():
            for i in range(cfg.rank):
                for j in range(cfg.rank):
                    lam = cfg.lam[i][j]
                    if lam.is_zero():
                        continue
                    na = list(alpha)
                    na[i] += 1
                    nb = list(beta)
                    nb[j] += 1
                    key = (tuple(na), tuple(nb))
                    term = c * lam
                    if key in nxt:
                        nxt[key] = nxt[key] + term
                    else:
                        nxt[key] = term
        cache[k + 1] = {k2: v for k2, v in nxt.items() if not v.is_zero()}
    return cache


def _derivative_table(cfg, F, order):
    """All iterated derivatives D^alpha F with |alpha| <= order (the D_i
    commute, so multisets index them)."""
    zero_idx = (0,) * cfg.rank
    table = {zero_idx: F}
    frontier = [zero_idx]
    for _ in range(order):
        new_frontier = []
        for alpha in frontier:
            for i in range(cfg.rank):
                na = list(alpha)
                na[i] += 1
                key = tuple(na)
                if key in table:
                    continue
                table[key] = cfg.derive(i, table[alpha])
                new_frontier.append(key)
        frontier = new_frontier
    return table


def star_series(cfg, F, G, order=None, check=True):
    """Star product of two truncated series, coefficient by coefficient."""
    if check:
        problems = cfg.validate()
        if problems:
            raise FlatFrameError("; ".join(problems))
    if order is None:
        order = F.order
    if F.order != G.order:
        raise ValueError("operand series have different truncation orders")
    coeffs_f = [CPoly.of(c) for c in F.coeffs]
    coeffs_g = [CPoly.of(c) for c in G.coeffs]
    pair = _pair_coefficients(cfg, order)
    tab_f = [_derivative_table(cfg, c, order) for c in coeffs_f]
    tab_g = [_derivative_table(cfg, c, order) for c in coeffs_g]
    out = []
    for m in range(order + 1):
        acc = CPoly.zero(cfg.chart)
        for p in range(m + 1):
            if coeffs_f[p].is_zero():
                continue
            for q in range(m - p + 1):
                if coeffs_g[q].is_zero():
                    continue
                k = m - p - q
                inv_fact = Fraction(1, math.factorial(k))
                for (alpha, beta), c in pair[k].items():
                    df = tab_f[p].get(alpha)
                    dg = tab_g[q].get(beta)
                    if df is None or dg is None or df.is_zero() or dg.is_zero():
                        continue
                    acc = acc + (c * df * dg) * inv_fact
        out.append(acc)
    return FormalSeries(out)


def star(cfg, f, g, order, check=True):
    """Star product of two functions, truncated at the given order.

    Order 0 is the pointwise product; the order-1 antisymmetric part
    reproduces -i {f, g} for the Poisson bracket induced by the frame form.
    """
    if f.chart != cfg.chart or g.chart != cfg.chart:
        raise ValueError("operands live on a different chart")
    pad = [CPoly.zero(cfg.chart)] * order
    F = FormalSeries([CPoly.of(f)] + pad)
    G = FormalSeries([CPoly.of(g)] + pad)
    return star_series(cfg, F, G, order, check=check)


def _random_poly(chart, rng, degree, nterms=5):
    terms = {}
    for _ in range(nterms):
        exp = [0] * chart.dim
        budget = rng.randint(0, degree)
        for _ in range(budget):
            exp[rng.randrange(chart.dim)] += 1
        c = rng.choice([-3, -2, -1, 1, 2, 3])
        key = tuple(exp)
        terms[key] = terms.get(key, 0) + c
    return PolyFn(chart, {k: Fraction(v) for k, v in terms.items() if v})


@dataclass
class AssociativityReport:
    trials: int
    order: int
    first_defect_order: int | None
    witness: str | None

    @property
    def passed(self):
        return self.first_defect_order is None


def check_associativity(cfg, order=6, trials=25, degree=4, seed=0):
    """(f*g)*h - f*(g*h) on random polynomial triples, exact through the
    truncation order.  Failures are findings, not errors; the report names
    the first order with a nonzero defect."""
    rng = random.Random(seed)
    first_defect = None
    witness = None
    for _ in range(trials):
        f = _random_poly(cfg.chart, rng, degree)
        g = _random_poly(cfg.chart, rng, degree)
        h = _random_poly(cfg.chart, rng, degree)
        pad = [CPoly.zero(cfg.chart)] * order
        F = FormalSeries([CPoly.of(f)] + pad)
        G = FormalSeries([CPoly.of(g)] + pad)
        H = FormalSeries([CPoly.of(h)] + pad)
        left = star_series(cfg, star_series(cfg, F, G, check=False), H, check=False)
        right = star_series(cfg, F, star_series(cfg, G, H, check=False), check=False)
        for k, (a, b) in enumerate(zip(left.coeffs, right.coeffs)):
            d = a - b
            if not d.is_zero():
                if first_defect is None or k < first_defect:
                    first_defect = k
                    witness = f"order {k} defect {d} for f={f}, g={g}, h={h}"
                break
    return AssociativityReport(trials, order, first_defect, witness)


# ---------------------------------------------------------------------------
# the finite-dimensional Toeplitz oracle


def standard_frame_config(n, coord_names=None):
    """The tangent frame of R^{2n} with coordinates (x_1..x_n, y_1..y_n),
    identity anchor, and the block form pairing omega(x_j, y_j) = 1."""
    from .algebroid import AlgebroidPresentation

    if coord_names is None:
        coord_names = ("x", "y") if n == 1 else tuple(
            [f"x{j+1}" for j in range(n)] + [f"y{j+1}" for j in range(n)]
        )
    chart = Chart(tuple(coord_names))
    r = 2 * n
    anchor = [[1 if a == i else 0 for a in range(r)] for i in range(r)]
    A = AlgebroidPresentation.build(chart, r, anchor, {})
    omega = [[0] * r for _ in range(r)]
    for j in range(n):
        omega[j][n + j] = 1
        omega[n + j][j] = -1
    return FlatFrameConfig.build(A, omega)


def is_standard_frame(cfg, modes):
    r = 2 * modes
    if cfg.rank != r or cfg.chart.dim != r:
        return False
    for i in range(r):
        for a in range(r):
            want = 1 if i == a else 0
            entry = cfg.presentation.anchor[i][a]
            if not entry.is_constant() or entry.constant_value() != want:
                return False
    for i in range(r):
        for k in range(r):
            want = 0
            if k == i + modes:
                want = 1
            elif i == k + modes:
                want = -1
            if cfg.omega[i][k] != want:
                return False
    return True


def toeplitz_at_hbar(f, hbar, space):
    """Toeplitz compression realizing deformation parameter ``hbar``: the
    Bargmann weight is WEIGHT_RATIO * hbar (commutator calibration)."""
    return bargmann_toeplitz(f, WEIGHT_RATIO * hbar, space)


def _evaluate_series_operator(series, hbar, space):
    acc = np.zeros((space.dim, space.dim), dtype=complex)
    for k, coeff in enumerate(series.coeffs):
        coeff = CPoly.of(coeff)
        if coeff.is_zero():
            continue
        acc += (hbar**k) * toeplitz_at_hbar(coeff, hbar, space).mat
    return FockOperator(space, acc)


@dataclass
class OracleReport:
    order: int
    points: list          # (hbar, remainder norm)
    slope: float | None
    floored: bool

    def passed(self, min_slope):
        return self.floored or (self.slope is not None and self.slope >= min_slope)

    def __str__(self):
        pts = ", ".join(f"(h={h:.5g}, R={r:.3e})" for h, r in self.points)
        s = "floor" if self.floored else f"{self.slope:.3f}"
        return f"order {self.order}: slope {s} [{pts}]"


def oracle_compare(cfg, f, g, order, hbar_grid, space, buffer=8, floor=1e-12):
    """Remainder ||T_f T_g - T_{f*g restricted to the order}|| below the
    cutoff buffer, fitted as a power of hbar.  Exact agreement (remainder at
    the floating-point floor for every grid point) is reported as floored
    rather than fitted."""
    if not is_standard_frame(cfg, space.modes):
        raise FlatFrameError("the operator oracle exists only on the standard frame")
    series = star(cfg, f, g, order)
    points = []
    for hbar in hbar_grid:
        tf = toeplitz_at_hbar(f, hbar, space)
        tg = toeplitz_at_hbar(g, hbar, space)
        model = _evaluate_series_operator(series, hbar, space)
        rem = (tf @ tg - model).buffered_norm(buffer)
        points.append((float(hbar), rem))
    usable = [(h, r) for h, r in points if r > floor]
    if len(usable) < 3:
        return OracleReport(order, points, None, True)
    xs = np.log([h for h, _ in usable])
    ys = np.log([r for _, r in usable])
    slope = float(np.polyfit(xs, ys, 1)[0])
    return OracleReport(order, points, slope, False)


# ---------------------------------------------------------------------------
# total-symbol recovery


def richardson_limit(values, ratio):
    """Limit at zero of a sequence sampled on a geometric grid, assuming a
    power-series error model; returns (limit, error estimate)."""
    tab = [list(values)]
    while len(tab[-1]) > 1:
        j = len(tab)
        prev = tab[-1]
        rj = ratio**j
        tab.append([(prev[m + 1] - rj * prev[m]) / (1.0 - rj) for m in range(len(prev) - 1)])
    limit = tab[-1][0]
    if len(tab) >= 2:
        err = abs(limit - tab[-2][1])
    else:
        err = float("inf")
    return limit, err


@dataclass
class SymbolExtraction:
    points: list
    coeffs: np.ndarray      # (order+1, npoints) complex, extrapolated values
    polynomials: list       # per order: {exponent tuple: complex coefficient}
    errors: np.ndarray      # (order+1, npoints) extrapolation error estimates
    fit_residuals: list     # per order: max |fit - extrapolated value|
    converged: bool

    def coefficient_at(self, k, point):
        acc = 0j
        for exp, c in self.polynomials[k].items():
            term = c
            for v, e in zip(point, exp):
                term *= v**e
            acc += term
        return acc


def _monomial_exponents(nvars, degree):
    if nvars == 0:
        return [()]
    out = []
    for head in range(degree + 1):
        for rest in _monomial_exponents(nvars - 1, degree - head):
            out.append((head,) + rest)
    return out


def total_symbol_extract(
    family,
    hbar_grid,
    points,
    order,
    space,
    weight_ratio=WEIGHT_RATIO,
    fit_degree=4,
    error_threshold=1e-3,
    strict=True,
):
    """Recover the total symbol of an operator family by the order-by-order
    peel-off with Toeplitz representatives:

        f_k = limit of the Berezin symbol of G_k as hbar -> 0,
        G_{k+1}(hbar) = (G_k(hbar) - T_{f_k}(hbar)) / hbar,

    with the limit taken by Richardson extrapolation on a geometric grid and
    f_k reconstructed as a polynomial (least squares on the sample points)
    so the operator subtraction is possible.  ``family`` maps a deformation
    parameter to a FockOperator built at Bargmann weight
    ``weight_ratio * hbar``.
    """
    grid = [float(h) for h in hbar_grid]
    if len(grid) < order + 3:
        raise ValueError("hbar grid too short for the requested order")
    if any(b >= a for a, b in zip(grid, grid[1:])):
        raise ValueError("hbar grid must be strictly decreasing")
    ratios = [b / a for a, b in zip(grid, grid[1:])]
    ratio = ratios[0]
    if any(abs(r - ratio) > 1e-9 for r in ratios):
        raise ValueError("hbar grid must be geometric")
    ws = []
    for p in points:
        if len(p) != 2 * space.modes:
            raise ValueError("sample points must have one coordinate per chart axis")
        ws.append(tuple(complex(p[j], p[space.modes + j]) for j in range(space.modes)))
    occupancy = max(sum(abs(w) ** 2 for w in wv) for wv in ws) / (
        weight_ratio * grid[-1]
    )
    if occupancy > 0:
        # Poisson mass of the coherent state at the truncation boundary; the
        # boundary carries O(1) operator junk, so this mass bounds the bias.
        log_tail = (
            -occupancy
            + space.cutoff * math.log(occupancy)
            - math.lgamma(space.cutoff + 1)
        )
        if log_tail > -18.0:
            raise ExtractionError(
                f"coherent occupation {occupancy:.1f} of a sample point puts "
                f"mass exp({log_tail:.1f}) at the cutoff {space.cutoff}; "
                "shrink the points or enlarge the cutoff"
            )
    exps = _monomial_exponents(2 * space.modes, fit_degree)
    if len(points) < len(exps):
        raise ValueError(
            f"need at least {len(exps)} sample points for a degree-{fit_degree} fit"
        )
    vand = np.array(
        [[np.prod([float(v) ** e for v, e in zip(p, exp)]) for exp in exps] for p in points]
    )
    work = [family(h) for h in grid]
    coeffs = np.empty((order + 1, len(ws)), dtype=complex)
    errors = np.empty((order + 1, len(ws)), dtype=float)
    polynomials = []
    fit_residuals = []
    for k in range(order + 1):
        samples = np.empty((len(grid), len(ws)), dtype=complex)
        for m, h in enumerate(grid):
            theta = weight_ratio * h
            for pidx, w in enumerate(ws):
                samples[m, pidx] = berezin_symbol(work[m], w, theta)
        for pidx in range(len(ws)):
            limit, err = richardson_limit(list(samples[:, pidx]), ratio)
            coeffs[k, pidx] = limit
            errors[k, pidx] = err
        sol, *_ = np.linalg.lstsq(vand, coeffs[k], rcond=None)
        poly = {exp: c for exp, c in zip(exps, sol) if abs(c) > 1e-12}
        polynomials.append(poly)
        fit_residuals.append(float(np.max(np.abs(vand @ sol - coeffs[k]))))
        if k < order:
            nxt = []
            for m, h in enumerate(grid):
                rep = bargmann_toeplitz(poly, weight_ratio * h, space) if poly else None
                mat = work[m].mat - rep.mat if rep is not None else work[m].mat.copy()
                nxt.append(FockOperator(space, mat / h))
            work = nxt
    worst = max(float(np.max(errors)), max(fit_residuals))
    converged = worst <= error_threshold
    if strict and not converged:
        raise ExtractionError(
            f"extraction error {worst:.3e} exceeds {error_threshold:.1e}; "
            "enlarge the cutoff, refine the grid, or raise the fit degree"
        )
    return SymbolExtraction(list(points), coeffs, polynomials, errors, fit_residuals, converged)

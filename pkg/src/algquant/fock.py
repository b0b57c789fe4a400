"""Finite-dimensional operator models at a fixed fiber: compatible complex
structures, truncated symmetric Fock spaces with ladder operators, the
positive-parameter representation of the osculating group, quantization of
Gaussian symbols by Gauss-Hermite quadrature, the Newton-type projector
purification, and Toeplitz compressions in the Bargmann model.

Hard truncation pollutes the top occupation levels, so every operator-norm
comparison here is meant to run below a cutoff buffer, and the symbol
quantization works on an internally padded space before compressing back.

All functions are deterministic: summation orders are fixed, so repeated
runs at equal thread counts reproduce results bit for bit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import product

import numpy as np
from scipy.linalg import expm

from .rings import CPoly, PolyFn


class DegenerateFiberError(ValueError):
    """The fiber form is numerically singular; no ground state exists there."""


class QuadratureConvergenceError(RuntimeError):
    """Doubling the quadrature order moved the result more than tolerated."""


class ExtractionError(RuntimeError):
    """Richardson extrapolation did not converge to the requested accuracy."""


def _binom(n, k):
    return math.comb(n, k)


class FockSpace:
    """Truncated symmetric Fock space: occupation multi-indices with total
    occupation at most ``cutoff``, enumerated degree by degree and
    lexicographically inside each degree (stable indexing)."""

    __slots__ = ("modes", "cutoff", "basis", "index", "dim", "_ladders")

    def __init__(self, modes, cutoff):
        if modes <= 0 or cutoff < 0:
            raise ValueError("modes must be positive and cutoff nonnegative")
        self.modes = modes
        self.cutoff = cutoff
        basis = []
        for deg in range(cutoff + 1):
            basis.extend(sorted(self._compositions(deg, modes)))
        self.basis = tuple(basis)
        self.index = {alpha: i for i, alpha in enumerate(self.basis)}
        self.dim = len(self.basis)
        self._ladders = {}

    @staticmethod
    def _compositions(total, parts):
        if parts == 1:
            yield (total,)
            return
        for head in range(total + 1):
            for rest in FockSpace._compositions(total - head, parts - 1):
                yield (head,) + rest

    def dim_at_cutoff(self, cutoff):
        cutoff = max(cutoff, 0)
        return _binom(cutoff + self.modes, self.modes)

    def lower(self, j):
        """Annihilation operator for mode j: a|alpha> = sqrt(alpha_j)|alpha - e_j>."""
        key = ("a", j)
        if key not in self._ladders:
            m = np.zeros((self.dim, self.dim), dtype=complex)
            for i, alpha in enumerate(self.basis):
                if alpha[j] == 0:
                    continue
                down = list(alpha)
                down[j] -= 1
                m[self.index[tuple(down)], i] = math.sqrt(alpha[j])
            self._ladders[key] = m
        return self._ladders[key]

    def raise_(self, j):
        key = ("adag", j)
        if key not in self._ladders:
            self._ladders[key] = self.lower(j).conj().T.copy()
        return self._ladders[key]


@dataclass
class FockOperator:
    """Dense complex matrix on a truncated Fock space."""

    space: FockSpace
    mat: np.ndarray

    def __post_init__(self):
        self.mat = np.asarray(self.mat, dtype=complex)
        if self.mat.shape != (self.space.dim, self.space.dim):
            raise ValueError("matrix shape does not match the space dimension")
        if not np.all(np.isfinite(self.mat.view(float))):
            raise ValueError("operator has non-finite entries")

    def __matmul__(self, other):
        self._check(other)
        return FockOperator(self.space, self.mat @ other.mat)

    def __add__(self, other):
        self._check(other)
        return FockOperator(self.space, self.mat + other.mat)

    def __sub__(self, other):
        self._check(other)
        return FockOperator(self.space, self.mat - other.mat)

    def __mul__(self, scalar):
        return FockOperator(self.space, self.mat * scalar)

    __rmul__ = __mul__

    def _check(self, other):
        if self.space is not other.space and (
            self.space.modes != other.space.modes or self.space.cutoff != other.space.cutoff
        ):
            raise ValueError("operators on different spaces")

    def dagger(self):
        return FockOperator(self.space, self.mat.conj().T.copy())

    def norm2(self):
        return float(np.linalg.norm(self.mat, 2))

    def trace(self):
        return complex(np.trace(self.mat))

    def buffered(self, buffer):
        """Compression onto occupation levels <= cutoff - buffer (a prefix of
        the graded basis)."""
        m = self.space.dim_at_cutoff(self.space.cutoff - buffer)
        return self.mat[:m, :m]

    def buffered_norm(self, buffer):
        return float(np.linalg.norm(self.buffered(buffer), 2))

    # -- dumps ---------------------------------------------------------------

    def save_binary(self, path):
        """Row-major little-endian float64 (re, im) pairs."""
        flat = np.empty((self.space.dim, self.space.dim, 2), dtype="<f8")
        flat[..., 0] = self.mat.real
        flat[..., 1] = self.mat.imag
        with open(path, "wb") as fh:
            fh.write(flat.tobytes(order="C"))

    def save_text(self, path):
        """Decimal dump with 17 significant digits, one matrix row per line,
        entries as alternating re im columns."""
        with open(path, "w") as fh:
            fh.write(f"{self.space.modes} {self.space.cutoff}\n")
            for row in self.mat:
                fields = []
                for z in row:
                    fields.append(f"{z.real:.17g}")
                    fields.append(f"{z.imag:.17g}")
                fh.write(" ".join(fields) + "\n")

    @classmethod
    def load_binary(cls, path, space):
        with open(path, "rb") as fh:
            raw = np.frombuffer(fh.read(), dtype="<f8")
        raw = raw.reshape(space.dim, space.dim, 2)
        return cls(space, raw[..., 0] + 1j * raw[..., 1])

    @classmethod
    def load_text(cls, path):
        with open(path) as fh:
            modes, cutoff = (int(x) for x in fh.readline().split())
            space = FockSpace(modes, cutoff)
            rows = []
            for line in fh:
                vals = [float(x) for x in line.split()]
                rows.append([complex(a, b) for a, b in zip(vals[::2], vals[1::2])])
        return cls(space, np.array(rows, dtype=complex))


# ---------------------------------------------------------------------------
# compatible complex structures


@dataclass
class CompatibleStructure:
    """A complex structure J compatible with the fiber form: J^2 = -I, the
    form is J-invariant, and g = omega(J., .) is positive definite.  Carries
    a Darboux frame in which the form is the standard block and J the
    standard complex structure."""

    jmat: np.ndarray
    metric: np.ndarray
    darboux_frame: np.ndarray
    omega: np.ndarray
    omega_condition: float

    @property
    def dim(self):
        return self.jmat.shape[0]


def _sym_sqrt(m):
    w, v = np.linalg.eigh(m)
    if np.min(w) <= 0:
        raise ValueError("matrix is not positive definite")
    return (v * np.sqrt(w)) @ v.T, (v / np.sqrt(w)) @ v.T


def _polar_antisymmetric(t):
    """Orthogonal polar factor T (-T^2)^{-1/2} of an invertible antisymmetric
    matrix, read off its real Schur form: the sign pattern of the 2x2 blocks.
    Exactly antisymmetric-orthogonal up to the Schur factor's roundoff, so
    the compatibility invariants hold at machine precision independent of
    conditioning."""
    from scipy.linalg import schur

    s, q = schur(t, output="real")
    n = t.shape[0]
    scale = max(1.0, float(np.max(np.abs(s))))
    j = np.zeros_like(t)
    k = 0
    while k < n:
        if k + 1 < n and abs(s[k, k + 1]) > 1e-13 * scale:
            sgn = 1.0 if s[k, k + 1] > 0 else -1.0
            j[k, k + 1] = sgn
            j[k + 1, k] = -sgn
            k += 2
        else:
            raise DegenerateFiberError("fiber form has a (near-)zero block")
    return q @ j @ q.T


def compatible_J(omega, g0=None, tol=1e-10):
    """Polar-decomposition construction of a compatible complex structure.

    With A defined by omega(u, v) = g0(u, A v), the structure is
    J = A (-A^2)^{-1/2} with the symmetric positive square root taken by
    eigendecomposition.  This orientation of A is the one for which
    omega(J., .) comes out positive definite.
    """
    omega = np.asarray(omega, dtype=float)
    n = omega.shape[0]
    if omega.shape != (n, n) or n % 2:
        raise ValueError("form matrix must be square of even dimension")
    if np.max(np.abs(omega + omega.T)) > 1e-12 * max(1.0, np.max(np.abs(omega))):
        raise ValueError("form matrix is not antisymmetric")
    sv = np.linalg.svd(omega, compute_uv=False)
    if sv[-1] < 1e-10 * sv[0]:
        raise DegenerateFiberError(
            f"fiber form is numerically singular (condition {sv[0] / max(sv[-1], 1e-300):.3e})"
        )
    cond = float(sv[0] / sv[-1])
    g0 = np.eye(n) if g0 is None else np.asarray(g0, dtype=float)
    if np.max(np.abs(g0 - g0.T)) > 1e-12 * max(1.0, np.max(np.abs(g0))):
        raise ValueError("seed metric is not symmetric")
    g0h, g0hinv = _sym_sqrt(g0)
    t = g0hinv @ omega @ g0hinv
    t = 0.5 * (t - t.T)
    jmat = g0hinv @ _polar_antisymmetric(t) @ g0h
    metric = jmat.T @ omega
    metric = 0.5 * (metric + metric.T)
    scale = max(1.0, float(np.max(np.abs(omega))))
    if np.max(np.abs(jmat @ jmat + np.eye(n))) > tol:
        raise ValueError("construction failed: J^2 != -I")
    if np.max(np.abs(jmat.T @ omega @ jmat - omega)) > tol * scale:
        raise ValueError("construction failed: omega not J-invariant")
    if np.min(np.linalg.eigvalsh(metric)) <= 0:
        raise ValueError("construction failed: metric not positive definite")
    frame = _darboux_frame(omega, jmat, metric)
    return CompatibleStructure(jmat, metric, frame, omega, cond)


def _darboux_frame(omega, jmat, metric):
    """Columns (u_1..u_n, -J u_1..-J u_n), g-orthonormal u's, in which the
    form is the standard block [[0, I], [-I, 0]] and J the standard complex
    structure."""
    dim = omega.shape[0]
    n = dim // 2
    us = []

    def g(a, b):
        return float(a @ metric @ b)

    for col in range(dim):
        if len(us) == n:
            break
        v = np.eye(dim)[:, col].copy()
        for u in us:
            ju = jmat @ u
            v = v - g(u, v) * u - g(ju, v) * ju
        nv = g(v, v)
        if nv < 1e-12:
            continue
        us.append(v / math.sqrt(nv))
    if len(us) < n:
        raise ValueError("failed to build a Darboux frame")
    cols = us + [-(jmat @ u) for u in us]
    frame = np.column_stack(cols)
    std = np.block([[np.zeros((n, n)), np.eye(n)], [-np.eye(n), np.zeros((n, n))]])
    if np.max(np.abs(frame.T @ omega @ frame - std)) > 1e-8 * max(1.0, np.max(np.abs(omega))):
        raise ValueError("Darboux frame verification failed")
    return frame


# ---------------------------------------------------------------------------
# the positive representation


@dataclass
class Representation:
    """Generator images of the osculating group for a positive parameter.

    In the Darboux frame the first block of generators maps to
    sqrt(lam/2) (a_j - a_j^dag) and the second to i sqrt(lam/2) (a_j + a_j^dag);
    the central generator goes to i lam Id.  Together with the half-cocycle
    group law this makes group multiplication intertwine with operator
    products (below the truncation boundary).
    """

    space: FockSpace
    structure: CompatibleStructure
    lam: float
    gens: list
    z_op: np.ndarray

    def generator(self, xi):
        xi = np.asarray(xi, dtype=float)
        m = np.zeros((self.space.dim, self.space.dim), dtype=complex)
        for c, gen in zip(xi, self.gens):
            if c:
                m = m + c * gen
        return m

    def group_element(self, xi, t=0.0):
        return FockOperator(self.space, _expm_antihermitian(self.generator(xi) + t * self.z_op))


def _expm_antihermitian(m):
    h = m / 1j
    scale = max(1.0, float(np.max(np.abs(h))))
    if np.max(np.abs(h - h.conj().T)) <= 1e-9 * scale:
        w, v = np.linalg.eigh(0.5 * (h + h.conj().T))
        return (v * np.exp(1j * w)) @ v.conj().T
    return expm(m)


def build_representation(space, structure, lam):
    if lam <= 0:
        raise ValueError("representation parameter must be positive")
    dim = structure.dim
    n = dim // 2
    if space.modes != n:
        raise ValueError("Fock space mode count does not match the fiber")
    c = math.sqrt(lam / 2.0)
    dar_ops = []
    for j in range(n):
        dar_ops.append(c * (space.lower(j) - space.raise_(j)))
    for j in range(n):
        dar_ops.append(1j * c * (space.lower(j) + space.raise_(j)))
    binv = np.linalg.inv(structure.darboux_frame)
    gens = []
    for m in range(dim):
        g = np.zeros((space.dim, space.dim), dtype=complex)
        for k in range(dim):
            if binv[k, m]:
                g = g + binv[k, m] * dar_ops[k]
        gens.append(g)
    z_op = 1j * lam * np.eye(space.dim, dtype=complex)
    return Representation(space, structure, lam, gens, z_op)


def vacuum_projector(space):
    m = np.zeros((space.dim, space.dim), dtype=complex)
    m[0, 0] = 1.0
    return FockOperator(space, m)


# ---------------------------------------------------------------------------
# symbol quantization


@dataclass
class QuantizeResult:
    operator: FockOperator
    c_norm: float
    quadrature_order: int
    doubling_shift: float


def quantize_symbol(symbol, lam, space, structure, quad_order=24, pad=24, entry_tol=1e-6):
    """Group-Fourier quantization of a Gaussian symbol by quadrature:

        Op(u) = c_norm * integral  u^hat(zeta) pi_lam(zeta, 0) d zeta,

    with the Euclidean Fourier transform of the Gaussian taken in closed
    form.  After absorbing all constants into the Gauss-Hermite change of
    variables the prefactor is c_norm = (2 pi)^{-n}, recorded on the result.

    The substitution is chosen so the quadrature weight matches the full
    Gaussian decay of the integrand (the transform's factor times the
    representation's own overlap decay), which keeps the residual integrand
    polynomial-dominated.  The integral runs on a padded space (``pad``
    extra levels) and the result is compressed back, keeping truncation
    flux away from the returned block.  Doubling the quadrature order must
    move no entry by more than ``entry_tol``.
    """
    if symbol.quad_form is None:
        return QuantizeResult(
            FockOperator(space, np.zeros((space.dim, space.dim), dtype=complex)),
            0.0,
            quad_order,
            0.0,
        )
    if lam <= 0:
        raise ValueError("quantization parameter must be positive")
    q = np.array([[float(x) for x in row] for row in symbol.quad_form], dtype=float)
    dim = q.shape[0]
    n = dim // 2
    if space.modes != n:
        raise ValueError("Fock space mode count does not match the symbol's fiber")
    qh, _ = _sym_sqrt(0.5 * (q + q.T))
    # (lam/4) (M s)^T Q^{-1} (M s) = |s|^2 / 2, i.e. the transform Gaussian
    # contributes exp(-|s|^2/2); the group element contributes the matching
    # half, so the full e^{-|s|^2} sits in the Gauss-Hermite weight.
    tmat = math.sqrt(2.0 / lam) * qh
    big = FockSpace(space.modes, space.cutoff + pad)
    rep = build_representation(big, structure, lam)
    c_norm = (2.0 * math.pi) ** (-n)

    def integrate(order):
        nodes, weights = np.polynomial.hermite.hermgauss(order)
        acc = np.zeros((big.dim, big.dim), dtype=complex)
        for combo in product(range(order), repeat=dim):
            svec = np.array([nodes[ix] for ix in combo])
            coef = math.exp(0.5 * float(svec @ svec))
            for ix in combo:
                coef *= weights[ix]
            if coef < 1e-20:
                continue
            zeta = tmat @ svec
            acc += coef * rep.group_element(zeta).mat
        return c_norm * acc

    coarse = integrate(quad_order)[: space.dim, : space.dim]
    fine = integrate(2 * quad_order)[: space.dim, : space.dim]
    shift = float(np.max(np.abs(fine - coarse)))
    if shift > entry_tol:
        raise QuadratureConvergenceError(
            f"doubling the quadrature order moved entries by {shift:.3e} > {entry_tol:.1e}"
        )
    return QuantizeResult(FockOperator(space, fine), c_norm, 2 * quad_order, shift)


# ---------------------------------------------------------------------------
# projector purification


@dataclass
class PurifyResult:
    matrix: np.ndarray
    residuals: list
    identity_defects: list
    iterations: int
    converged: bool

    def convergence_order(self, floor=1e-13):
        """Least-squares slope of log ||Delta_{k+1}|| against log ||Delta_k||
        over the steps above the floating-point floor."""
        xs, ys = [], []
        for a, b in zip(self.residuals, self.residuals[1:]):
            if a > floor and b > floor:
                xs.append(math.log(a))
                ys.append(math.log(b))
        if len(xs) < 2:
            return None
        slope = np.polyfit(xs, ys, 1)[0]
        return float(slope)


def purify_projector(s0, tol=1e-12, max_iter=25, hermitize=False):
    """Quadratically convergent projector purification

        S' = S - (2S - 1)(S^2 - S),

    iterated until ||S^2 - S||_2 <= tol.  Requires ||S0^2 - S0||_2 < 1/4,
    which makes the residual recurrence ||D'|| <= 3||D||^2 + 4||D||^3 a
    contraction.  At every step the exact algebraic identity

        S'^2 - S' = -3 D^2 + 4 D^3,   D = S^2 - S,

    is evaluated; its float defect, measured relative to the cubic operator
    scale (1 + ||S||)^3, is recorded in ``identity_defects``.
    """
    s = np.array(s0.mat if isinstance(s0, FockOperator) else s0, dtype=complex)
    if hermitize:
        s = 0.5 * (s + s.conj().T)
    ident = np.eye(s.shape[0], dtype=complex)
    delta = s @ s - s
    r = float(np.linalg.norm(delta, 2))
    if r >= 0.25:
        raise ValueError(f"purification precondition violated: ||S0^2 - S0|| = {r:.4f} >= 1/4")
    residuals = [r]
    defects = []
    converged = r <= tol
    iterations = 0
    while not converged and iterations < max_iter:
        s_next = s - (2.0 * s - ident) @ delta
        delta_next = s_next @ s_next - s_next
        rhs = -3.0 * delta @ delta + 4.0 * delta @ delta @ delta
        scale = (1.0 + np.linalg.norm(s, 2)) ** 3
        defects.append(float(np.linalg.norm(delta_next - rhs, 2)) / scale)
        s, delta = s_next, delta_next
        r = float(np.linalg.norm(delta, 2))
        residuals.append(r)
        iterations += 1
        converged = r <= tol
    if not converged:
        raise RuntimeError(f"purification did not reach {tol:.1e} in {max_iter} iterations")
    return PurifyResult(s, residuals, defects, iterations, converged)


# ---------------------------------------------------------------------------
# Bargmann-Fock Toeplitz compressions


def _complex_terms(f, modes):
    """Expose PolyFn, CPoly, or a raw {exponents: coefficient} mapping as
    exponent -> complex coefficient."""
    if isinstance(f, CPoly):
        out = {}
        for exp, c in f.re.terms.items():
            out[exp] = out.get(exp, 0j) + complex(c)
        for exp, c in f.im.terms.items():
            out[exp] = out.get(exp, 0j) + 1j * complex(c)
        if f.chart.dim != 2 * modes:
            raise ValueError("chart dimension must be twice the mode count")
        return out
    if isinstance(f, PolyFn):
        if f.chart.dim != 2 * modes:
            raise ValueError("chart dimension must be twice the mode count")
        return {exp: complex(c) for exp, c in f.terms.items()}
    if isinstance(f, dict):
        for exp in f:
            if len(exp) != 2 * modes:
                raise ValueError("exponent tuples must have one slot per chart axis")
        return {exp: complex(c) for exp, c in f.items()}
    raise TypeError("expected PolyFn, CPoly, or an exponent mapping")


def _zzbar_terms(f, modes):
    """Rewrite a polynomial in (x_1..x_n, y_1..y_n) through z_j = x_j + i y_j:
    x = (z + zbar)/2, y = -i (z - zbar)/2.  All conversion coefficients are
    dyadic, so plain complex arithmetic stays exact."""
    terms = _complex_terms(f, modes)
    out = {}
    for exp, coeff in terms.items():
        expansions = []
        for j in range(modes):
            p, qq = exp[j], exp[modes + j]
            mode_terms = {}
            for k in range(p + 1):
                for l in range(qq + 1):
                    c = (
                        _binom(p, k)
                        * _binom(qq, l)
                        * (0.5**p)
                        * ((-1j / 2) ** qq)
                        * ((-1) ** (qq - l))
                    )
                    key = (k + l, p + qq - k - l)
                    mode_terms[key] = mode_terms.get(key, 0j) + c
            expansions.append(mode_terms)
        stack = [((), (), coeff)]
        for mode_terms in expansions:
            stack = [
                (za + (dz,), zb + (dzb,), c * cc)
                for za, zb, c in stack
                for (dz, dzb), cc in mode_terms.items()
            ]
        for za, zb, c in stack:
            out[(za, zb)] = out.get((za, zb), 0j) + c
    return {k: v for k, v in out.items() if v != 0}


def bargmann_toeplitz(f, hbar, space):
    """Compression of multiplication by a polynomial to the truncated
    Bargmann space with weight exp(-|z|^2/hbar) and orthonormal basis
    z^alpha / sqrt(hbar^|alpha| alpha!).

    Matrix entries are closed-form Gaussian moments (factorials), no
    quadrature: per mode, <e_beta, z^a zbar^b e_alpha> is nonzero only for
    beta = alpha + a - b and equals hbar^{(a+b)/2} (alpha+a)! /
    sqrt(alpha! beta!).
    """
    if hbar <= 0:
        raise ValueError("hbar must be positive")
    zz = _zzbar_terms(f, space.modes)
    mat = np.zeros((space.dim, space.dim), dtype=complex)
    for (za, zb), coeff in zz.items():
        halfpow = sum(za) + sum(zb)
        for i, alpha in enumerate(space.basis):
            beta = tuple(al + a - b for al, a, b in zip(alpha, za, zb))
            if any(b < 0 for b in beta) or sum(beta) > space.cutoff:
                continue
            val = hbar ** (halfpow / 2.0)
            for al, a, be in zip(alpha, za, beta):
                val *= math.factorial(al + a) / math.sqrt(
                    math.factorial(al) * math.factorial(be)
                )
            mat[space.index[beta], i] += coeff * val
    return FockOperator(space, mat)


def coherent_vector(space, w, hbar):
    """Truncated coefficient vector of the coherent state at w (components
    wbar^alpha / sqrt(hbar^|alpha| alpha!))."""
    w = np.asarray(w, dtype=complex)
    v = np.empty(space.dim, dtype=complex)
    for i, alpha in enumerate(space.basis):
        acc = 1.0 + 0j
        for wj, aj in zip(np.conj(w), alpha):
            acc *= wj**aj / math.sqrt(math.factorial(aj))
        v[i] = acc / math.sqrt(hbar ** sum(alpha))
    return v


def berezin_symbol(op, w, hbar):
    """Coherent-state diagonal expectation <c_w, T c_w> / <c_w, c_w>."""
    v = coherent_vector(op.space, w, hbar)
    denom = float(np.real(np.vdot(v, v)))
    return complex(np.vdot(v, op.mat @ v) / denom)

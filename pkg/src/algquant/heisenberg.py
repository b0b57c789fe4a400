"""Fiberwise step-2 nilpotent group structure on the osculating bundle:
truncated Baker-Campbell-Hausdorff multiplication, parabolic dilations,
splitting of a fiber into its Heisenberg and abelian parts, and homogeneous
symbols including the Gaussian ground-state symbol.

Fibers with exact rational data support exact group arithmetic; float data
is accepted everywhere except the exact splitting.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

from . import ratmat


def _is_exact(x):
    return isinstance(x, (int, Fraction))


class OsculatingFiber:
    """One fiber of the osculating bundle: a base point and the antisymmetric
    form on the fiber (possibly degenerate)."""

    __slots__ = ("base_point", "omega", "dim", "exact")

    def __init__(self, omega, base_point=()):
        omega = tuple(tuple(row) for row in omega)
        n = len(omega)
        if any(len(row) != n for row in omega):
            raise ValueError("form matrix must be square")
        exact = all(_is_exact(x) for row in omega for x in row)
        for i in range(n):
            for j in range(n):
                s = omega[i][j] + omega[j][i]
                if exact:
                    if s != 0:
                        raise ValueError("form matrix is not antisymmetric")
                elif abs(s) > 1e-14:
                    raise ValueError("form matrix is not antisymmetric within 1e-14")
        self.omega = omega
        self.dim = n
        self.base_point = tuple(base_point)
        self.exact = exact

    def pair(self, u, v):
        """omega_x(u, v)."""
        acc = 0
        for i in range(self.dim):
            if u[i] == 0:
                continue
            row = self.omega[i]
            for j in range(self.dim):
                if row[j] != 0 and v[j] != 0:
                    acc += u[i] * row[j] * v[j]
        return acc


@dataclass(frozen=True)
class GroupElement:
    xi: tuple
    t: object

    def __post_init__(self):
        object.__setattr__(self, "xi", tuple(self.xi))


def bch_multiply(fiber, g, h):
    """(xi, t) . (xi', t') = (xi + xi', t + t' + omega(xi, xi')/2).

    Step-2 nilpotency truncates Baker-Campbell-Hausdorff after the first
    commutator, so this product is globally associative.
    """
    if len(g.xi) != fiber.dim or len(h.xi) != fiber.dim:
        raise ValueError("group element dimension does not match the fiber")
    c = fiber.pair(g.xi, h.xi)
    half = Fraction(1, 2) if fiber.exact and _is_exact(c) else 0.5
    return GroupElement(
        tuple(a + b for a, b in zip(g.xi, h.xi)),
        g.t + h.t + half * c,
    )


def group_identity(fiber):
    zero = Fraction(0) if fiber.exact else 0.0
    return GroupElement((zero,) * fiber.dim, zero)


def group_inverse(fiber, g):
    return GroupElement(tuple(-a for a in g.xi), -g.t)


def dilation(fiber, lam, g):
    """Parabolic dilation: weight 1 on the fiber, weight 2 on the center."""
    if lam <= 0:
        raise ValueError("dilation parameter must be positive")
    return GroupElement(tuple(lam * a for a in g.xi), lam * lam * g.t)


def fiber_decompose(fiber):
    """Split the fiber as V + K with K the radical of the form and the form
    nondegenerate on V; the blocks are automatically orthogonal because K is
    the kernel.  Exact rational arithmetic only.

    Returns (v_basis, k_basis) as lists of column vectors.
    """
    if not fiber.exact:
        raise ValueError("exact splitting requires rational fiber data")
    omega = ratmat.as_fraction_matrix(fiber.omega)
    n = fiber.dim
    k_basis = ratmat.kernel_basis(omega)
    v_basis = []
    spanning = [list(v) for v in k_basis]
    current_rank = len(k_basis)
    for i in range(n):
        cand = [Fraction(1) if j == i else Fraction(0) for j in range(n)]
        test = spanning + [cand]
        if ratmat.rank(test) > current_rank:
            v_basis.append(cand)
            spanning = test
            current_rank += 1
    return v_basis, k_basis


@dataclass(frozen=True)
class HomogeneousSymbol:
    """A function on the dual of the osculating fiber, homogeneous of the
    given order under the transposed dilations: u(lam xi, lam^2 eta) =
    lam^order u(xi, eta) for lam > 0.

    Gaussian symbols keep their quadratic form around (``quad_form``) so the
    operator quantization can Fourier-transform them in closed form.
    """

    fiber: OsculatingFiber
    order: int
    evaluator: object
    quad_form: tuple | None = None

    def __call__(self, xi, eta):
        return self.evaluator(xi, eta)


def zero_symbol(fiber, order=0):
    return HomogeneousSymbol(fiber, order, lambda xi, eta: 0.0, None)


def _check_compatible(fiber, jmat):
    n = fiber.dim
    jmat = tuple(tuple(row) for row in jmat)
    if len(jmat) != n or any(len(row) != n for row in jmat):
        raise ValueError("complex structure matrix has wrong shape")
    exact = fiber.exact and all(_is_exact(x) for row in jmat for x in row)

    def matmul(a, b):
        return [
            [sum(a[i][k] * b[k][j] for k in range(n)) for j in range(n)]
            for i in range(n)
        ]

    jj = matmul(jmat, jmat)
    for i in range(n):
        for j in range(n):
            want = -1 if i == j else 0
            bad = (jj[i][j] != want) if exact else abs(jj[i][j] - want) > 1e-10
            if bad:
                raise ValueError("compatibility check failed: J^2 != -I")
    jt = [list(col) for col in zip(*jmat)]
    jtoj = matmul(matmul(jt, fiber.omega), jmat)
    for i in range(n):
        for j in range(n):
            diff = jtoj[i][j] - fiber.omega[i][j]
            bad = (diff != 0) if exact else abs(diff) > 1e-10
            if bad:
                raise ValueError("compatibility check failed: omega(J.,J.) != omega")
    gmat = matmul(jt, fiber.omega)
    for i in range(n):
        for j in range(n):
            diff = gmat[i][j] - gmat[j][i]
            bad = (diff != 0) if exact else abs(diff) > 1e-10
            if bad:
                raise ValueError("compatibility check failed: omega(J.,.) not symmetric")
    if exact:
        if not ratmat.is_positive_definite(ratmat.as_fraction_matrix(gmat)):
            raise ValueError("compatibility check failed: omega(J.,.) not positive definite")
    else:
        import numpy as np

        if min(np.linalg.eigvalsh(np.array(gmat, dtype=float))) <= 1e-10:
            raise ValueError("compatibility check failed: omega(J.,.) not positive definite")
    return gmat


def ground_state_symbol(fiber, jmat):
    """The order-0 symbol exp(-omega(J xi, xi)/eta) on the sheet eta > 0,
    extended by zero through eta <= 0 (the opposite sheet and the characters
    carry the zero value).
    """
    gmat = _check_compatible(fiber, jmat)
    n = fiber.dim

    def evaluator(xi, eta):
        if eta <= 0:
            return 0.0
        q = 0.0
        for i in range(n):
            if xi[i] == 0:
                continue
            for j in range(n):
                if gmat[i][j] != 0 and xi[j] != 0:
                    q += float(gmat[i][j]) * float(xi[i]) * float(xi[j])
        return math.exp(-q / float(eta))

    return HomogeneousSymbol(fiber, 0, evaluator, tuple(tuple(row) for row in gmat))

"""Exact linear algebra over the rationals.

Matrices are lists of lists of ``fractions.Fraction``.  Everything here is
small and dense (fiber ranks and chart dimensions stay in single digits), so
plain Gauss-Jordan elimination with exact pivots is the right tool.
"""

from __future__ import annotations

from fractions import Fraction


def as_fraction_matrix(rows):
    return [[Fraction(x) for x in row] for row in rows]


def identity(n):
    return [[Fraction(1) if i == j else Fraction(0) for j in range(n)] for i in range(n)]


def transpose(m):
    return [list(col) for col in zip(*m)]


def mat_mul(a, b):
    n, k = len(a), len(b)
    p = len(b[0]) if b else 0
    out = [[Fraction(0)] * p for _ in range(n)]
    for i in range(n):
        for t in range(k):
            ait = a[i][t]
            if ait == 0:
                continue
            brow = b[t]
            orow = out[i]
            for j in range(p):
                orow[j] += ait * brow[j]
    return out


def mat_vec(a, v):
    return [sum((row[j] * v[j] for j in range(len(v))), Fraction(0)) for row in a]


def _rref(m):
    """Reduced row echelon form; returns (rref, pivot column list)."""
    m = [row[:] for row in m]
    rows = len(m)
    cols = len(m[0]) if rows else 0
    pivots = []
    r = 0
    for c in range(cols):
        pivot = next((i for i in range(r, rows) if m[i][c] != 0), None)
        if pivot is None:
            continue
        m[r], m[pivot] = m[pivot], m[r]
        inv = 1 / m[r][c]
        m[r] = [x * inv for x in m[r]]
        for i in range(rows):
            if i != r and m[i][c] != 0:
                f = m[i][c]
                m[i] = [a - f * b for a, b in zip(m[i], m[r])]
        pivots.append(c)
        r += 1
        if r == rows:
            break
    return m, pivots


def rank(m):
    if not m or not m[0]:
        return 0
    return len(_rref(m)[1])


def kernel_basis(m):
    """Basis of the right kernel of ``m`` (list of column vectors)."""
    if not m:
        return []
    cols = len(m[0])
    red, pivots = _rref(m)
    free = [c for c in range(cols) if c not in pivots]
    basis = []
    for fc in free:
        v = [Fraction(0)] * cols
        v[fc] = Fraction(1)
        for r, pc in enumerate(pivots):
            v[pc] = -red[r][fc]
        basis.append(v)
    return basis


def inverse(m):
    n = len(m)
    aug = [list(m[i]) + identity(n)[i] for i in range(n)]
    red, pivots = _rref(aug)
    if pivots[:n] != list(range(n)):
        raise ValueError("matrix is singular over the rationals")
    return [row[n:] for row in red]


def det(m):
    n = len(m)
    m = [row[:] for row in m]
    sign = Fraction(1)
    result = Fraction(1)
    for c in range(n):
        pivot = next((i for i in range(c, n) if m[i][c] != 0), None)
        if pivot is None:
            return Fraction(0)
        if pivot != c:
            m[c], m[pivot] = m[pivot], m[c]
            sign = -sign
        result *= m[c][c]
        inv = 1 / m[c][c]
        for i in range(c + 1, n):
            if m[i][c] != 0:
                f = m[i][c] * inv
                m[i] = [a - f * b for a, b in zip(m[i], m[c])]
    return sign * result


def solve(m, rhs):
    n = len(m)
    aug = [list(m[i]) + [rhs[i]] for i in range(n)]
    red, pivots = _rref(aug)
    if pivots[: len(pivots)] != list(range(len(pivots))) or len(pivots) < n:
        raise ValueError("singular system")
    return [red[i][n] for i in range(n)]


def is_positive_definite(m):
    """Sylvester criterion on an exact symmetric matrix."""
    n = len(m)
    for k in range(1, n + 1):
        minor = [row[:k] for row in m[:k]]
        if det(minor) <= 0:
            return False
    return True

import math
import random
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from algquant import (
    GroupElement,
    OsculatingFiber,
    bch_multiply,
    dilation,
    fiber_decompose,
    ground_state_symbol,
    group_identity,
    group_inverse,
    zero_symbol,
)
from algquant import ratmat

STD = OsculatingFiber([[0, 1], [-1, 0]])


def rational_elements(dim):
    rat = st.fractions(
        min_value=-5, max_value=5, max_denominator=6
    )
    return st.builds(
        GroupElement,
        st.tuples(*[rat for _ in range(dim)]),
        rat,
    )


# -- group law -----------------------------------------------------------------


def test_identity_element():
    g = GroupElement((Fraction(2), Fraction(-1)), Fraction(3))
    assert bch_multiply(STD, group_identity(STD), g) == g
    assert bch_multiply(STD, g, group_identity(STD)) == g


def test_bch_half_cocycle():
    g = GroupElement((Fraction(1), Fraction(0)), Fraction(0))
    h = GroupElement((Fraction(0), Fraction(1)), Fraction(0))
    out = bch_multiply(STD, g, h)
    assert out == GroupElement((Fraction(1), Fraction(1)), Fraction(1, 2))


def test_inverse():
    g = GroupElement((Fraction(3, 2), Fraction(-2)), Fraction(5, 3))
    assert bch_multiply(STD, g, group_inverse(STD, g)) == group_identity(STD)


@given(rational_elements(2), rational_elements(2), rational_elements(2))
def test_bch_associativity(g, h, k):
    lhs = bch_multiply(STD, bch_multiply(STD, g, h), k)
    rhs = bch_multiply(STD, g, bch_multiply(STD, h, k))
    assert lhs == rhs


def test_dimension_mismatch():
    with pytest.raises(ValueError):
        bch_multiply(STD, GroupElement((Fraction(1),), Fraction(0)), group_identity(STD))


# -- dilations -----------------------------------------------------------------


def test_dilation_weights():
    g = GroupElement((Fraction(1), Fraction(0)), Fraction(3))
    assert dilation(STD, 2, g) == GroupElement((Fraction(2), Fraction(0)), Fraction(12))


def test_dilation_identity():
    g = GroupElement((Fraction(2), Fraction(-5)), Fraction(7))
    assert dilation(STD, 1, g) == g


def test_dilation_positivity_guard():
    with pytest.raises(ValueError):
        dilation(STD, 0, group_identity(STD))
    with pytest.raises(ValueError):
        dilation(STD, -2, group_identity(STD))


@given(rational_elements(2), rational_elements(2))
def test_dilation_homomorphism(g, h):
    lam = Fraction(3, 2)
    lhs = dilation(STD, lam, bch_multiply(STD, g, h))
    rhs = bch_multiply(STD, dilation(STD, lam, g), dilation(STD, lam, h))
    assert lhs == rhs


def test_dilation_composition():
    g = GroupElement((Fraction(1), Fraction(2)), Fraction(-1))
    lhs = dilation(STD, Fraction(2), dilation(STD, Fraction(3), g))
    assert lhs == dilation(STD, Fraction(6), g)


# -- decomposition --------------------------------------------------------------


def test_decompose_nondegenerate_has_no_radical():
    v, k = fiber_decompose(STD)
    assert len(v) == 2 and len(k) == 0


def test_decompose_zero_form():
    fib = OsculatingFiber([[0, 0], [0, 0]])
    v, k = fiber_decompose(fib)
    assert len(v) == 0 and len(k) == 2


def test_decompose_rank_two_in_four():
    fib = OsculatingFiber(
        [[0, 1, 0, 0], [-1, 0, 0, 0], [0, 0, 0, 0], [0, 0, 0, 0]]
    )
    v, k = fiber_decompose(fib)
    assert len(v) == 2 and len(k) == 2


def rand_rank_deficient(rng, dim, rank2):
    """Antisymmetric rational matrix of rank 2*rank2 in the given dimension."""
    while True:
        b = [
            [Fraction(rng.randint(-3, 3)) for _ in range(dim)]
            for _ in range(2 * rank2)
        ]
        if ratmat.rank(b) < 2 * rank2:
            continue
        m = [[Fraction(0)] * dim for _ in range(dim)]
        for p in range(rank2):
            u, v = b[2 * p], b[2 * p + 1]
            for i in range(dim):
                for j in range(dim):
                    m[i][j] += u[i] * v[j] - v[i] * u[j]
        if ratmat.rank(m) == 2 * rank2:
            return m


def test_decompose_reconstructs_form_exactly():
    rng = random.Random(5)
    for _ in range(8):
        dim = rng.choice([3, 4, 5])
        rank2 = rng.choice([1, (dim // 2)])
        m = rand_rank_deficient(rng, dim, rank2)
        fib = OsculatingFiber(m)
        vbasis, kbasis = fiber_decompose(fib)
        assert len(vbasis) == 2 * rank2
        cols = vbasis + kbasis
        assert ratmat.rank(cols) == dim
        b = ratmat.transpose(cols)
        gram = ratmat.mat_mul(ratmat.transpose(b), ratmat.mat_mul(m, b))
        nv = len(vbasis)
        # the V block is nondegenerate, everything touching K vanishes
        assert ratmat.det([row[:nv] for row in gram[:nv]]) != 0
        for i in range(dim):
            for j in range(dim):
                if i >= nv or j >= nv:
                    assert gram[i][j] == 0
        # reconstructing the form from the blocks gives back the input
        binv = ratmat.inverse(b)
        recon = ratmat.mat_mul(
            ratmat.transpose(binv), ratmat.mat_mul(gram, binv)
        )
        assert recon == ratmat.as_fraction_matrix(m)


def test_decompose_rejects_float_fibers():
    with pytest.raises(ValueError):
        fiber_decompose(OsculatingFiber([[0.0, 1.0], [-1.0, 0.0]]))


# -- ground-state symbol ---------------------------------------------------------


J_STD = [[0, 1], [-1, 0]]


def test_ground_state_at_origin():
    s0 = ground_state_symbol(STD, J_STD)
    assert s0((0, 0), 1.0) == 1.0
    assert s0((0, 0), 97.0) == 1.0


def test_ground_state_unit_vector():
    s0 = ground_state_symbol(STD, J_STD)
    assert abs(s0((1.0, 0.0), 1.0) - math.exp(-1)) < 1e-15


def test_ground_state_negative_sheet_vanishes():
    s0 = ground_state_symbol(STD, J_STD)
    assert s0((1.0, 2.0), -1.0) == 0.0
    assert s0((1.0, 2.0), 0.0) == 0.0


def test_ground_state_homogeneity_sampled():
    s0 = ground_state_symbol(STD, J_STD)
    rng = random.Random(9)
    for lam in (0.5, 2.0, 10.0):
        for _ in range(20):
            xi = (rng.uniform(-2, 2), rng.uniform(-2, 2))
            eta = rng.uniform(0.2, 3.0)
            a = s0(xi, eta)
            b = s0((lam * xi[0], lam * xi[1]), lam * lam * eta)
            assert abs(a - b) <= 1e-12 * max(1.0, abs(a))


def test_incompatible_j_rejected():
    with pytest.raises(ValueError) as err:
        ground_state_symbol(STD, [[0, 2], [-2, 0]])
    assert "J^2" in str(err.value)
    with pytest.raises(ValueError) as err:
        ground_state_symbol(STD, [[0, -1], [1, 0]])
    assert "positive definite" in str(err.value)


def test_degenerate_form_has_no_compatible_structure():
    fib = OsculatingFiber([[0, 0], [0, 0]])
    with pytest.raises(ValueError):
        ground_state_symbol(fib, J_STD)


def test_zero_symbol():
    s = zero_symbol(STD)
    assert s((1.0, 1.0), 2.0) == 0.0 and s.quad_form is None

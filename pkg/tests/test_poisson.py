import random
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from algquant import (
    AlgebroidPresentation,
    Chart,
    NondegeneracyError,
    PoissonBivector,
    PolyFn,
    SymplecticFormOnFrame,
    central_extension,
    check_axioms,
    check_symplectic,
    contact_form_check,
    dirac_bracket_on_S,
    induced_poisson,
    linear_poisson_bracket,
    parse_poly,
    poisson_bracket,
    schouten_jacobi,
)
from algquant import ratmat
from algquant.poisson import FiberLinearFn
from conftest import (
    diagonal_anchor_presentation,
    random_constant_symplectic,
    random_poly,
)

CH = Chart(("f", "x2"))


def b_setup():
    A = AlgebroidPresentation.build(CH, 2, [["f", "0"], ["0", "1"]], {})
    return A, SymplecticFormOnFrame.from_entries(A, {(0, 1): 1})


def zero_setup():
    A = AlgebroidPresentation.build(CH, 2, [["f", "0"], ["0", "f"]], {(0, 1, 1): 1})
    return A, SymplecticFormOnFrame.from_entries(A, {(0, 1): 1})


def tangent_setup():
    ch = Chart(("x", "y"))
    A = AlgebroidPresentation.build(ch, 2, [["1", "0"], ["0", "1"]], {})
    return A, SymplecticFormOnFrame.from_entries(A, {(0, 1): 1})


# -- check_symplectic ---------------------------------------------------------


def test_b_frame_symplectic():
    A, om = b_setup()
    v = check_symplectic(A, om)
    assert v.passed and v.determinant == PolyFn.const(CH, 1)


def test_tangent_symplectic():
    A, om = tangent_setup()
    assert check_symplectic(A, om).passed


def test_nonconstant_determinant_rejected():
    A, _ = b_setup()
    om = SymplecticFormOnFrame.from_entries(A, {(0, 1): "f"})
    v = check_symplectic(A, om)
    assert v.closed           # rank 2: closedness is automatic
    assert not v.nondegenerate
    assert v.determinant == parse_poly("f^2", CH)
    with pytest.raises(NondegeneracyError):
        induced_poisson(A, om)


# -- induced_poisson ----------------------------------------------------------


def test_b_frame_poisson_matches_printed_tensor():
    A, om = b_setup()
    pi = induced_poisson(A, om)
    assert pi.matrix[0][1] == parse_poly("f", CH)
    assert pi.matrix[1][0] == parse_poly("-f", CH)


def test_zero_frame_poisson_matches_printed_tensor():
    A, om = zero_setup()
    pi = induced_poisson(A, om)
    assert pi.matrix[0][1] == parse_poly("f^2", CH)


def test_tangent_poisson_is_inverse_form():
    A, om = tangent_setup()
    pi = induced_poisson(A, om)
    assert pi.matrix[0][1] == PolyFn.const(A.chart, 1)


def test_point_base_poisson_is_empty():
    ch = Chart(())
    A = AlgebroidPresentation.build(ch, 2, [[], []], {(0, 1, 1): 1})
    om = SymplecticFormOnFrame.from_entries(A, {(0, 1): 1})
    assert check_symplectic(A, om).passed
    pi = induced_poisson(A, om)
    assert pi.chart.dim == 0


# -- schouten -----------------------------------------------------------------


def test_schouten_two_dims_vacuous():
    A, om = b_setup()
    assert schouten_jacobi(induced_poisson(A, om)).is_zero()


def test_schouten_product_structure_vanishes():
    ch = Chart(("f", "x2", "x3", "x4"))
    zero = PolyFn.zero(ch)
    f = parse_poly("f", ch)
    one = PolyFn.const(ch, 1)
    m = [[zero] * 4 for _ in range(4)]
    m[0][1], m[1][0] = f, -f
    m[2][3], m[3][2] = one, -one
    assert schouten_jacobi(PoissonBivector(ch, m)).is_zero()


def test_schouten_mutation_witness():
    ch = Chart(("x1", "x2", "x3", "x4"))
    zero = PolyFn.zero(ch)
    x3 = parse_poly("x3", ch)
    one = PolyFn.const(ch, 1)
    m = [[zero] * 4 for _ in range(4)]
    m[0][1], m[1][0] = x3, -x3
    m[2][3], m[3][2] = one, -one
    tri = schouten_jacobi(PoissonBivector(ch, m))
    assert not tri.is_zero()
    key, witness = tri.first_nonzero()
    # pi^{23} d_{x3} pi^{12} feeds the (1,2,4) slot
    assert key == (0, 1, 3)
    assert witness == PolyFn.const(ch, 1)


@settings(max_examples=25)
@given(st.integers(0, 10_000), st.integers(2, 4).filter(lambda d: d % 2 == 0))
def test_schouten_vanishes_for_induced_bivectors(seed, dim):
    rng = random.Random(seed)
    A = diagonal_anchor_presentation(rng, dim)
    om = random_constant_symplectic(rng, A)
    assert check_symplectic(A, om).passed
    pi = induced_poisson(A, om)
    assert schouten_jacobi(pi).is_zero()


# -- poisson_bracket ----------------------------------------------------------


def test_bracket_examples():
    A, om = b_setup()
    pi = induced_poisson(A, om)
    f, x2 = parse_poly("f", CH), parse_poly("x2", CH)
    assert poisson_bracket(pi, f, x2) == f
    assert poisson_bracket(pi, f, f).is_zero()
    At, omt = tangent_setup()
    pit = induced_poisson(At, omt)
    x, y = parse_poly("x", At.chart), parse_poly("y", At.chart)
    assert poisson_bracket(pit, x, y) == PolyFn.const(At.chart, 1)


def test_bracket_jacobi_on_valid_bivectors():
    rng = random.Random(7)
    for setup in (b_setup, zero_setup, tangent_setup):
        A, om = setup()
        pi = induced_poisson(A, om)
        assert schouten_jacobi(pi).is_zero()
        for _ in range(5):
            f = random_poly(A.chart, rng)
            g = random_poly(A.chart, rng)
            h = random_poly(A.chart, rng)
            total = (
                poisson_bracket(pi, poisson_bracket(pi, f, g), h)
                + poisson_bracket(pi, poisson_bracket(pi, g, h), f)
                + poisson_bracket(pi, poisson_bracket(pi, h, f), g)
            )
            assert total.is_zero()


def test_leaf_containment_at_rational_points():
    """Column space of the evaluated bivector sits inside the column space
    of the evaluated anchor, by exact rank computation."""
    rng = random.Random(13)
    for setup in (b_setup, zero_setup, tangent_setup):
        A, om = setup()
        pi = induced_poisson(A, om)
        d, r = A.chart.dim, A.rank
        for _ in range(10):
            point = tuple(Fraction(rng.randint(-6, 6), rng.randint(1, 4)) for _ in range(d))
            anchor_cols = [
                [A.anchor[i][a].eval(point) for i in range(r)] for a in range(d)
            ]
            pi_cols = [
                [pi.matrix[a][b].eval(point) for b in range(d)] for a in range(d)
            ]
            joint = [anchor_cols[a] + pi_cols[a] for a in range(d)]
            assert ratmat.rank(joint) == ratmat.rank(anchor_cols)


# -- central extension --------------------------------------------------------


def test_b_extension_axioms_pass():
    A, om = b_setup()
    assert check_axioms(central_extension(A, om).ext).passed


def test_tangent_extension_is_heisenberg():
    A, om = tangent_setup()
    E = central_extension(A, om)
    assert check_axioms(E.ext).passed
    # [e1, e2] = Z and Z central
    from algquant import bracket_sections

    br = bracket_sections(E.ext.frame_section(0), E.ext.frame_section(1))
    assert br == E.ext.frame_section(2)
    assert bracket_sections(E.ext.frame_section(2), E.ext.frame_section(0)).is_zero()


def b2_setup(omega_entries):
    ch = Chart(("f", "x2", "x3", "x4"))
    anchor = [
        ["f", "0", "0", "0"],
        ["0", "1", "0", "0"],
        ["0", "0", "1", "0"],
        ["0", "0", "0", "1"],
    ]
    A = AlgebroidPresentation.build(ch, 4, anchor, {})
    return A, SymplecticFormOnFrame.from_entries(A, omega_entries)


def test_extension_equivalence_both_directions():
    """check_axioms(extension) passes iff the form is closed."""
    # closed direction (rank 4, nontrivial closedness)
    A, om = b2_setup({(0, 2): 1, (1, 3): 1})
    assert check_symplectic(A, om).closed
    assert check_axioms(central_extension(A, om).ext).passed
    # non-closed direction
    A2, om2 = b2_setup({(0, 2): "x2", (1, 3): 1})
    assert not check_symplectic(A2, om2).closed
    rep = check_axioms(central_extension(A2, om2).ext)
    assert not rep.jacobi.passed
    assert rep.antisymmetry.passed and rep.anchor_morphism.passed


def test_rank2_nonconstant_form_is_trivially_closed():
    """On a rank-2 frame every 2-form is closed (no 3-index slots), so the
    extension satisfies Jacobi even for a base-dependent form."""
    A, _ = b_setup()
    om = SymplecticFormOnFrame.from_entries(A, {(0, 1): "x2"})
    assert check_symplectic(A, om).closed
    assert check_axioms(central_extension(A, om).ext).passed


@settings(max_examples=20)
@given(st.integers(0, 10_000))
def test_extension_equivalence_randomized(seed):
    rng = random.Random(seed)
    A = diagonal_anchor_presentation(rng, 3)
    entries = {
        (i, j): random_poly(A.chart, rng, 1)
        for i in range(3)
        for j in range(i + 1, 3)
    }
    om = SymplecticFormOnFrame.from_entries(A, entries)
    closed = check_symplectic(A, om).closed
    assert check_axioms(central_extension(A, om).ext).passed == closed


# -- contact form -------------------------------------------------------------


def test_contact_form_on_bundled_extensions():
    for setup in (b_setup, zero_setup, tangent_setup):
        A, om = setup()
        assert contact_form_check(central_extension(A, om)).passed


def test_contact_form_fails_for_nonclosed_form():
    A, om = b2_setup({(0, 2): "x2", (1, 3): 1})
    v = contact_form_check(central_extension(A, om))
    assert v.matches_pullback  # holds by construction of the extension
    assert not v.differential_closed
    assert "d(d theta)" in v.closed_witness


# -- linear Poisson bracket ---------------------------------------------------


def test_linear_bracket_generators():
    A, om = tangent_setup()
    E = central_extension(A, om)
    ch = A.chart
    xi1 = FiberLinearFn.xi(ch, 2, 0)
    xi2 = FiberLinearFn.xi(ch, 2, 1)
    eta = FiberLinearFn.eta(ch, 2)
    assert linear_poisson_bracket(E, xi1, xi2) == eta
    assert linear_poisson_bracket(E, eta, xi1).is_zero()
    xp = FiberLinearFn.from_base(parse_poly("x", ch), 2)
    assert linear_poisson_bracket(E, xi1, xp) == FiberLinearFn.from_base(
        PolyFn.const(ch, 1), 2
    )


def test_linear_bracket_anchor_application_b_frame():
    A, om = b_setup()
    E = central_extension(A, om)
    xi1 = FiberLinearFn.xi(CH, 2, 0)
    fp = FiberLinearFn.from_base(parse_poly("f", CH), 2)
    assert linear_poisson_bracket(E, xi1, fp) == fp  # rho(e1) f = f


def test_linear_bracket_pullbacks_commute():
    A, om = b_setup()
    E = central_extension(A, om)
    rng = random.Random(3)
    f = FiberLinearFn.from_base(random_poly(CH, rng), 2)
    g = FiberLinearFn.from_base(random_poly(CH, rng), 2)
    assert linear_poisson_bracket(E, f, g).is_zero()


def test_linear_bracket_jacobi_randomized():
    A, om = tangent_setup()
    E = central_extension(A, om)
    ch = A.chart
    rng = random.Random(21)

    def rand_fiber():
        acc = FiberLinearFn.from_base(random_poly(ch, rng, 1), 2)
        for i in range(2):
            acc = acc + FiberLinearFn.xi(ch, 2, i) * FiberLinearFn.from_base(
                random_poly(ch, rng, 1), 2
            )
        acc = acc + FiberLinearFn.eta(ch, 2) * Fraction(rng.randint(-2, 2))
        return acc

    for _ in range(5):
        F, G, H = rand_fiber(), rand_fiber(), rand_fiber()
        total = (
            linear_poisson_bracket(E, linear_poisson_bracket(E, F, G), H)
            + linear_poisson_bracket(E, linear_poisson_bracket(E, G, H), F)
            + linear_poisson_bracket(E, linear_poisson_bracket(E, H, F), G)
        )
        assert total.is_zero()


# -- Dirac bracket ------------------------------------------------------------


def test_dirac_examples():
    At, omt = tangent_setup()
    Et = central_extension(At, omt)
    x, y = parse_poly("x", At.chart), parse_poly("y", At.chart)
    assert dirac_bracket_on_S(Et, x, y) == FiberLinearFn.from_base(
        PolyFn.const(At.chart, 1), 2
    ).mul_eta(-1)
    A, om = b_setup()
    E = central_extension(A, om)
    f, x2 = parse_poly("f", CH), parse_poly("x2", CH)
    assert dirac_bracket_on_S(E, f, x2) == FiberLinearFn.from_base(f, 2).mul_eta(-1)
    assert dirac_bracket_on_S(E, f, f).is_zero()


def test_dirac_matches_base_bracket_randomized():
    rng = random.Random(42)
    for setup in (tangent_setup, b_setup):
        A, om = setup()
        E = central_extension(A, om)
        pi = induced_poisson(A, om)
        for _ in range(10):
            f = random_poly(A.chart, rng)
            g = random_poly(A.chart, rng)
            lhs = dirac_bracket_on_S(E, f, g)
            rhs = FiberLinearFn.from_base(poisson_bracket(pi, f, g), A.rank).mul_eta(-1)
            assert lhs == rhs


def test_dirac_requires_constant_form():
    A, _ = b_setup()
    om = SymplecticFormOnFrame.from_entries(A, {(0, 1): "x2"})
    E = central_extension(A, om)
    with pytest.raises(NondegeneracyError):
        dirac_bracket_on_S(E, parse_poly("f", CH), parse_poly("x2", CH))

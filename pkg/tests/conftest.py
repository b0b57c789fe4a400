import random
from fractions import Fraction

import pytest
from hypothesis import HealthCheck, settings

from algquant import (
    AlgebroidPresentation,
    Chart,
    PolyFn,
    SymplecticFormOnFrame,
)
from algquant.cli import load_case

settings.register_profile(
    "suite",
    deadline=None,
    derandomize=True,
    max_examples=60,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("suite")


def vf_bracket(chart, v, w):
    """Independent oracle: the commutator of two coordinate vector fields,
    [V, W]^a = sum_b V^b d_b W^a - W^b d_b V^a."""
    out = []
    for a in range(chart.dim):
        acc = PolyFn.zero(chart)
        for b in range(chart.dim):
            acc = acc + v[b] * w[a].derive(b)
            acc = acc - w[b] * v[a].derive(b)
        out.append(acc)
    return tuple(out)


def random_poly(chart, rng, degree=3, nterms=4):
    terms = {}
    for _ in range(nterms):
        exp = [0] * chart.dim
        for _ in range(rng.randint(0, degree)):
            exp[rng.randrange(chart.dim)] += 1
        c = rng.choice([-3, -2, -1, 1, 2, 3])
        key = tuple(exp)
        terms[key] = terms.get(key, 0) + c
    return PolyFn(chart, {k: Fraction(v) for k, v in terms.items() if v})


@pytest.fixture(scope="session")
def b_case():
    return load_case("b_symplectic_n1")


@pytest.fixture(scope="session")
def b2_case():
    return load_case("b_symplectic_n2")


@pytest.fixture(scope="session")
def zero_case():
    return load_case("zero_symplectic_n1")


@pytest.fixture(scope="session")
def tangent_case():
    return load_case("tangent_r2")


@pytest.fixture(scope="session")
def tangent4_case():
    return load_case("tangent_r4")


@pytest.fixture(scope="session")
def all_cases():
    names = [
        "tangent_r2",
        "tangent_r4",
        "b_symplectic_n1",
        "b_symplectic_n2",
        "zero_symplectic_n1",
        "quasi_frobenius_aff1",
        "scaled_ball_r2",
    ]
    return {name: load_case(name) for name in names}


def diagonal_anchor_presentation(rng, dim, degree=2):
    """A random valid abelian presentation: each frame field is a polynomial
    in its own coordinate times the matching coordinate derivative, so the
    anchor fields commute and all axioms hold."""
    chart = Chart(tuple(f"u{i+1}" for i in range(dim)))
    anchor = []
    for i in range(dim):
        p = PolyFn.zero(chart)
        for d in range(degree + 1):
            c = rng.randint(-2, 2)
            if c:
                exp = [0] * dim
                exp[i] = d
                p = p + PolyFn(chart, {tuple(exp): Fraction(c)})
        if p.is_zero():
            p = PolyFn.const(chart, 1)
        row = [PolyFn.zero(chart)] * dim
        row[i] = p
        anchor.append(row)
    return AlgebroidPresentation.build(chart, dim, anchor, {})


def random_constant_symplectic(rng, presentation):
    """Random constant antisymmetric invertible form over the presentation."""
    r = presentation.rank
    while True:
        entries = {}
        for i in range(r):
            for j in range(i + 1, r):
                entries[(i, j)] = Fraction(rng.randint(-3, 3))
        omega = SymplecticFormOnFrame.from_entries(presentation, entries)
        from algquant import ratmat

        if ratmat.det(ratmat.as_fraction_matrix(omega.constant_matrix())) != 0:
            return omega

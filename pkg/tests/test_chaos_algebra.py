import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fourthmoment import _oracles as O
from fourthmoment import chaos_algebra as CA
from fourthmoment.chaos_algebra import ChaosExpansion
from fourthmoment.chaos_eval import estimate, eval_integral, malliavin_gradient
from fourthmoment.errors import CapExceeded, DimensionMismatch
from fourthmoment.rng import RandomStream, sample_points
from fourthmoment.symtensor import SymKernel

E1 = SymKernel.basis_power(1, 1, 1)
E11 = SymKernel.basis_power(1, 1, 2)
HALF_SUM = SymKernel.make(2, 2, {(1, 1): 0.5, (2, 2): 0.5})


def test_multiply_examples():
    P = ChaosExpansion.of(E1) * ChaosExpansion.of(E1)
    assert P.component(2) == E11 and P.component(0).value() == 1.0
    F = ChaosExpansion.of(E11)
    assert (F * ChaosExpansion.constant(1, 1.0)).components == F.components
    Q = F * F
    assert Q.orders() == [0, 2, 4]
    assert Q.component(4) == SymKernel.basis_power(1, 1, 4)
    assert Q.component(2) == SymKernel.basis_power(1, 1, 2, 4.0)
    assert Q.component(0).value() == 2.0


@pytest.mark.parametrize(
    "F,expected",
    [
        (ChaosExpansion.of(E1), 3.0),
        (ChaosExpansion.of(E11 / math.sqrt(2)), 15.0),
        (ChaosExpansion.of(HALF_SUM), 9.0),
    ],
)
def test_fourth_moment_examples(F, expected):
    assert CA.moment(F, 4) == pytest.approx(expected, rel=1e-13)


def test_low_moments():
    F = ChaosExpansion.of(E11) + 2.0
    assert CA.moment(F, 1) == 2.0
    assert CA.moment(F, 2) == pytest.approx(6.0)
    # E[(He2 + 2)^3] = E He2^3 + 6 E He2^2 + 8 = 8 + 12 + 8
    assert CA.moment(F, 3) == pytest.approx(28.0)


def test_gram_moment_examples():
    assert CA.deriv_gram_second_moment(E1, E1) == pytest.approx(1.0)
    assert CA.deriv_gram_second_moment(E11 / math.sqrt(2), E11 / math.sqrt(2)) == pytest.approx(12.0)


@pytest.mark.parametrize(
    "f,e2,e4,var",
    [(E1, 1, 1, 0), (E11 / math.sqrt(2), 2, 12, 8), (HALF_SUM, 2, 8, 4)],
)
def test_dnorm_examples(f, e2, e4, var):
    assert CA.e_dnorm2(f) == pytest.approx(e2, abs=1e-12)
    assert CA.e_dnorm4(f) == pytest.approx(e4, abs=1e-12)
    assert CA.var_dnorm2(f) == pytest.approx(var, abs=1e-12)


def test_gram_moment_monte_carlo(random_kernel):
    f, g = random_kernel(3, 2), random_kernel(3, 3)
    pts = sample_points(3, 100_000, RandomStream(4, 0))
    gram = np.einsum("ij,ij->i", malliavin_gradient(f, pts), malliavin_gradient(g, pts))
    assert estimate(gram**2).within(CA.deriv_gram_second_moment(f, g))


def test_apply_L_examples(random_kernel):
    g = random_kernel(2, 3, 4)
    f = SymKernel.basis_power(2, 1, 2)
    assert CA.apply_L(ChaosExpansion.of(f)).component(2) == f * -2.0
    assert CA.apply_L(ChaosExpansion.constant(2, 5.0)).orders() == []
    L = CA.apply_L(ChaosExpansion.of(SymKernel.basis_power(2, 1, 1), g))
    assert L.component(1) == SymKernel.basis_power(2, 1, 1, -1.0) and L.component(3) == g * -3.0


def test_dimension_and_caps():
    with pytest.raises(DimensionMismatch):
        CA.multiply(ChaosExpansion.of(E1), ChaosExpansion.of(SymKernel.basis_power(2, 1, 1)))
    big = ChaosExpansion.of(SymKernel.basis_power(1, 1, 17))
    with pytest.raises(CapExceeded):
        CA.moment(big, 4)


def test_dnorm_gap_identity(random_kernel):
    f = random_kernel(3, 3, 6)
    f = f / f.norm_modified()
    gram = CA.gram_expansion(ChaosExpansion.of(f), ChaosExpansion.of(f))
    assert CA.second_moment(gram - 3) == pytest.approx(CA.dnorm_l2_gap(f), rel=1e-10)
    assert CA.dnorm_l2_gap(f) == pytest.approx(CA.var_dnorm2(f), rel=1e-10)


def test_call_evaluates_every_component(random_kernel):
    f, g = random_kernel(2, 1), random_kernel(2, 3)
    F = ChaosExpansion.of(f, g) + 1.5
    x = np.array([0.2, -0.9])
    assert F(x) == pytest.approx(1.5 + eval_integral(f, x) + eval_integral(g, x))


pairs = st.builds(
    lambda seed, d, n, m: tuple(O.random_kernel(np.random.default_rng(seed), d, k, 4) for k in (n, m)),
    st.integers(0, 2**32 - 1),
    st.integers(1, 3),
    st.integers(1, 3),
    st.integers(1, 3),
)


@settings(max_examples=40, deadline=None)
@given(pairs, st.floats(-2, 2))
def test_pathwise_product(pair, c):
    f, g = pair
    F, G = ChaosExpansion.of(f) + c, ChaosExpansion.of(g)
    pts = np.random.default_rng(0).normal(size=(20, f.dim))
    np.testing.assert_allclose((F * G)(pts), F(pts) * G(pts), rtol=1e-9, atol=1e-9)


@settings(max_examples=25, deadline=None)
@given(pairs)
def test_gram_moment_matches_algebra(pair):
    f, g = pair
    gram = CA.gram_expansion(ChaosExpansion.of(f), ChaosExpansion.of(g))
    assert CA.deriv_gram_second_moment(f, g) == pytest.approx(CA.second_moment(gram), rel=1e-9, abs=1e-12)
    assert CA.e_dnorm2(f) == pytest.approx(CA.expectation(CA.gram_expansion(ChaosExpansion.of(f), ChaosExpansion.of(f))), rel=1e-12)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 3), st.integers(1, 2))
def test_fourth_moment_vs_polynomial(seed, d, n):
    f = O.random_kernel(np.random.default_rng(seed), d, n)
    p = O.integral_poly(f)
    p2 = O.poly_mul(p, p)
    assert CA.moment(ChaosExpansion.of(f), 4) == pytest.approx(O.gaussian_expectation(O.poly_mul(p2, p2)), rel=1e-9)


def test_support_guard_fires_before_allocation():
    from fourthmoment.clt_battery import tensor_sum_kernel

    with pytest.raises(CapExceeded):
        CA.moment(ChaosExpansion.of(tensor_sum_kernel(5000, 2)), 4)

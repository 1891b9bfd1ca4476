import math

import numpy as np
import pytest
from gmpy2 import mpq
from hypothesis import given
from hypothesis import strategies as st

from kfphom.poly import (
    DegenerateSecondOrder,
    InsufficientOrder,
    MultiPoly,
    NonHomogeneous,
    difference,
    gauss_hermite_expect,
    gaussian_expect,
    harmonic_decompose,
    hermite_poly,
    hermite_recurrence,
    laplacian_tensors,
    macro_apply,
    macro_invert,
    newton_coefficients,
    newton_expand,
    pr_inner,
    random_poly,
    s_apply,
    s_apply_graded,
    synthetic_tensors,
)

dims = st.integers(1, 3)
seeds = st.integers(0, 2 ** 32 - 1)


def _poly(dim, deg, seed, homogeneous=False):
    return random_poly(dim, deg, np.random.default_rng(seed), homogeneous=homogeneous)


@given(dims, st.integers(0, 7), seeds)
def test_laplacian_of_S_is_identity(d, m, seed):
    p = _poly(d, m, seed, homogeneous=True)
    assert s_apply(p).laplacian() == p


@given(dims, st.integers(0, 7), seeds)
def test_S_norm_bound(d, m, seed):
    p = _poly(d, m, seed, homogeneous=True)
    r = mpq(1 + seed % 7, 1 + seed % 3)
    Sp = s_apply(p)
    assert pr_inner(Sp, Sp, r) <= r ** 4 / (m + 1) * pr_inner(p, p, r)


@given(dims, st.integers(0, 7), seeds)
def test_harmonic_decomposition(d, m, seed):
    p = _poly(d, m, seed, homogeneous=True)
    hs = harmonic_decompose(p)
    Q = MultiPoly.norm_sq(d)
    total = MultiPoly.zero(d)
    for k, h in enumerate(hs):
        assert h.laplacian().is_zero()
        total = total + Q ** k * h
    assert total == p


@given(dims, st.integers(0, 6), seeds)
def test_macro_inversion_with_higher_order_tensors(d, m, seed):
    rng = np.random.default_rng(seed)
    t = synthetic_tensors(d, m + 2, rng)
    p = random_poly(d, m, rng)
    res = macro_invert(t, p)
    assert macro_apply(t, res.q) == p
    assert res.iterations <= m + 2


@given(dims, st.integers(0, 6), seeds)
def test_graded_S_is_right_inverse(d, m, seed):
    p = _poly(d, m, seed)
    assert s_apply_graded(p).laplacian() == p


def test_S_requires_homogeneous():
    with pytest.raises(NonHomogeneous):
        s_apply(MultiPoly.var(1, 0) + 1)


def test_inversion_needs_enough_tensors():
    with pytest.raises(InsufficientOrder):
        macro_invert(laplacian_tensors(2), MultiPoly.var(2, 0) ** 3)


def test_inversion_rejects_degenerate_metric():
    t = {(2, 0): mpq(1), (1, 1): mpq(0), (0, 2): mpq(0)}
    with pytest.raises(DegenerateSecondOrder):
        macro_invert(t, MultiPoly.const(2, 1))


def test_inversion_with_corrector_tensors(cos_correctors):
    x = MultiPoly.var(1, 0)
    q = macro_invert(cos_correctors, x ** 2).q
    assert macro_apply(cos_correctors, q) == x ** 2


@given(dims, st.integers(0, 5), seeds, st.floats(-2, 2), st.floats(-2, 2))
def test_shift_and_evaluation(d, m, seed, a, b):
    p = _poly(d, m, seed)
    h = [a, b, 0.5][:d]
    x = np.array([[0.3, -0.7, 1.1][:d]])
    assert p.shift(h)(x)[0] == pytest.approx(p(x + np.array(h))[0], rel=1e-9, abs=1e-9)


@pytest.mark.parametrize("alpha", [(0,), (3,), (6,), (2, 1), (3, 2)])
def test_hermite_definition_matches_recurrence(alpha):
    assert hermite_poly(alpha) == hermite_recurrence(alpha)


def test_hermite_orthogonality():
    for a in [(1, 0), (2, 1), (0, 3)]:
        for b in [(1, 0), (2, 1), (0, 3)]:
            val = gaussian_expect(hermite_poly(a) * hermite_poly(b))
            if a != b:
                assert val == 0
            else:
                # ||h_n||^2 = 2^n n! under exp(-x^2)/sqrt(pi)
                assert val == math.prod(2 ** n * math.factorial(n) for n in a)


def test_gauss_hermite_quadrature_exact_for_low_degree():
    p = hermite_poly((4, 2)) ** 2
    assert gauss_hermite_expect(p, 8) == pytest.approx(float(gaussian_expect(p)), rel=1e-12)


@given(st.integers(1, 2), st.integers(0, 6), seeds)
def test_newton_expansion_round_trip(d, m, seed):
    p = _poly(d, m, seed)
    assert newton_expand(newton_coefficients(p), d) == p


def test_difference_lowers_degree():
    x = MultiPoly.var(1, 0)
    assert difference(x ** 3, (3,)) == MultiPoly.const(1, 6)


def test_arithmetic_is_exact():
    x = MultiPoly.var(1, 0)
    p = (x + mpq(1, 3)) ** 3
    assert p.coeff((0,)) == mpq(1, 27)
    assert (p - p).is_zero()

import numpy as np
import pytest

from kfphom import hetpoly
from kfphom.cells import InsufficientOrder, build_correctors
from kfphom.poly import MultiPoly
from kfphom.spectral import FrictionMatrix, Potential


@pytest.fixture(scope="module")
def cset_fine():
    return build_correctors(Potential.cosine(1, 1.0), FrictionMatrix.identity(1), 6, (12, 48))


@pytest.fixture(scope="module")
def cset_2d():
    pot = Potential.from_pairs(2, [((1, 0), 0.6), ((0, 1), 0.4)])
    return build_correctors(pot, FrictionMatrix.identity(2), 4, (4, 10))


def test_affine_function_is_a_solution(cset_fine):
    x = MultiPoly.var(1, 0)
    assert hetpoly.apply_L(hetpoly.HetPoly(cset_fine, x + 3)).is_zero()


def test_solve_poly_rhs_inverts_apply_L(cset_fine):
    x = MultiPoly.var(1, 0)
    p = x ** 2 - 2 * x + 1
    psi = hetpoly.solve_poly_rhs(cset_fine, p)
    assert hetpoly.apply_L(psi) == p


def test_spectral_residual_is_small(cset_fine, rng):
    x = MultiPoly.var(1, 0)
    psi = hetpoly.HetPoly(cset_fine, x ** 3 + x)
    assert hetpoly.spectral_residual(psi, rng) < 1e-8


def test_lattice_data_round_trip(cset_fine, rng):
    f = hetpoly.HetPoly(cset_fine, MultiPoly.var(1, 0) ** 3 * 2 - 1)
    jet = hetpoly.lattice_jet(f)
    g = hetpoly.from_lattice_data(cset_fine, 3, jet)
    assert g.q == f.q


def test_missing_lattice_data_rejected(cset_fine):
    with pytest.raises(ValueError):
        hetpoly.from_lattice_data(cset_fine, 2, {(0,): 1})


def test_order_too_high(cset_fine):
    with pytest.raises(InsufficientOrder):
        hetpoly.solve_poly_rhs(cset_fine, MultiPoly.var(1, 0) ** 6)


def test_norm_quadrature_agrees_with_closed_form(cset_fine):
    psi = hetpoly.HetPoly(cset_fine, MultiPoly.var(1, 0) ** 2)
    for r in (2.0, 5.0):
        assert psi.norm(r) == pytest.approx(psi.norm_dense(r, nq=96), rel=1e-6)


def test_exact_solution_in_2d(cset_2d, rng):
    f = hetpoly.exact_solution(cset_2d, 2, rng)
    assert f.degree == 2
    assert hetpoly.apply_L(f).is_zero()


def test_regularity_scan_m0_rate(cset_2d):
    radii = list(range(8, 33, 4))
    rep = hetpoly.regularity_scan(cset_2d, 1, 0, radii, R=64)
    assert not rep.degenerate
    assert rep.slope == pytest.approx(1.0, abs=0.2)


def test_regularity_scan_flags_degenerate_1d(cset_fine):
    # in one dimension the solution space has no degree-two member
    rep = hetpoly.regularity_scan(cset_fine, 2, 1, [8, 12, 16], R=64)
    assert rep.degenerate
    assert not rep.passed(2.0)


def test_loglog_fit_recovers_power():
    r = np.array([2.0, 4.0, 8.0, 16.0])
    slope, r2 = hetpoly.loglog_fit(r, 3 * r ** -1.5)
    assert slope == pytest.approx(-1.5) and r2 == pytest.approx(1.0)

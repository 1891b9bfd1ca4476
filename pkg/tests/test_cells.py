import json
from pathlib import Path

import numpy as np
import pytest

from kfphom.cells import (
    InsufficientOrder,
    avg_psi_identity,
    build_correctors,
    clear_cache,
    divergence_form_identity,
    effective_diffusivity,
    multi_indices,
    second_correctors,
)
from kfphom.spectral import FrictionMatrix, PhaseField, Potential, apply, mean_m

ORACLES = json.loads((Path(__file__).parent / "data" / "oracles.json").read_text())


def test_multi_indices_count():
    assert len(multi_indices(2, 3)) == 4
    assert len(multi_indices(3, 2)) == 6


def test_free_correctors_are_hermite_polynomials():
    cset = build_correctors(Potential.zero(1), FrictionMatrix.identity(1), 4, (2, 8))
    x = np.array([[0.2], [0.9]])
    v = np.array([[0.5], [-1.7]])
    np.testing.assert_allclose(cset.phi[(1,)](x, v), v[:, 0], atol=1e-13)
    np.testing.assert_allclose(cset.phi[(2,)](x, v), (v[:, 0] ** 2 - 1) / 2, atol=1e-13)
    assert cset.abar_alpha[(2,)] == pytest.approx(1.0)
    assert cset.abar_alpha[(3,)] == pytest.approx(0.0, abs=1e-14)
    assert cset.abar_alpha[(4,)] == pytest.approx(1.0)


def test_free_anisotropic_diffusivity_is_inverse_friction(free_pd2):
    abar = effective_diffusivity(Potential.zero(2), free_pd2, (2, 6))
    np.testing.assert_allclose(abar, np.linalg.inv(free_pd2.matrix), atol=1e-13)


def test_cosine_diffusivity_oracle_coarse(cos_correctors):
    # Hermite truncation error decays slowly in nv; (12, 32) sits near 1e-3
    assert cos_correctors.abar[0, 0] == pytest.approx(ORACLES["abar_cos_lambda1"], rel=2e-3)


def test_cosine_diffusivity_oracle_fine():
    abar = effective_diffusivity(Potential.cosine(1, 1.0), FrictionMatrix.identity(1), (16, 192))
    assert abar[0, 0] == pytest.approx(ORACLES["abar_cos_lambda1"], rel=1e-6)


def test_diffusivity_below_free_value(cos_correctors):
    # the potential can only slow down the position process
    assert 0 < cos_correctors.abar[0, 0] < 1


def test_first_corrector_solves_cell_problem(cos_correctors):
    phi = cos_correctors.phi[(1,)]
    v = PhaseField.velocity(1, *cos_correctors.cuts, 0)
    assert (apply(cos_correctors.operator, phi) - v).norm() < 1e-3
    assert abs(mean_m(phi, cos_correctors.potential)) < 1e-12


def test_odd_tensors_vanish_for_even_potential(cos_correctors):
    for k in (1, 3, 5):
        assert abs(cos_correctors.abar_alpha[(k,)]) < 1e-10


def test_second_corrector_identities(cos_correctors, cos_psi):
    assert avg_psi_identity(cos_psi[(0, 0)], cos_correctors, (0, 0)) < 1e-8
    assert divergence_form_identity(cos_correctors) < 1e-8


def test_second_corrector_free_case():
    cset = build_correctors(Potential.zero(1), FrictionMatrix.identity(1), 1, (2, 6))
    psi = second_correctors(cset)[(0, 0)]
    x, v = np.array([[0.3]]), np.array([[1.3]])
    assert psi(x, v)[0] == pytest.approx((1.3 ** 2 - 1) / 2, abs=1e-13)


def test_require_higher_order(cos_correctors):
    with pytest.raises(InsufficientOrder):
        cos_correctors.require(cos_correctors.order + 1)


def test_cache_returns_same_object():
    clear_cache()
    pot, a = Potential.cosine(1, 0.5), FrictionMatrix.identity(1)
    c1 = build_correctors(pot, a, 2, (6, 12))
    c2 = build_correctors(pot, a, 2, (6, 12))
    assert c1 is c2


def test_diffusivity_converges_in_cuts():
    pot, a = Potential.cosine(1, 1.0), FrictionMatrix.identity(1)
    lo = effective_diffusivity(pot, a, (12, 32))[0, 0]
    hi = effective_diffusivity(pot, a, (16, 64))[0, 0]
    assert abs(hi - ORACLES["abar_cos_lambda1"]) < abs(lo - ORACLES["abar_cos_lambda1"]) + 1e-12


def test_growth_fit_reports_bound(cos_correctors):
    g = cos_correctors.growth_fit()
    assert g["bound"] >= 1.0 and np.isfinite(g["rate"])

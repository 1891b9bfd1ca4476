import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import stats

from kfphom import langevin
from kfphom.spectral import FrictionMatrix, Potential

# Known-answer vectors distributed with the Random123 library (philox4x32, 10 rounds)
KAT = [
    ((0, 0, 0, 0), (0, 0), (0x6627E8D5, 0xE169C58D, 0xBC57AC4C, 0x9B00DBD8)),
    ((0xFFFFFFFF,) * 4, (0xFFFFFFFF,) * 2, (0x408F276D, 0x41C83B0E, 0xA20BC7C6, 0x6D5451FD)),
    ((0x243F6A88, 0x85A308D3, 0x13198A2E, 0x03707344), (0xA4093822, 0x299F31D0),
     (0xD16CFE09, 0x94FDCCEB, 0x5001E420, 0x24126EA1)),
]


@pytest.mark.parametrize("counter,key,expected", KAT)
def test_philox_known_answers(counter, key, expected):
    assert langevin.philox_block(counter, key) == expected


def test_normal_quantile_accuracy():
    p = np.concatenate([np.linspace(1e-6, 1 - 1e-6, 2001), [1e-9, 0.02, 0.03, 0.97, 0.98]])
    got = np.array([langevin.normal_quantile(x) for x in p])
    np.testing.assert_allclose(got, stats.norm.ppf(p), rtol=2e-9, atol=2e-9)


@given(st.floats(-3, 3))
def test_sin2pi(t):
    assert float(langevin.sin2pi(t)) == pytest.approx(math.sin(2 * math.pi * t), abs=1e-13)


def test_normals_stream_looks_gaussian():
    z = np.concatenate([langevin.normals(7, j, 500) for j in range(20)])
    assert stats.kstest(z, "norm").pvalue > 1e-3
    assert abs(np.mean(z)) < 0.05 and abs(np.var(z) - 1) < 0.05


@pytest.mark.parametrize("pot", [Potential.cosine(1, 1.0), Potential.from_pairs(1, [((1,), 0.5, 0.3), ((2,), 0.2)])])
def test_kernel_matches_reference_path(pot):
    a = FrictionMatrix.identity(1)
    dt, nsteps = 0.0015, 400
    st_ = langevin.integrate(pot, a, dt, dt * nsteps, 40, 99, n_snap=1)
    for traj in (0, 17, 39):
        x, v = langevin.reference_path(pot, a, dt, nsteps, 99, traj)
        assert st_.X[-1, traj, 0] == x[0]
        assert st_.V[-1, traj, 0] == v[0]


def test_kernel_matches_reference_path_2d():
    pot = Potential.from_pairs(2, [((1, 0), 0.4), ((1, 1), 0.2, 0.1)])
    a = FrictionMatrix(((1.5, 0.3), (0.3, 1.0)))
    dt, nsteps = 0.002, 200
    st_ = langevin.integrate(pot, a, dt, dt * nsteps, 8, 5, n_snap=1)
    x, v = langevin.reference_path(pot, a, dt, nsteps, 5, 3)
    np.testing.assert_allclose(st_.X[-1, 3], x, rtol=1e-12, atol=1e-12)
    np.testing.assert_allclose(st_.V[-1, 3], v, rtol=1e-12, atol=1e-12)


def test_results_do_not_depend_on_threads_or_chunking():
    pot, a = Potential.cosine(1, 1.0), FrictionMatrix.identity(1)
    kw = dict(n_snap=4)
    s1 = langevin.integrate(pot, a, 0.0015, 0.6, 300, 3, threads=1, chunk=64, **kw)
    s2 = langevin.integrate(pot, a, 0.0015, 0.6, 300, 3, threads=3, chunk=100, **kw)
    np.testing.assert_array_equal(s1.X, s2.X)
    np.testing.assert_array_equal(s1.V, s2.V)


def test_seed_changes_paths():
    pot, a = Potential.zero(1), FrictionMatrix.identity(1)
    s1 = langevin.integrate(pot, a, 0.01, 1.0, 50, 1, n_snap=1)
    s2 = langevin.integrate(pot, a, 0.01, 1.0, 50, 2, n_snap=1)
    assert not np.array_equal(s1.X, s2.X)


@pytest.fixture(scope="module")
def free_run():
    return langevin.integrate(Potential.zero(1), FrictionMatrix.identity(1), 0.01, 20.0, 20000, 11, n_snap=20)


def test_free_variance_closed_form(free_run):
    assert langevin.free_position_variance(10.0) == pytest.approx(17.0002, abs=1e-4)
    i = free_run.time_index(10.0)
    var = np.var(free_run.X[i, :, 0])
    se = var * math.sqrt(2 / free_run.n_traj)
    assert abs(var - langevin.free_position_variance(10.0)) < 4 * se


def test_velocity_is_stationary(free_run):
    # started at rest: Var V_t = 1 - exp(-2t)
    t = free_run.times[1:]
    np.testing.assert_allclose(free_run.var_v()[1:, 0], 1 - np.exp(-2 * t), atol=0.05)


def test_free_positions_are_gaussian(free_run):
    D, crit = langevin.ks_gaussian(free_run, 20.0, langevin.free_position_variance(20.0))
    assert D < crit


def test_free_diffusivity_estimate(free_run):
    D, se = langevin.estimate_diffusivity(free_run)
    assert abs(D[0, 0] - 1.0) < 4 * se[0, 0]


def test_symmetry(free_run):
    assert langevin.symmetry_defect(free_run, 20.0)["p"] > 1e-3


def test_step_too_large():
    with pytest.raises(langevin.StepTooLarge):
        langevin.integrate(Potential.cosine(1, 1.0), FrictionMatrix.identity(1), 0.1, 1.0, 10, 0)


def test_snapshots_must_divide_steps():
    with pytest.raises(ValueError):
        langevin.integrate(Potential.zero(1), FrictionMatrix.identity(1), 0.01, 1.0, 10, 0, n_snap=7)


def test_fit_step_respects_bound_and_multiple():
    pot, a = Potential.cosine(1, 2.0), FrictionMatrix.identity(1)
    dt = langevin.fit_step(pot, a, 50.0, 40)
    assert dt <= langevin.max_step(pot, a)
    n = round(50.0 / dt)
    assert n % 40 == 0 and math.isclose(n * dt, 50.0)


def test_short_run_not_linear():
    st_ = langevin.integrate(Potential.zero(1), FrictionMatrix.identity(1), 0.01, 0.4, 20000, 4, n_snap=8)
    with pytest.raises(langevin.NotInLinearRegime):
        langevin.estimate_diffusivity(st_)

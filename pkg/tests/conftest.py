import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from kfphom.cells import build_correctors, second_correctors
from kfphom.spectral import FrictionMatrix, Potential

settings.register_profile("default", max_examples=40, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def cos1():
    """H = cos(2 pi x), a = 1 in d = 1."""
    return Potential.cosine(1, 1.0), FrictionMatrix.identity(1)


@pytest.fixture(scope="session")
def cos_correctors(cos1):
    pot, a = cos1
    return build_correctors(pot, a, 5, (12, 32))


@pytest.fixture(scope="session")
def cos_psi(cos_correctors):
    return second_correctors(cos_correctors)


@pytest.fixture(scope="session")
def free_pd2():
    return FrictionMatrix(((2.0, 0.5), (0.5, 1.0)))


@pytest.fixture(autouse=True)
def _isolated_cache(tmp_path, monkeypatch):
    monkeypatch.setenv("KFP_CACHE_DIR", str(tmp_path / "cache"))


_ACCEPTANCE: list = []


@pytest.fixture
def verdict(request):
    """Record one PASS/FAIL line for an acceptance criterion, then assert it."""

    def record(label: str, passed: bool, detail: str):
        line = f"{label}: {'PASS' if passed else 'FAIL'} ({detail})"
        _ACCEPTANCE.append(line)
        print(line)
        assert passed, line

    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE:
            terminalreporter.write_line(line)

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from robust_miso.model import generate_scenario

settings.register_profile("default", max_examples=60, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def crandn(rng, *shape):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)


def random_feasible_w(rng, n, power, count=None):
    """Random directions with power uniform in [0, P]."""
    shape = (n,) if count is None else (count, n)
    w = crandn(rng, *shape)
    w /= np.linalg.norm(w, axis=-1, keepdims=True)
    u = rng.random(() if count is None else (count, 1))
    return w * np.sqrt(u * power)


@pytest.fixture(scope="session")
def seed7_three_user():
    return generate_scenario(3, [3, 3, 3], 0.5, [1, 1, 1], 1.0, seed=7)


@pytest.fixture(scope="session")
def two_user():
    return generate_scenario(2, [3, 3], 0.3, [1, 1], 1.0, seed=7)


# criterion number -> (passed, detail), filled by test_acceptance.py
ACCEPTANCE = {}


def record_acceptance(number, passed, detail):
    ACCEPTANCE[number] = (bool(passed), detail)
    print(f"criterion {number}: {'PASS' if passed else 'FAIL'} ({detail})")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        passed, detail = ACCEPTANCE[number]
        terminalreporter.write_line(f"criterion {number}: {'PASS' if passed else 'FAIL'} ({detail})")

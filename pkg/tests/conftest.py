import time

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from wkam.cohomology import GOLDEN_MEAN
from wkam.kam import prepare, seed_solution, solve_torus
from wkam.models import default_family

settings.register_profile("wkam", max_examples=40, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("wkam")

K_MAX = 64


def random_series_coeffs(rng, K_max, value_shape=(), decay=0.5, real=True):
    """Coefficients with geometric decay; conjugate-symmetric when ``real``."""
    k = np.arange(-K_max, K_max + 1)
    scale = np.exp(-decay * np.abs(k)).reshape((-1,) + (1,) * len(value_shape))
    c = (rng.standard_normal((2 * K_max + 1,) + value_shape)
         + 1j * rng.standard_normal((2 * K_max + 1,) + value_shape)) * scale
    if real:
        c = 0.5 * (c + c[::-1].conj())
    return c


@pytest.fixture(scope="session")
def uncoupled():
    return default_family({"eps_c": 0.0, "eps": 0.0})


@pytest.fixture(scope="session")
def exact_base(uncoupled):
    """The closed-form torus of the uncoupled family with splitting and rates attached."""
    return prepare(uncoupled, seed_solution(uncoupled, GOLDEN_MEAN, K_MAX))


@pytest.fixture(scope="session")
def a1_family():
    return default_family({"eps_c": 0.05, "eps": 0.01})


@pytest.fixture(scope="session")
def a1_run(a1_family, uncoupled):
    seed = seed_solution(uncoupled, GOLDEN_MEAN, K_MAX)
    t0 = time.perf_counter()
    sol = solve_torus(a1_family, seed, tol=1e-11)
    return sol, time.perf_counter() - t0, seed

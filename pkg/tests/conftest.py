import itertools
import math

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from pballoc.fixtures import FixtureSpec, generate_fixture
from pballoc.mrio import MrioTable

settings.register_profile("ci", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("ci")


def power_series_inverse(A, tol=1e-12, max_terms=10_000):
    """Sum of A^k until the next term is below ``tol`` (max-norm)."""
    n = A.shape[0]
    total = np.eye(n)
    term = np.eye(n)
    for _ in range(max_terms):
        term = term @ A
        if np.max(np.abs(term)) < tol:
            return total + term
        total = total + term
    raise AssertionError("power series did not converge")


def gini_pairwise(values, weights=None):
    """Mean absolute difference over all ordered pairs, divided by twice the mean."""
    x = list(values)
    w = [1.0] * len(x) if weights is None else list(weights)
    total_w = math.fsum(w)
    mean = math.fsum(a * b for a, b in zip(x, w)) / total_w
    diff = math.fsum(wi * wj * abs(xi - xj) for (xi, wi), (xj, wj) in itertools.product(zip(x, w), repeat=2))
    return diff / (2 * total_w**2 * mean)


def random_productive(n, rng, max_col_sum=0.7):
    A = rng.uniform(0.0, 1.0, size=(n, n))
    return A / A.sum(axis=0) * rng.uniform(0.05, max_col_sum, size=n)


def table_from_coefficients(A, Y, regions, sectors):
    x = np.linalg.solve(np.eye(A.shape[0]) - A, Y.sum(axis=1))
    Z = A * x[None, :]
    return MrioTable(regions, sectors, Z, Y, Z.sum(axis=1) + Y.sum(axis=1))


@pytest.fixture
def two_sector_table():
    # one region; A = [[0.1, 0.1], [0.3, 0]]
    Z = np.array([[10.0, 20.0], [30.0, 0.0]])
    x = np.array([100.0, 200.0])
    Y = (x - Z.sum(axis=1))[:, None]
    return MrioTable(("R",), ("s1", "s2"), Z, Y, x)


@pytest.fixture
def small_fixture():
    return generate_fixture(FixtureSpec(n_regions=3, n_sectors=2, seed=7, n_watersheds=2, n_ecoregions=2))

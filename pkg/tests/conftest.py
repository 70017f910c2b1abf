
import numpy as np
import pytest

from clvolterra.core import TrajectoryMatrix, volterra_dimension


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_problem(rng, max_n=20, max_m=3, max_p=3):
    """Small regression problem with N no larger than the monomial count, so K is invertible."""
    m = int(rng.integers(1, max_m + 1))
    p = int(rng.integers(1, max_p + 1))
    n_max = min(max_n, volterra_dimension(m, p))
    N = int(rng.integers(1, n_max + 1))
    X = rng.uniform(-1, 1, size=(N, m))
    y = rng.normal(size=N)
    return TrajectoryMatrix(X, y), p


def henon(T, seed, burn=100):
    """Noise-free Henon map: degree 2, memory 2."""
    r = np.random.default_rng(seed)
    y = np.zeros(T + burn)
    y[0], y[1] = r.uniform(-0.1, 0.1, 2)
    for t in range(2, T + burn):
        y[t] = 1 - 1.4 * y[t - 1] ** 2 + 0.3 * y[t - 2]
    return y[burn:]


def noisy_quadratic(T, seed, sd=0.1, burn=200):
    """Damped Henon-type map of memory 2 and degree 2 driven by N(0, sd^2) noise."""
    from clvolterra.simulation import standard_normals

    e = sd * standard_normals(seed, T + burn)
    y = np.zeros(T + burn)
    for t in range(2, T + burn):
        y[t] = 0.5 - 0.8 * y[t - 1] ** 2 + 0.4 * y[t - 2] + e[t]
    return y[burn:]


def rel_err(a, b):
    a, b = np.asarray(a, float), np.asarray(b, float)
    return float(np.max(np.abs(a - b)) / max(1.0, float(np.max(np.abs(b)))))

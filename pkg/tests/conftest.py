from __future__ import annotations

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "geosens", deadline=None, max_examples=60, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("geosens")


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def unit_vectors(rng, n, d=2):
    x = rng.normal(size=(n, d))
    return x / np.linalg.norm(x, axis=1, keepdims=True)


def random_spd(rng, n, m=3, cond=20.0):
    """Random SPD matrices with eigenvalues in [1, cond] and random eigenbases."""
    out = np.empty((n, m, m))
    for i in range(n):
        q, _ = np.linalg.qr(rng.normal(size=(m, m)))
        w = np.exp(rng.uniform(0.0, np.log(cond), size=m))
        a = (q * w) @ q.T
        out[i] = 0.5 * (a + a.T)
    return out


def log_surface_points(rng, n, scale=1.0):
    lg = rng.normal(scale=scale, size=(n, 2))
    return np.exp(np.column_stack([lg, -lg.sum(axis=1)]))

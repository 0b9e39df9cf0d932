from __future__ import annotations

import numpy as np
import pytest
from conftest import log_surface_points, unit_vectors
from hypothesis import given
from hypothesis import strategies as st

from geosens import _accel
from geosens.kernels import BallCounts, ball_counts, generic_ball_counts, quadrant_counts
from geosens.manifolds import Circle, LogSurface, RealLine

needs_numba = pytest.mark.skipif(not _accel.HAVE_NUMBA, reason="numba not installed")


def _flat_case(rng, n, nw, p):
    return rng.normal(size=(n, p)), rng.normal(size=(n, p)), rng.normal(size=(nw, p))


@needs_numba
@pytest.mark.parametrize("p", [1, 2, 3, 6])
def test_flat_compiled_matches_numpy_bitwise(p):
    rng = np.random.default_rng(p)
    for n, nw in [(2, 2), (17, 9), (60, 45)]:
        Z, Zv, W = _flat_case(rng, n, nw, p)
        a = ball_counts("flat", Z, Zv, W, 1e-10, use_numba=True)
        b = ball_counts("flat", Z, Zv, W, 1e-10, use_numba=False)
        assert a == b
        taus = np.array([[0, 1], [nw - 1, 0], [1, nw - 1]])
        assert ball_counts("flat", Z, Zv, W, 1e-10, taus, use_numba=True) == ball_counts(
            "flat", Z, Zv, W, 1e-10, taus, use_numba=False
        )


@needs_numba
def test_sphere_compiled_matches_numpy_bitwise():
    rng = np.random.default_rng(4)
    Z, Zv = unit_vectors(rng, 80), unit_vectors(rng, 80)
    W = unit_vectors(rng, 40)
    W[5] = -W[3]  # one antipodal pool pair
    a = ball_counts("sphere", Z, Zv, W, 1e-10, use_numba=True)
    b = ball_counts("sphere", Z, Zv, W, 1e-10, use_numba=False)
    assert a == b
    assert a.n_dropped == 1
    assert a.n_tau == 40 * 39 // 2 - 1


@needs_numba
def test_quadrant_compiled_matches_numpy_bitwise():
    rng = np.random.default_rng(5)
    Z, Zv, W = _flat_case(rng, 50, 30, 3)
    assert quadrant_counts(Z, Zv, W, use_numba=True) == quadrant_counts(Z, Zv, W, use_numba=False)
    idx = np.array([3, 7, 29])
    assert quadrant_counts(Z, Zv, W, idx, use_numba=True) == quadrant_counts(Z, Zv, W, idx, use_numba=False)


@pytest.mark.parametrize(
    "kind, draw",
    [
        (RealLine(), lambda rng, n: rng.normal(size=n)),
        (Circle(), lambda rng, n: unit_vectors(rng, n)),
        (LogSurface(), lambda rng, n: log_surface_points(rng, n)),
    ],
    ids=["real", "circle", "logsurface"],
)
def test_generic_path_matches_compiled(kind, draw):
    rng = np.random.default_rng(6)
    Z, Zv, W = draw(rng, 40), draw(rng, 40), draw(rng, 25)
    generic = generic_ball_counts(kind, Z, Zv, W)
    if kind.geometry == "sphere":
        fast = ball_counts("sphere", Z, Zv, W, kind.tol)
    else:
        fast = ball_counts("flat", kind.chart(Z), kind.chart(Zv), kind.chart(W), kind.tol)
    assert generic == fast


def test_counts_add_and_ties():
    # every pool point equal: zero-radius balls still contain their own center
    Z = np.zeros((4, 1))
    W = np.zeros((3, 1))
    c = ball_counts("flat", Z, Z, W, 1e-10)
    assert c == BallCounts(sum_g=12, sum_s=24, sum_s2=3 * 64, n_tau=3, n_dropped=0)
    assert c + c == BallCounts(24, 48, 6 * 64, 6, 0)


@given(st.integers(2, 12), st.integers(2, 12), st.integers(0, 2**31))
def test_small_random_flat_cases_agree(n, nw, seed):
    rng = np.random.default_rng(seed)
    # integer grid points force exact boundary ties
    Z, Zv, W = (rng.integers(-3, 4, size=(k, 2)).astype(float) for k in (n, n, nw))
    assert ball_counts("flat", Z, Zv, W, 1e-10, use_numba=True) == ball_counts("flat", Z, Zv, W, 1e-10, use_numba=False)


def test_unknown_geometry():
    with pytest.raises(ValueError):
        ball_counts("hyperbolic", np.zeros((2, 1)), np.zeros((2, 1)), np.zeros((2, 1)), 0.0)


def test_environment_flag_selects_numpy_path():
    import subprocess
    import sys

    code = "import geosens._accel as a; print(a.NUMBA_DISABLED, a.USE_NUMBA)"
    env = dict(__import__("os").environ, GEOSENS_DISABLE_NUMBA="1")
    out = subprocess.run([sys.executable, "-c", code], capture_output=True, text=True, env=env, check=True).stdout.split()
    assert out == ["True", "False"]

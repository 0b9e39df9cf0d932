"""Pick-freeze estimators of the geodesic-ball sensitivity index.

For a pool pair ``tau`` let ``h_tau`` be the indicator of the ball of
diameter ``W_tau``.  With ``g_tau = #{j : h(Z_j) = h(Z_j^nu) = 1}`` and
``s_tau = sum_j h(Z_j) + h(Z_j^nu)``, the per-pair terms are::

    S_tau = g_tau / N - (s_tau / 2N)^2
    D_tau = (s_tau / 2N) (1 - s_tau / 2N)

and the estimators average them over the pool pairs.  Since
``sum_{i,j} J_i J_j = (sum_j J_j)^2`` this equals the double-sum form of the
numerator at O(N) cost per pool pair instead of O(N^2).

All averaging is done on exact integer totals, so results do not depend on
the order of pairs, pool points or loop splitting.
"""

from __future__ import annotations

import time
import warnings
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from . import kernels
from .errors import (
    AntipodalPoints,
    DegenerateBalls,
    DegenerateDenominator,
    TooFewSamples,
)
from .manifolds import Manifold
from .models import PickFreezeSample, WPool
from .rng import as_generator

DENOM_FLOOR = 1e-12
DROP_WARN_FRACTION = 0.01
GROUPED_MAX_UNIQUE = 64


class DroppedPairsWarning(RuntimeWarning):
    pass


# -- modes -----------------------------------------------------------------


@dataclass(frozen=True)
class ExactU:
    """Average over every pool pair."""

    def __str__(self):
        return "exact"


@dataclass(frozen=True)
class IncompleteU:
    """Average over ``m`` pool pairs drawn uniformly without replacement."""

    m: int

    def __post_init__(self):
        if self.m < 1:
            raise ValueError("incomplete U-statistic needs m >= 1")

    def __str__(self):
        return f"incomplete:{self.m}"


def parse_mode(text) -> ExactU | IncompleteU:
    if isinstance(text, (ExactU, IncompleteU)):
        return text
    text = str(text).strip().lower()
    if text == "exact":
        return ExactU()
    if text.startswith("incomplete:"):
        return IncompleteU(int(text.split(":", 1)[1]))
    raise ValueError(f"mode must be 'exact' or 'incomplete:M', got {text!r}")


# -- result ----------------------------------------------------------------


@dataclass(frozen=True)
class IndexEstimate:
    s_hat: float
    d_hat: float
    b_hat: float
    n_pairs: int
    n_w: int
    mode: str
    n_tau: int = 0
    n_dropped: int = 0
    elapsed: float = 0.0


# -- single-pair kernels ---------------------------------------------------


def _h(manifold, w_pair, z):
    return bool(manifold.ball_mask(w_pair[0], w_pair[1], manifold.as_batch(z))[0])


def kernel_G(z_pair, w_pair, manifold: Manifold) -> int:
    """``h_W(Z) h_W(Z^nu)`` for one pick-freeze pair and one pool pair."""
    return int(_h(manifold, w_pair, z_pair[0]) and _h(manifold, w_pair, z_pair[1]))


def kernel_J(z_pair, w_pair, manifold: Manifold) -> float:
    """``(h_W(Z) + h_W(Z^nu)) / 2``."""
    return 0.5 * (int(_h(manifold, w_pair, z_pair[0])) + int(_h(manifold, w_pair, z_pair[1])))


# -- preparation -----------------------------------------------------------


@dataclass(frozen=True)
class Prepared:
    """Pairs and pool in the representation the counting kernels consume."""

    manifold: Manifold
    geometry: str
    z: np.ndarray
    z_nu: np.ndarray
    w: np.ndarray

    @property
    def n(self):
        return len(self.z)

    @property
    def n_w(self):
        return len(self.w)

    def take(self, pair_idx, w_idx) -> "Prepared":
        return Prepared(self.manifold, self.geometry, self.z[pair_idx], self.z_nu[pair_idx], self.w[w_idx])


def prepare(pairs: PickFreezeSample, wpool: WPool, manifold: Manifold) -> Prepared:
    z = manifold.as_batch(pairs.z)
    zv = manifold.as_batch(pairs.z_nu)
    w = manifold.as_batch(wpool.points)
    if len(z) < 2 or len(w) < 2:
        raise TooFewSamples(f"need N >= 2 and Nw >= 2, got N={len(z)}, Nw={len(w)}")
    if manifold.geometry == "sphere":
        return Prepared(manifold, "sphere", z, zv, w)
    chart = manifold.chart(np.concatenate([z, zv, w]))
    if chart is not None:
        n = len(z)
        return Prepared(manifold, "flat", chart[:n], chart[n : 2 * n], chart[2 * n :])
    return Prepared(manifold, "generic", z, zv, w)


# -- pool-pair sampling ----------------------------------------------------


def _pair_from_linear(lin: np.ndarray, nw: int) -> np.ndarray:
    """Map linear indices of P_{nw,2} (lexicographic order) to (k1, k2)."""
    lin = np.asarray(lin, dtype=np.int64)
    # rows k1 start at offset k1*nw - k1*(k1+1)/2
    b = 2 * nw - 1
    k1 = np.floor((b - np.sqrt(b * b - 8.0 * lin)) / 2).astype(np.int64)
    start = k1 * nw - k1 * (k1 + 1) // 2
    k1 = np.where(start > lin, k1 - 1, k1)
    start = k1 * nw - k1 * (k1 + 1) // 2
    nxt = (k1 + 1) * nw - (k1 + 1) * (k1 + 2) // 2
    k1 = np.where(nxt <= lin, k1 + 1, k1)
    start = k1 * nw - k1 * (k1 + 1) // 2
    k2 = lin - start + k1 + 1
    return np.column_stack([k1, k2])


def draw_taus(nw: int, m: int, rng) -> np.ndarray | None:
    """``m`` distinct pool pairs, or ``None`` when ``m`` covers them all."""
    total = nw * (nw - 1) // 2
    if m >= total:
        return None
    lin = np.sort(as_generator(rng).choice(total, size=m, replace=False))
    return _pair_from_linear(lin, nw)


# -- counting --------------------------------------------------------------


def _unique_rows(rows: np.ndarray):
    """Distinct rows and the inverse map; a lexsort is far cheaper than ``np.unique(axis=0)``."""
    order = np.lexsort(rows.T[::-1])
    ordered = rows[order]
    new = np.empty(len(rows), dtype=bool)
    new[0] = True
    new[1:] = np.any(ordered[1:] != ordered[:-1], axis=1)
    group = np.cumsum(new) - 1
    inv = np.empty(len(rows), dtype=np.int64)
    inv[order] = group
    return ordered[new], inv


def _grouped_counts(prep: Prepared):
    """Exact counts via deduplication of repeated points (discrete outputs)."""
    n = prep.n
    stacked = np.concatenate([prep.z, prep.z_nu, prep.w]).reshape(2 * n + prep.n_w, -1)
    uniq, inv = _unique_rows(stacked)
    k = len(uniq)
    if k > GROUPED_MAX_UNIQUE:
        return None
    iz, iv, iw = inv[:n], inv[n : 2 * n], inv[2 * n :]
    cell = np.zeros((k, k), dtype=np.int64)
    np.add.at(cell, (iz, iv), 1)
    marg = np.bincount(iz, minlength=k) + np.bincount(iv, minlength=k)
    wcount = np.bincount(iw, minlength=k)
    pts = uniq.reshape((k,) + prep.z.shape[1:])
    sg = ss = sq = ntau = dropped = 0
    for u in range(k):
        if wcount[u] == 0:
            continue
        for v in range(u, k):
            weight = int(wcount[u]) * int(wcount[v]) if u != v else int(wcount[u]) * (int(wcount[u]) - 1) // 2
            if weight == 0:
                continue
            try:
                mask = _mask(prep, pts[u], pts[v], pts)
            except AntipodalPoints:
                dropped += weight
                continue
            h = mask.astype(np.int64)
            g = int(h @ cell @ h)
            s = int(h @ marg)
            sg += weight * g
            ss += weight * s
            sq += weight * s * s
            ntau += weight
    return kernels.BallCounts(sg, ss, sq, ntau, dropped)


def _mask(prep: Prepared, w1, w2, targets):
    from .manifolds import flat_ball_mask, sphere_ball_mask

    tol = prep.manifold.tol
    if prep.geometry == "flat":
        return flat_ball_mask(w1, w2, targets, tol)
    if prep.geometry == "sphere":
        return sphere_ball_mask(w1, w2, targets, tol)
    return prep.manifold.ball_mask(w1, w2, targets)


def count_balls(prep: Prepared, mode=ExactU(), rng=None) -> kernels.BallCounts:
    """Integer ball-membership totals over the pool pairs selected by ``mode``."""
    mode = parse_mode(mode)
    taus = None
    if isinstance(mode, IncompleteU):
        if rng is None:
            raise ValueError("an incomplete U-statistic needs a random stream for the pool pairs")
        taus = draw_taus(prep.n_w, mode.m, rng)
    if taus is None:
        grouped = _grouped_counts(prep) if prep.n + prep.n_w > 4 * GROUPED_MAX_UNIQUE else None
        if grouped is not None:
            return grouped
    if prep.geometry in ("flat", "sphere"):
        return kernels.ball_counts(prep.geometry, prep.z, prep.z_nu, prep.w, prep.manifold.tol, taus)
    return kernels.generic_ball_counts(prep.manifold, prep.z, prep.z_nu, prep.w, taus)


def _ratios(counts: kernels.BallCounts, n: int) -> tuple[float, float]:
    t = counts.n_tau
    s_hat = Fraction(counts.sum_g, n * t) - Fraction(counts.sum_s2, 4 * n * n * t)
    d_hat = Fraction(counts.sum_s, 2 * n * t) - Fraction(counts.sum_s2, 4 * n * n * t)
    return float(s_hat), float(d_hat)


def _finish(counts, prep, mode, started, allow_degenerate=False) -> IndexEstimate:
    total = counts.n_tau + counts.n_dropped
    if counts.n_tau == 0:
        raise DegenerateBalls(f"all {total} pool pairs were dropped (non-unique geodesics)")
    if counts.n_dropped > DROP_WARN_FRACTION * total:
        warnings.warn(
            f"{counts.n_dropped} of {total} pool pairs dropped for non-unique geodesics",
            DroppedPairsWarning,
            stacklevel=3,
        )
    s_hat, d_hat = _ratios(counts, prep.n)
    if d_hat <= DENOM_FLOOR:
        if allow_degenerate:
            b_hat = float("nan")
        else:
            raise DegenerateDenominator(
                f"denominator estimate {d_hat:.3g} <= {DENOM_FLOOR}; the index is undefined",
                s_hat,
                d_hat,
            )
    else:
        b_hat = s_hat / d_hat
    return IndexEstimate(
        s_hat=s_hat,
        d_hat=d_hat,
        b_hat=b_hat,
        n_pairs=prep.n,
        n_w=prep.n_w,
        mode=str(parse_mode(mode)),
        n_tau=counts.n_tau,
        n_dropped=counts.n_dropped,
        elapsed=time.perf_counter() - started,
    )


def estimate_prepared(prep: Prepared, mode=ExactU(), rng=None, allow_degenerate=False) -> IndexEstimate:
    started = time.perf_counter()
    counts = count_balls(prep, mode, rng)
    return _finish(counts, prep, mode, started, allow_degenerate)


def _estimate(pairs, wpool, manifold, mode, rng, allow_degenerate):
    return estimate_prepared(prepare(pairs, wpool, manifold), mode, rng, allow_degenerate)


def estimate_S(pairs: PickFreezeSample, wpool: WPool, manifold: Manifold, mode=ExactU(), rng=None) -> float:
    """Numerator estimate: mean over pool pairs of ``g/N - (s/2N)^2``."""
    return _estimate(pairs, wpool, manifold, mode, rng, True).s_hat


def estimate_D(pairs: PickFreezeSample, wpool: WPool, manifold: Manifold, mode=ExactU(), rng=None) -> float:
    """Denominator estimate: mean over pool pairs of ``Jbar (1 - Jbar)``."""
    return _estimate(pairs, wpool, manifold, mode, rng, True).d_hat


def estimate_B(pairs: PickFreezeSample, wpool: WPool, manifold: Manifold, mode=ExactU(), rng=None) -> IndexEstimate:
    """Ball sensitivity index ``S/D`` with its parts.

    Raises
    ------
    DegenerateDenominator
        If the denominator estimate is at most 1e-12.
    """
    return _estimate(pairs, wpool, manifold, mode, rng, False)


# -- Cramer-von Mises comparison ------------------------------------------


def estimate_cvm(
    pairs: PickFreezeSample,
    wpool: WPool,
    manifold: Manifold | None = None,
    mode=ExactU(),
    rng=None,
    embed=None,
    allow_degenerate: bool = False,
) -> IndexEstimate:
    """Quadrant Cramer-von Mises index with the same pick-freeze structure.

    The ball indicator is replaced by ``1{z <= w}`` (componentwise) for
    single pool points ``w``.  Points are mapped to ``R^p`` with ``embed``, or
    with ``manifold.embed`` when no embedding is given.
    """
    started = time.perf_counter()
    if embed is None:
        if manifold is None:
            raise ValueError("estimate_cvm needs a manifold or an embedding")
        embed = manifold.embed
    z, zv, w = embed(pairs.z), embed(pairs.z_nu), embed(wpool.points)
    z, zv, w = (np.asarray(a, float).reshape(len(a), -1) for a in (z, zv, w))
    if len(z) < 2 or len(w) < 2:
        raise TooFewSamples(f"need N >= 2 and Nw >= 2, got N={len(z)}, Nw={len(w)}")
    mode = parse_mode(mode)
    idx = None
    if isinstance(mode, IncompleteU) and mode.m < len(w):
        if rng is None:
            raise ValueError("an incomplete U-statistic needs a random stream")
        idx = np.sort(as_generator(rng).choice(len(w), size=mode.m, replace=False))
    counts = kernels.quadrant_counts(z, zv, w, idx)
    prep = Prepared(manifold, "quadrant", z, zv, w)
    return _finish(counts, prep, mode, started, allow_degenerate)


# -- classical pick-freeze variance ---------------------------------------


def pick_freeze_variance_T(z, z_nu) -> float:
    """``mean(Z Z^nu) - (mean(Z + Z^nu) / 2)^2`` for scalar outputs."""
    z = np.asarray(z, dtype=float).ravel()
    z_nu = np.asarray(z_nu, dtype=float).ravel()
    if len(z) < 2 or len(z) != len(z_nu):
        raise TooFewSamples("need at least two scalar pairs of equal length")
    n = len(z)
    return float(np.sum(z * z_nu) / n - (np.sum(z + z_nu) / (2 * n)) ** 2)

"""Bootstrap intervals, mean-squared-deviation studies and tail diagnostics."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateDenominator, TooFewValidReplicates
from .estimators import ExactU, Prepared, estimate_cvm, estimate_prepared, parse_mode, prepare
from .manifolds import Manifold
from .models import Model, PickFreezeSample, WPool, pick_freeze, sample_w_pool
from .rng import StreamKey, as_generator, stream

MIN_REPS = 100
DISCARD_WARN_FRACTION = 0.05


class DiscardedReplicatesWarning(RuntimeWarning):
    pass


@dataclass(frozen=True)
class ConfidenceInterval:
    lower: float
    upper: float
    level: float
    replicates: int
    method: str = "percentile-bootstrap"
    discarded: int = 0
    se: float = 0.0

    def __post_init__(self):
        if not self.lower <= self.upper:
            raise ValueError("interval lower bound exceeds upper bound")


def bootstrap_replicates(prep: Prepared, reps: int, rng, mode=ExactU()) -> tuple[np.ndarray, int]:
    """Ball-index estimates on ``reps`` joint resamples of the pairs and the pool.

    Returns the finite replicate values and the number discarded for a
    degenerate denominator.
    """
    rng = as_generator(rng)
    mode = parse_mode(mode)
    values, discarded = [], 0
    for _ in range(reps):
        pair_idx = rng.integers(0, prep.n, prep.n)
        w_idx = rng.integers(0, prep.n_w, prep.n_w)
        try:
            est = estimate_prepared(prep.take(pair_idx, w_idx), mode, rng)
        except DegenerateDenominator:
            discarded += 1
            continue
        values.append(est.b_hat)
    return np.asarray(values), discarded


def cvm_bootstrap_replicates(pairs, wpool, manifold, reps: int, rng, mode=ExactU()) -> tuple[np.ndarray, int]:
    """Same resampling scheme for the quadrant Cramer-von Mises index."""
    rng = as_generator(rng)
    values, discarded = [], 0
    for _ in range(reps):
        pair_idx = rng.integers(0, pairs.n, pairs.n)
        w_idx = rng.integers(0, wpool.n, wpool.n)
        try:
            est = estimate_cvm(pairs.take(pair_idx), wpool.take(w_idx), manifold, mode, rng)
        except DegenerateDenominator:
            discarded += 1
            continue
        values.append(est.b_hat)
    return np.asarray(values), discarded


def bootstrap_ci(
    pairs: PickFreezeSample,
    wpool: WPool,
    manifold: Manifold,
    reps: int = 200,
    level: float = 0.95,
    stream=None,
    mode=ExactU(),
    index: str = "ball",
) -> ConfidenceInterval:
    """Percentile bootstrap interval for the ball index (or, with
    ``index="cvm"``, the quadrant Cramer-von Mises index).

    Each replicate resamples the ``N`` pairs and the ``Nw`` pool points with
    replacement.  Replicates with a degenerate denominator are discarded.

    Raises
    ------
    TooFewValidReplicates
        If fewer than half of the replicates are usable.
    """
    if reps < MIN_REPS:
        raise ValueError(f"bootstrap needs at least {MIN_REPS} replicates, got {reps}")
    if not 0.0 < level < 1.0:
        raise ValueError("level must lie in (0, 1)")
    if stream is None:
        raise ValueError("bootstrap_ci needs an explicit random stream")
    if isinstance(stream, StreamKey) and stream.role != "bootstrap":
        raise ValueError("bootstrap draws must come from a 'bootstrap' stream")
    if index == "ball":
        values, discarded = bootstrap_replicates(prepare(pairs, wpool, manifold), reps, stream, mode)
    elif index == "cvm":
        values, discarded = cvm_bootstrap_replicates(pairs, wpool, manifold, reps, stream, mode)
    else:
        raise ValueError(f"unknown index {index!r}; expected 'ball' or 'cvm'")
    return interval_from_replicates(values, discarded, reps, level)


def interval_from_replicates(values, discarded: int, reps: int, level: float) -> ConfidenceInterval:
    if len(values) < reps / 2:
        raise TooFewValidReplicates(f"only {len(values)} of {reps} bootstrap replicates were valid")
    if discarded > DISCARD_WARN_FRACTION * reps:
        warnings.warn(f"{discarded} of {reps} bootstrap replicates discarded", DiscardedReplicatesWarning, stacklevel=2)
    alpha = 1.0 - level
    lo, hi = np.quantile(values, [alpha / 2, 1.0 - alpha / 2])
    se = float(np.std(values, ddof=1)) if len(values) > 1 else 0.0
    return ConfidenceInterval(float(lo), float(hi), level, reps, discarded=discarded, se=se)


# -- MSD studies -----------------------------------------------------------


@dataclass(frozen=True)
class MsdRow:
    n: int
    msd: float
    msd_se: float
    replicates: int

    @property
    def rmsd(self) -> float:
        """Root of the mean squared deviation, on the scale of the index itself."""
        return math.sqrt(self.msd)


def replicate_estimates(model: Model, nu, n: int, replicates: int, seed: int, mode=ExactU(), n_w=None, tag=0):
    """Independent ball-index estimates; replicate ``r`` uses streams keyed ``(tag, n, r)``."""
    manifold = model.manifold
    n_w = n_w or n
    out = []
    for r in range(replicates):
        pairs = pick_freeze(model, nu, n, stream(seed, "pairs", tag, n, r))
        pool = sample_w_pool(model, n_w, stream(seed, "wpool", tag, n, r))
        prep = prepare(pairs, pool, manifold)
        out.append(estimate_prepared(prep, mode, stream(seed, "bootstrap", tag, n, r).generator()))
    return out


def msd_from_values(values, truth: float) -> tuple[float, float]:
    sq = (np.asarray(values, dtype=float) - truth) ** 2
    se = float(np.std(sq, ddof=1) / math.sqrt(len(sq))) if len(sq) > 1 else 0.0
    return float(np.mean(sq)), se


def msd_study(model: Model, nu, truth: float, sizes, replicates: int, seed: int, mode=ExactU(), tag=0) -> list[MsdRow]:
    """Mean squared deviation of the ball index from ``truth`` for each sample size."""
    rows = []
    for n in sizes:
        ests = replicate_estimates(model, nu, n, replicates, seed, mode, tag=tag)
        msd, se = msd_from_values([e.b_hat for e in ests], truth)
        rows.append(MsdRow(n, msd, se, replicates))
    return rows


# -- concentration ---------------------------------------------------------


def concentration_bound(s, n: int):
    """``16 exp(-N (s/9)^2 / 8)``."""
    return 16.0 * np.exp(-n * (np.asarray(s, dtype=float) / 9.0) ** 2 / 8.0)


@dataclass(frozen=True)
class ConcentrationReport:
    n: int
    s_grid: np.ndarray
    tail: np.ndarray
    bound: np.ndarray
    replicates: int
    abs_errors: np.ndarray = field(repr=False)

    @property
    def violations(self) -> np.ndarray:
        return self.tail > self.bound

    def quantile(self, q: float) -> float:
        return float(np.quantile(self.abs_errors, q))


def concentration_diagnostic(
    model: Model, nu, s_true: float, n: int, replicates: int, s_grid, seed: int, mode=ExactU(), tag=0
) -> ConcentrationReport:
    """Empirical tail ``P(|S_hat - S| > s)`` against the exponential bound."""
    s_grid = np.sort(np.asarray(s_grid, dtype=float))
    ests = replicate_estimates(model, nu, n, replicates, seed, mode, tag=tag)
    err = np.abs(np.array([e.s_hat for e in ests]) - s_true)
    tail = np.array([np.mean(err > s) for s in s_grid])
    report = ConcentrationReport(n, s_grid, tail, concentration_bound(s_grid, n), replicates, err)
    if np.any(report.violations):
        warnings.warn("empirical tail exceeds the exponential bound; check the estimator", RuntimeWarning, stacklevel=2)
    return report

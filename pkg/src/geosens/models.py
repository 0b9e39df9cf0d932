"""Input laws, model functions and pick-freeze sampling.

Input coordinates are labelled ``1..d`` throughout, so ``nu=(1,)`` freezes
the first input.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import DegenerateInput, InvalidNu, SamplingStalled
from .manifolds import LogSurface, Manifold, RealLine, Sphere, SpdAffine
from .rng import StreamKey, as_generator

MAX_REJECTIONS = 100
STIFFNESS_FLOOR = 1e-10


# -- input laws ------------------------------------------------------------


@dataclass(frozen=True)
class Bernoulli:
    p: float

    def __post_init__(self):
        if not 0.0 <= self.p <= 1.0:
            raise ValueError(f"Bernoulli p={self.p} outside [0, 1]")

    def sample(self, rng, n):
        return (rng.random(n) < self.p).astype(float)


@dataclass(frozen=True)
class Uniform:
    a: float
    b: float

    def __post_init__(self):
        if not self.b > self.a:
            raise ValueError(f"Uniform needs b > a, got ({self.a}, {self.b})")

    def sample(self, rng, n):
        return rng.uniform(self.a, self.b, n)


@dataclass(frozen=True)
class Normal:
    mean: float
    variance: float

    def __post_init__(self):
        if not self.variance > 0:
            raise ValueError("Normal variance must be positive")

    def sample(self, rng, n):
        return rng.normal(self.mean, math.sqrt(self.variance), n)


@dataclass(frozen=True)
class Gamma:
    shape: float
    scale: float

    def __post_init__(self):
        if not (self.shape > 0 and self.scale > 0):
            raise ValueError("Gamma shape and scale must be positive")

    def sample(self, rng, n):
        return rng.gamma(self.shape, self.scale, n)


@dataclass(frozen=True)
class Discrete:
    """Finite law on ``values`` with probabilities ``weights``."""

    values: tuple[float, ...]
    weights: tuple[float, ...]

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if len(self.values) != len(w) or len(w) == 0:
            raise ValueError("Discrete needs one weight per value")
        if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-12:
            raise ValueError("Discrete weights must be non-negative and sum to 1")

    def sample(self, rng, n):
        idx = rng.choice(len(self.values), size=n, p=np.asarray(self.weights, float))
        return np.asarray(self.values, dtype=float)[idx]


@dataclass(frozen=True)
class DistributionSpec:
    """Product law of independent input coordinates."""

    laws: tuple

    def __init__(self, laws: Sequence):
        object.__setattr__(self, "laws", tuple(laws))
        if not self.laws:
            raise ValueError("a distribution needs at least one coordinate")

    @property
    def d(self) -> int:
        return len(self.laws)

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        # column by column, so draws depend only on (law, n, stream)
        return np.column_stack([law.sample(rng, n) for law in self.laws])


def sample_inputs(dist: DistributionSpec, n: int, stream) -> np.ndarray:
    if n < 1:
        raise ValueError("n must be at least 1")
    return dist.sample(as_generator(stream), n)


# -- models ----------------------------------------------------------------


class Model:
    """A map from ``R^d`` to a manifold, together with its input law.

    Subclasses implement :meth:`_evaluate` on a batch ``x`` of shape (n, d)
    and may override :meth:`valid` to flag rows where the output is undefined.
    """

    dist: DistributionSpec
    manifold: Manifold

    @property
    def d(self) -> int:
        return self.dist.d

    def valid(self, x: np.ndarray) -> np.ndarray:
        return np.ones(len(x), dtype=bool)

    def _evaluate(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def evaluate(self, x) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if x.shape[1] != self.d:
            raise ValueError(f"expected inputs with {self.d} columns, got {x.shape[1]}")
        ok = self.valid(x)
        if not np.all(ok):
            bad = x[np.flatnonzero(~ok)[0]]
            raise DegenerateInput(f"{type(self).__name__} undefined at x={bad.tolist()}")
        return self._evaluate(x)


@dataclass(frozen=True)
class Example1(Model):
    """``Z = alpha X1 + X2`` with ``X1 ~ Bernoulli(p)`` and ``X2 ~ U(0, b)``.

    When ``b`` is omitted it is set to ``sqrt(12 alpha^2 p (1-p))`` so that
    ``Var X2 = alpha^2 p (1-p)``.
    """

    alpha: float = 1.0
    p: float = 0.5
    b: float | None = None

    def __post_init__(self):
        if self.alpha < 0:
            raise ValueError("alpha must be non-negative")
        if self.b is None:
            object.__setattr__(self, "b", math.sqrt(12.0 * self.alpha**2 * self.p * (1.0 - self.p)))

    @property
    def dist(self):
        return DistributionSpec([Bernoulli(self.p), Uniform(0.0, self.b)])

    @property
    def manifold(self):
        return RealLine()

    def _evaluate(self, x):
        return self.alpha * x[:, 0] + x[:, 1]


@dataclass(frozen=True)
class Example2(Model):
    """Direction ``X / |X|`` of a bivariate normal with independent coordinates."""

    mu1: float = 0.0
    mu2: float = 0.0
    sigma1sq: float = 1.0
    sigma2sq: float = 1.0

    @property
    def dist(self):
        return DistributionSpec([Normal(self.mu1, self.sigma1sq), Normal(self.mu2, self.sigma2sq)])

    @property
    def manifold(self):
        return Sphere(d=2)

    def valid(self, x):
        return np.hypot(x[:, 0], x[:, 1]) >= 1e-12

    def _evaluate(self, x):
        return x / np.hypot(x[:, 0], x[:, 1])[:, None]


@dataclass(frozen=True)
class Example3(Model):
    """``(X+Y, 1/X, X/(X+Y))`` on the surface ``xyz = 1``; ``X, Y ~ Gamma(mu1, 1)`` i.i.d."""

    mu1: float = 1.0

    @property
    def dist(self):
        return DistributionSpec([Gamma(self.mu1, 1.0), Gamma(self.mu1, 1.0)])

    @property
    def manifold(self):
        return LogSurface()

    def valid(self, x):
        return (x[:, 0] > 0) & (x[:, 1] >= 0) & np.isfinite(1.0 / np.where(x[:, 0] > 0, x[:, 0], 1.0))

    def _evaluate(self, x):
        s = x[:, 0] + x[:, 1]
        return np.column_stack([s, 1.0 / x[:, 0], x[:, 0] / s])


def stiffness_matrix(k, mu) -> np.ndarray:
    """6x6 isotropic stiffness matrix(es) from bulk modulus ``k`` and shear modulus ``mu``."""
    k = np.atleast_1d(np.asarray(k, dtype=float))
    mu = np.atleast_1d(np.asarray(mu, dtype=float))
    out = np.zeros((len(k), 6, 6))
    off = (k - 2.0 * mu / 3.0)[:, None, None]
    out[:, :3, :3] = off * np.ones((3, 3)) + 2.0 * mu[:, None, None] * np.eye(3)
    out[:, 3:, 3:] = mu[:, None, None] * np.eye(3)
    return out


@dataclass(frozen=True)
class Stiffness(Model):
    """Isotropic stiffness matrix with random moduli; inputs are ``(mu, K)``.

    ``case="gamma"``: each modulus ~ Gamma(shape 1/lam, scale lam) (mean 1, variance lam).
    ``case="uniform"``: each modulus ~ U(1 - lam, 1 + lam).
    Draws at or below 1e-10 are rejected, keeping the output positive definite.
    """

    case: str = "gamma"
    lambda_k: float = 0.1
    lambda_mu: float = 0.1

    def __post_init__(self):
        if self.case not in ("gamma", "uniform"):
            raise ValueError(f"unknown stiffness case {self.case!r}")
        if not (self.lambda_k > 0 and self.lambda_mu > 0):
            raise ValueError("lambda_k and lambda_mu must be positive")

    def _law(self, lam):
        if self.case == "gamma":
            return Gamma(1.0 / lam, lam)
        return Uniform(1.0 - lam, 1.0 + lam)

    @property
    def dist(self):
        return DistributionSpec([self._law(self.lambda_mu), self._law(self.lambda_k)])

    @property
    def manifold(self):
        return SpdAffine(m=6)

    def valid(self, x):
        return (x[:, 0] > STIFFNESS_FLOOR) & (x[:, 1] > STIFFNESS_FLOOR)

    def _evaluate(self, x):
        return stiffness_matrix(x[:, 1], x[:, 0])


@dataclass(frozen=True)
class CustomModel(Model):
    """User model: ``hook`` maps an (n, d) input batch to a batch of manifold points.

    ``validity`` optionally maps the batch to a boolean mask of defined rows.
    """

    dist: DistributionSpec = None
    manifold: Manifold = None
    hook: Callable = None
    validity: Callable | None = None

    def __post_init__(self):
        if self.dist is None or self.manifold is None or self.hook is None:
            raise ValueError("CustomModel needs dist, manifold and hook")

    def valid(self, x):
        if self.validity is None:
            return np.ones(len(x), dtype=bool)
        return np.asarray(self.validity(x), dtype=bool)

    def _evaluate(self, x):
        return np.asarray(self.hook(x), dtype=float)


def evaluate_model(model: Model, x) -> np.ndarray:
    """Evaluate ``model`` at a single input vector ``x``; returns one manifold point."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise ValueError("evaluate_model takes one input vector; use Model.evaluate for batches")
    out = model.evaluate(x[None])[0]
    return model.manifold.validate(out)


# -- pick-freeze sampling --------------------------------------------------


def _stream_of(src):
    return src if isinstance(src, StreamKey) else None


@dataclass(frozen=True)
class PickFreezeSample:
    """``N`` output pairs ``(Z_j, Z_j^nu)`` sharing the frozen inputs ``X_nu``."""

    nu: tuple[int, ...]
    z: np.ndarray
    z_nu: np.ndarray
    stream: StreamKey | None = None
    inputs: np.ndarray | None = field(default=None, repr=False)
    inputs_nu: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        if len(self.z) != len(self.z_nu):
            raise ValueError("pair members must have equal length")

    @property
    def n(self) -> int:
        return len(self.z)

    def take(self, idx) -> "PickFreezeSample":
        return PickFreezeSample(self.nu, self.z[idx], self.z_nu[idx], self.stream)


@dataclass(frozen=True)
class WPool:
    """Independent copies of the output used to index the diameter balls."""

    points: np.ndarray
    stream: StreamKey | None = None

    @property
    def n(self) -> int:
        return len(self.points)

    def take(self, idx) -> "WPool":
        return WPool(self.points[idx], self.stream)


def check_nu(nu, d: int) -> tuple[int, ...]:
    nu = tuple(sorted({int(i) for i in nu}))
    if not nu:
        raise InvalidNu("nu must not be empty")
    if nu[0] < 1 or nu[-1] > d:
        raise InvalidNu(f"nu={nu} out of range 1..{d}")
    if len(nu) == d:
        raise InvalidNu("nu must leave at least one input free")
    return nu


def _redraw(model, rng, n, build):
    """Draw ``n`` rows via ``build(rng, k) -> (rows, ok_mask)``, redrawing failures."""
    rows, ok = build(rng, n)
    for _ in range(MAX_REJECTIONS):
        bad = np.flatnonzero(~ok)
        if len(bad) == 0:
            return rows
        new_rows, new_ok = build(rng, len(bad))
        for r, nr in zip(rows, new_rows):
            r[bad] = nr
        ok[bad] = new_ok
    if np.any(~ok):
        raise SamplingStalled(
            f"{type(model).__name__}: {int(np.sum(~ok))} draws still invalid after {MAX_REJECTIONS} redraws"
        )
    return rows


def pick_freeze(model: Model, nu, n: int, stream) -> PickFreezeSample:
    """Draw ``n`` pick-freeze pairs for the frozen set ``nu``.

    For each ``j``: ``X_j`` and ``X'_j`` are independent draws, ``Z_j = f(X_j)``
    and ``Z_j^nu = f(X^nu_j)`` where ``X^nu_j`` takes the ``nu`` coordinates
    from ``X_j`` and the others from ``X'_j``.
    """
    nu = check_nu(nu, model.d)
    if n < 2:
        raise ValueError("pick-freeze needs N >= 2")
    if isinstance(stream, StreamKey) and stream.role != "pairs":
        raise ValueError(f"pick-freeze pairs must come from a 'pairs' stream, got {stream.role!r}")
    rng = as_generator(stream)
    frozen = np.array(nu) - 1

    def build(rng, k):
        x = model.dist.sample(rng, k)
        xp = model.dist.sample(rng, k)
        xp[:, frozen] = x[:, frozen]
        return (x, xp), model.valid(x) & model.valid(xp)

    x, x_nu = _redraw(model, rng, n, build)
    man = model.manifold
    z = man.validate_many(model.evaluate(x))
    z_nu = man.validate_many(model.evaluate(x_nu))
    return PickFreezeSample(nu, z, z_nu, _stream_of(stream), x, x_nu)


def sample_w_pool(model: Model, n: int, stream) -> WPool:
    """Draw ``n`` i.i.d. outputs for the ball pool, from a stream disjoint from the pairs'."""
    if n < 2:
        raise ValueError("the pool needs Nw >= 2")
    if isinstance(stream, StreamKey) and stream.role == "pairs":
        raise ValueError("the pool must not share the pick-freeze stream role")
    rng = as_generator(stream)

    def build(rng, k):
        x = model.dist.sample(rng, k)
        return (x,), model.valid(x)

    (x,) = _redraw(model, rng, n, build)
    return WPool(model.manifold.validate_many(model.evaluate(x)), _stream_of(stream))

"""Output manifolds: distances, geodesic midpoints and diameter balls.

Points are plain numpy arrays whose shape is fixed by the manifold:

=================  ==============  =====================
manifold           one point       batch of ``n`` points
=================  ==============  =====================
:class:`RealLine`  ``()``          ``(n,)``
:class:`Sphere`    ``(d,)``        ``(n, d)``
:class:`SpdAffine` ``(m, m)``      ``(n, m, m)``
:class:`LogSurface` ``(3,)``       ``(n, 3)``
:class:`Euclid`    ``(p,)``        ``(n, p)``
=================  ==============  =====================

The ball of diameter ``pq`` is the closed geodesic ball centred at the
midpoint of ``p`` and ``q`` with radius ``d(p, q) / 2``.  Membership is
tested with an additive slack ``tol`` so that ``p`` and ``q`` always belong to
their own ball.

Flat manifolds (real line, log surface, Euclidean space) are handled through
a *chart*: coordinates in which the Riemannian distance is the Euclidean one.
All flat ball tests go through :func:`flat_ball_mask`, which is written to
round exactly like the compiled kernels in :mod:`geosens.kernels`.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    AntipodalPoints,
    IncompatibleIsometry,
    InvalidPoint,
    NumericalFailure,
)

DEFAULT_TOL = 1e-10
ANTIPODAL_EPS = 1e-9
EIG_FLOOR = 1e-14
POINT_TOL = 1e-9


# -- shared numerics -------------------------------------------------------


def seq_norm(x: np.ndarray) -> np.ndarray:
    """Euclidean norm over the last axis, summing coordinates left to right."""
    x = np.asarray(x, dtype=float)
    acc = np.zeros(x.shape[:-1])
    for a in range(x.shape[-1]):
        acc = acc + x[..., a] * x[..., a]
    return np.sqrt(acc)


def seq_sq(x: np.ndarray) -> np.ndarray:
    """Squared Euclidean norm over the last axis, summed left to right."""
    x = np.asarray(x, dtype=float)
    acc = np.zeros(x.shape[:-1])
    for a in range(x.shape[-1]):
        acc = acc + x[..., a] * x[..., a]
    return acc


def seq_dot(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    acc = np.zeros(np.broadcast_shapes(x.shape, y.shape)[:-1])
    for a in range(x.shape[-1]):
        acc = acc + x[..., a] * y[..., a]
    return acc


def flat_ball_mask(c1: np.ndarray, c2: np.ndarray, targets: np.ndarray, tol: float) -> np.ndarray:
    """Membership of chart points ``targets`` (n, p) in the ball of diameter c1 c2.

    Squared distances are compared with the squared slackened radius; the
    compiled kernels use the same operations in the same order.
    """
    center = 0.5 * (c1 + c2)
    radius = 0.5 * np.sqrt(seq_sq(c1 - c2)) + tol
    return seq_sq(targets - center) <= radius * radius


def sphere_ball_mask(w1: np.ndarray, w2: np.ndarray, targets: np.ndarray, tol: float) -> np.ndarray:
    dot = float(seq_dot(w1, w2))
    if dot < -1.0 + ANTIPODAL_EPS:
        raise AntipodalPoints(f"inner product {dot!r} is within {ANTIPODAL_EPS} of -1")
    s = w1 + w2
    center = s / seq_norm(s)
    radius = 0.5 * np.arccos(min(max(dot, -1.0), 1.0)) + tol
    # arccos is decreasing, so the angular test is a cosine threshold
    return seq_dot(targets, center) >= np.cos(radius)


def _eigh(a: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    try:
        w, v = np.linalg.eigh(a)
    except np.linalg.LinAlgError as exc:
        raise NumericalFailure(f"symmetric eigendecomposition failed: {exc}") from exc
    if not (np.all(np.isfinite(w)) and np.all(np.isfinite(v))):
        raise NumericalFailure("symmetric eigendecomposition returned non-finite values")
    return w, v


def _eigvalsh(a: np.ndarray) -> np.ndarray:
    try:
        w = np.linalg.eigvalsh(a)
    except np.linalg.LinAlgError as exc:
        raise NumericalFailure(f"symmetric eigendecomposition failed: {exc}") from exc
    if not np.all(np.isfinite(w)):
        raise NumericalFailure("symmetric eigendecomposition returned non-finite values")
    return w


def _sym(a: np.ndarray) -> np.ndarray:
    return 0.5 * (a + np.swapaxes(a, -1, -2))


def spd_function(a: np.ndarray, fn) -> np.ndarray:
    """Apply a scalar function to the eigenvalues of a symmetric matrix (or batch)."""
    w, v = _eigh(_sym(a))
    return _sym((v * fn(w)[..., None, :]) @ np.swapaxes(v, -1, -2))


def spd_sqrt(a):
    return spd_function(a, lambda w: np.sqrt(np.maximum(w, EIG_FLOOR)))


def spd_invsqrt(a):
    return spd_function(a, lambda w: 1.0 / np.sqrt(np.maximum(w, EIG_FLOOR)))


def spd_log(a):
    return spd_function(a, lambda w: np.log(np.maximum(w, EIG_FLOOR)))


def spd_power(a, t: float):
    return spd_function(a, lambda w: np.maximum(w, EIG_FLOOR) ** t)


def _ordered(p: np.ndarray, q: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    # any fixed total order works; it only has to make f(p, q) == f(q, p) bitwise
    return (p, q) if p.tobytes() <= q.tobytes() else (q, p)


# -- manifolds -------------------------------------------------------------


@dataclass(frozen=True)
class Manifold:
    """Common interface.  Subclasses fill in the geometry."""

    tol: float = field(default=DEFAULT_TOL, kw_only=True)

    #: "flat" (chart available), "sphere" or "generic"
    geometry = "generic"
    name = "manifold"

    def __post_init__(self):
        if not self.tol >= 0:
            raise ValueError("tolerance must be non-negative")

    # shape handling
    @property
    def point_shape(self) -> tuple[int, ...]:
        raise NotImplementedError

    def as_batch(self, pts) -> np.ndarray:
        arr = np.asarray(pts, dtype=float)
        if arr.shape == self.point_shape:
            return arr[None]
        if arr.shape[1:] != self.point_shape:
            raise InvalidPoint(
                f"{self.name}: expected point shape {self.point_shape}, got array of shape {arr.shape}"
            )
        return arr

    def validate(self, p) -> np.ndarray:
        """Return ``p`` as a float array, raising :class:`InvalidPoint` on violations."""
        arr = np.asarray(p, dtype=float)
        if arr.shape != self.point_shape:
            raise InvalidPoint(f"{self.name}: expected shape {self.point_shape}, got {arr.shape}")
        self.validate_many(arr[None])
        return arr

    def validate_many(self, pts) -> np.ndarray:
        arr = self.as_batch(pts)
        if not np.all(np.isfinite(arr)):
            raise InvalidPoint(f"{self.name}: non-finite coordinates")
        return arr

    # geometry
    def distance(self, p, q) -> float:
        raise NotImplementedError

    def midpoint(self, p, q) -> np.ndarray:
        raise NotImplementedError

    def ball_mask(self, p, q, targets) -> np.ndarray:
        """Boolean membership of each point of ``targets`` in the ball of diameter ``pq``."""
        raise NotImplementedError

    def ball_contains(self, p, q, t) -> bool:
        return bool(self.ball_mask(p, q, self.as_batch(t))[0])

    def chart(self, pts) -> np.ndarray | None:
        """Flat coordinates (n, k) in which distances are Euclidean, or ``None``."""
        return None

    def embed(self, pts) -> np.ndarray:
        """Coordinates in R^p used by the quadrant (Cramer-von Mises) index."""
        arr = self.as_batch(pts)
        return arr.reshape(len(arr), -1)

    def apply_isometry(self, iso, pts) -> np.ndarray:
        raise IncompatibleIsometry(f"{type(iso).__name__} does not act on {self.name}")


class _FlatManifold(Manifold):
    geometry = "flat"

    def to_chart(self, arr: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def chart(self, pts) -> np.ndarray:
        arr = self.as_batch(pts)
        return np.ascontiguousarray(self.to_chart(arr).reshape(len(arr), -1))

    def distance(self, p, q) -> float:
        cp, cq = self.chart(p), self.chart(q)
        return float(seq_norm(cp - cq)[0])

    def ball_mask(self, p, q, targets) -> np.ndarray:
        cp, cq = self.chart(p)[0], self.chart(q)[0]
        return flat_ball_mask(cp, cq, self.chart(targets), self.tol)


@dataclass(frozen=True)
class RealLine(_FlatManifold):
    name = "real"

    @property
    def point_shape(self):
        return ()

    def to_chart(self, arr):
        return arr

    def distance(self, p, q) -> float:
        return abs(float(p) - float(q))

    def midpoint(self, p, q) -> np.ndarray:
        return np.asarray(0.5 * (float(p) + float(q)))

    def apply_isometry(self, iso, pts):
        if not isinstance(iso, ScalarAffine):
            return super().apply_isometry(iso, pts)
        return iso.a * np.asarray(pts, dtype=float) + iso.b


@dataclass(frozen=True)
class Euclid(_FlatManifold):
    p: int = 2
    name = "euclid"

    @property
    def point_shape(self):
        return (self.p,)

    def to_chart(self, arr):
        return arr

    def midpoint(self, p, q):
        return 0.5 * (np.asarray(p, float) + np.asarray(q, float))

    def apply_isometry(self, iso, pts):
        arr = np.asarray(pts, dtype=float)
        if isinstance(iso, Rotation) and iso.matrix.shape == (self.p, self.p):
            return arr @ iso.matrix.T
        if isinstance(iso, CoordPermutation) and len(iso.perm) == self.p:
            return arr[..., list(iso.perm)]
        return super().apply_isometry(iso, pts)


@dataclass(frozen=True)
class LogSurface(_FlatManifold):
    """The surface ``xyz = 1`` in the positive octant, with the flat log-coordinate metric."""

    name = "logsurface"

    @property
    def point_shape(self):
        return (3,)

    def validate_many(self, pts):
        arr = super().validate_many(pts)
        if np.any(arr <= 0):
            raise InvalidPoint("logsurface: coordinates must be positive")
        prod = arr[:, 0] * arr[:, 1] * arr[:, 2]
        bad = np.abs(prod - 1.0) > POINT_TOL
        if np.any(bad):
            raise InvalidPoint(f"logsurface: |xyz - 1| = {np.max(np.abs(prod - 1.0)):.3g} exceeds {POINT_TOL}")
        return arr

    def to_chart(self, arr):
        return np.log(arr)

    def midpoint(self, p, q):
        return np.exp(0.5 * (np.log(np.asarray(p, float)) + np.log(np.asarray(q, float))))

    def apply_isometry(self, iso, pts):
        if isinstance(iso, CoordPermutation) and sorted(iso.perm) == [0, 1, 2]:
            return np.asarray(pts, dtype=float)[..., list(iso.perm)]
        return super().apply_isometry(iso, pts)


@dataclass(frozen=True)
class Sphere(Manifold):
    """Unit sphere in R^d with the great-circle distance (``d = 2`` is the circle)."""

    d: int = 2
    geometry = "sphere"
    name = "sphere"

    def __post_init__(self):
        super().__post_init__()
        if self.d < 2:
            raise ValueError("sphere embedding dimension must be at least 2")

    @property
    def point_shape(self):
        return (self.d,)

    def validate_many(self, pts):
        arr = super().validate_many(pts)
        err = np.abs(seq_norm(arr) - 1.0)
        if np.any(err > POINT_TOL):
            raise InvalidPoint(f"sphere: | |x| - 1 | = {np.max(err):.3g} exceeds {POINT_TOL}")
        return arr

    def distance(self, p, q) -> float:
        dot = float(seq_dot(np.asarray(p, float), np.asarray(q, float)))
        return float(np.arccos(min(max(dot, -1.0), 1.0)))

    def midpoint(self, p, q):
        p, q = np.asarray(p, float), np.asarray(q, float)
        if float(seq_dot(p, q)) < -1.0 + ANTIPODAL_EPS:
            raise AntipodalPoints("midpoint of antipodal points is not unique")
        s = p + q
        return s / seq_norm(s)

    def ball_mask(self, p, q, targets):
        return sphere_ball_mask(np.asarray(p, float), np.asarray(q, float), self.as_batch(targets), self.tol)

    def apply_isometry(self, iso, pts):
        if isinstance(iso, Rotation) and iso.matrix.shape == (self.d, self.d):
            return np.asarray(pts, dtype=float) @ iso.matrix.T
        return super().apply_isometry(iso, pts)


def Circle(tol: float = DEFAULT_TOL) -> Sphere:
    return Sphere(tol=tol, d=2)


@dataclass(frozen=True)
class SpdAffine(Manifold):
    """Symmetric positive-definite ``m x m`` matrices with the affine-invariant metric.

    ``d(A, B) = || log(A^{-1/2} B A^{-1/2}) ||_F`` and the midpoint is the
    matrix geometric mean ``A # B``.
    """

    m: int = 2
    name = "spd"

    @property
    def point_shape(self):
        return (self.m, self.m)

    def validate_many(self, pts):
        arr = super().validate_many(pts)
        asym = np.max(np.abs(arr - np.swapaxes(arr, -1, -2)), initial=0.0)
        if asym > POINT_TOL:
            raise InvalidPoint(f"spd: matrix asymmetry {asym:.3g} exceeds {POINT_TOL}")
        w = _eigvalsh(_sym(arr))
        if np.any(w <= 0):
            raise InvalidPoint(f"spd: matrix is not positive definite (eigenvalue {w.min():.6g})")
        return arr

    def _distance_ordered(self, a, b) -> float:
        s = spd_invsqrt(a)
        w = _eigvalsh(_sym(s @ b @ s))
        return float(seq_norm(np.log(np.maximum(w, EIG_FLOOR))))

    def distance(self, p, q) -> float:
        a, b = _ordered(np.asarray(p, float), np.asarray(q, float))
        return self._distance_ordered(a, b)

    def geodesic(self, a, b, t: float) -> np.ndarray:
        a, b = np.asarray(a, float), np.asarray(b, float)
        r = spd_sqrt(a)
        s = spd_invsqrt(a)
        return _sym(r @ spd_power(_sym(s @ b @ s), t) @ r)

    def midpoint(self, p, q):
        a, b = _ordered(np.asarray(p, float), np.asarray(q, float))
        return self.geodesic(a, b, 0.5)

    def ball_mask(self, p, q, targets):
        a, b = _ordered(np.asarray(p, float), np.asarray(q, float))
        center = self.geodesic(a, b, 0.5)
        radius = 0.5 * self._distance_ordered(a, b) + self.tol
        s = spd_invsqrt(center)
        w = _eigvalsh(_sym(s @ self.as_batch(targets) @ s))
        return seq_norm(np.log(np.maximum(w, EIG_FLOOR))) <= radius

    def chart(self, pts) -> np.ndarray | None:
        """Log-eigenvalue coordinates when every matrix shares one eigenbasis.

        On a commuting family the affine-invariant metric is flat:
        ``d(A, B) = || log A - log B ||_F``, which in a common eigenbasis is the
        Euclidean distance between log-eigenvalue vectors.  Returns ``None``
        if no common eigenbasis is found.
        """
        arr = self.as_batch(pts)
        weights = np.random.default_rng(0x5EED).uniform(0.5, 1.5, size=len(arr))
        mix = _sym(np.einsum("i,ijk->jk", weights / weights.sum(), arr))
        _, q = _eigh(mix)
        rot = np.swapaxes(q, 0, 1)[None] @ arr @ q[None]
        diag = np.diagonal(rot, axis1=1, axis2=2)
        off = rot - diag[..., None] * np.eye(self.m)
        scale = np.max(np.abs(diag), axis=1)
        if np.any(np.max(np.abs(off), axis=(1, 2)) > 1e-10 * scale) or np.any(diag <= 0):
            return None
        return np.ascontiguousarray(np.log(diag))

    def embed(self, pts):
        arr = self.as_batch(pts)
        iu = np.triu_indices(self.m)
        return arr[:, iu[0], iu[1]]

    def apply_isometry(self, iso, pts):
        if isinstance(iso, Congruence) and iso.matrix.shape == (self.m, self.m):
            mat = iso.matrix
            return mat @ np.asarray(pts, dtype=float) @ mat.T
        return super().apply_isometry(iso, pts)


# -- isometries ------------------------------------------------------------


@dataclass(frozen=True)
class ScalarAffine:
    """``x -> a x + b`` on the real line with ``a = +-1``."""

    a: float = 1.0
    b: float = 0.0

    def __post_init__(self):
        if self.a not in (1.0, -1.0):
            raise ValueError("a real-line isometry needs a = +1 or -1")


@dataclass(frozen=True)
class Rotation:
    """Orthogonal matrix acting on unit vectors (or Euclidean points) by ``x -> Q x``."""

    matrix: np.ndarray = field(default_factory=lambda: np.eye(2))

    def __post_init__(self):
        q = np.asarray(self.matrix, dtype=float)
        object.__setattr__(self, "matrix", q)
        if q.ndim != 2 or q.shape[0] != q.shape[1]:
            raise ValueError("rotation matrix must be square")
        if np.max(np.abs(q @ q.T - np.eye(len(q)))) > 1e-9:
            raise ValueError("rotation matrix is not orthogonal to 1e-9")

    @classmethod
    def planar(cls, angle: float) -> "Rotation":
        c, s = np.cos(angle), np.sin(angle)
        return cls(np.array([[c, -s], [s, c]]))


@dataclass(frozen=True)
class Congruence:
    """Invertible ``M`` acting on SPD matrices by ``A -> M A M^T``."""

    matrix: np.ndarray = field(default_factory=lambda: np.eye(2))

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=float)
        object.__setattr__(self, "matrix", m)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError("congruence matrix must be square")
        if not np.isfinite(np.linalg.cond(m)):
            raise ValueError("congruence matrix is singular")


@dataclass(frozen=True)
class CoordPermutation:
    """Permutation of coordinates (0-based) on the log surface."""

    perm: tuple[int, ...] = (0, 1, 2)


# -- functional surface ----------------------------------------------------


def distance(kind: Manifold, p, q) -> float:
    return kind.distance(p, q)


def midpoint(kind: Manifold, p, q) -> np.ndarray:
    return kind.midpoint(p, q)


def ball_contains(kind: Manifold, p, q, t) -> bool:
    return kind.ball_contains(p, q, t)


def spd_geodesic(a, b, t: float) -> np.ndarray:
    """Point at parameter ``t`` on the affine-invariant geodesic from ``a`` to ``b``."""
    a = np.asarray(a, dtype=float)
    return SpdAffine(m=a.shape[0]).geodesic(a, b, t)


def apply_isometry(kind: Manifold, iso, p) -> np.ndarray:
    return kind.apply_isometry(iso, p)


def validate_point(kind: Manifold, p) -> np.ndarray:
    return kind.validate(p)

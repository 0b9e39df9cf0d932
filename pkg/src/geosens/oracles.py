"""Ground truth for the estimators.

* :func:`closed_form_example1` -- piecewise formulas for ``Z = alpha X1 + X2``.
* :func:`quadrature_index_example1` -- the same quantities integrated
  numerically from the conditional interval probabilities, independent of
  the closed-form algebra.
* :func:`enumerate_population_index` -- exact population index of a finite
  discrete model by summation.
* :func:`naive_estimate_reference` -- a literal triple-loop estimator.
"""

from __future__ import annotations

import itertools
from typing import NamedTuple

import numpy as np

from .errors import AntipodalPoints, DegenerateBalls, DegenerateInput, GridTooLarge, TooLarge
from .manifolds import Manifold
from .models import Discrete, DistributionSpec, Model

MAX_GRID_CELLS = 10_000
MAX_NAIVE = 50


class Example1Truth(NamedTuple):
    B1: float
    C1: float
    S1: float
    D1_cvm: float


def closed_form_example1(p: float, alpha: float, b: float) -> Example1Truth:
    """Population indices of ``Z = alpha X1 + X2``, ``X1 ~ B(p)``, ``X2 ~ U(0, b)``, for ``nu = {1}``.

    ``D1_cvm`` is the unnormalized Cramer-von Mises numerator
    ``int E[(F - F^1)^2] dF``, so ``C1 = 6 D1_cvm``.  ``S1`` is the ball
    numerator; the ball denominator of a continuous scalar output is 1/6, so
    ``B1 = 6 S1``.
    """
    q = p * (1.0 - p)
    r = alpha / b
    if r <= 1.0:
        var_term = r**3 * (1.0 / 3.0 - 0.25 * r)
        sq_term = r**2 * (1.0 - 2.0 / 3.0 * r)
    else:
        var_term = 1.0 / 12.0
        sq_term = 1.0 / 3.0
    return Example1Truth(
        B1=12.0 * q * var_term,
        C1=6.0 * q * sq_term,
        S1=2.0 * q * var_term,
        D1_cvm=q * sq_term,
    )


def _uniform_cdf(x, b):
    return np.clip(x / b, 0.0, 1.0)


def quadrature_index_example1(p: float, alpha: float, b: float, resolution: int = 1000) -> tuple[float, float]:
    """``(B1, C1)`` for the Example-1 model by midpoint-rule integration.

    Integrates the definitions directly: for outputs ``s <= t`` the
    conditional ball probability given ``X1 = x`` is
    ``G(t - alpha x) - G(s - alpha x)`` with ``G`` the U(0, b) cdf.
    """
    if resolution < 1000:
        raise ValueError("resolution must be at least 1000")
    # Z mixes U(0, b) (weight 1-p) and U(alpha, alpha+b) (weight p); integrate each piece
    u = (np.arange(resolution) + 0.5) / resolution * b
    nodes = np.concatenate([u, alpha + u])
    wts = np.concatenate([np.full(resolution, (1.0 - p) / resolution), np.full(resolution, p / resolution)])

    def ball_prob(shift, s, t):
        lo, hi = np.minimum(s, t), np.maximum(s, t)
        return _uniform_cdf(hi - shift, b) - _uniform_cdf(lo - shift, b)

    s_grid, t_grid = nodes[:, None], nodes[None, :]
    w2 = wts[:, None] * wts[None, :]
    h0 = ball_prob(0.0, s_grid, t_grid)
    h1 = ball_prob(alpha, s_grid, t_grid)
    h = (1.0 - p) * h0 + p * h1
    cond_var = (1.0 - p) * (h0 - h) ** 2 + p * (h1 - h) ** 2
    S = float(np.sum(w2 * cond_var))
    D = float(np.sum(w2 * h * (1.0 - h)))

    f0 = _uniform_cdf(nodes, b)
    f1 = _uniform_cdf(nodes - alpha, b)
    f = (1.0 - p) * f0 + p * f1
    num = float(np.sum(wts * ((1.0 - p) * (f0 - f) ** 2 + p * (f1 - f) ** 2)))
    den = float(np.sum(wts * f * (1.0 - f)))
    B = S / D if D > 0 else 0.0
    C = num / den if den > 0 else 0.0
    return B, C


# -- discrete models -------------------------------------------------------


class DiscreteModel(Model):
    """Model on a finite input grid with an explicit output table.

    Parameters
    ----------
    grids : sequence of (values, weights)
        One finite law per input coordinate.
    outputs : array
        Output point for every grid cell, shape ``(n_1, ..., n_d) + point_shape``.
    manifold : Manifold
    """

    def __init__(self, grids, outputs, manifold: Manifold):
        self.laws = [Discrete(tuple(float(v) for v in vals), tuple(float(w) for w in wts)) for vals, wts in grids]
        self.manifold = manifold
        shape = tuple(len(law.values) for law in self.laws)
        self.outputs = np.asarray(outputs, dtype=float)
        if self.outputs.shape[: len(shape)] != shape:
            raise ValueError(f"output table must start with grid shape {shape}, got {self.outputs.shape}")
        flat = self.outputs.reshape((-1,) + manifold.point_shape)
        manifold.validate_many(flat)

    @property
    def dist(self):
        return DistributionSpec(self.laws)

    @property
    def grid_shape(self):
        return tuple(len(law.values) for law in self.laws)

    def _evaluate(self, x):
        idx = tuple(_grid_index(law.values, col) for law, col in zip(self.laws, x.T))
        return self.outputs[idx]


def _grid_index(values, col):
    vals = np.asarray(values, dtype=float)
    order = np.argsort(vals)
    pos = np.clip(np.searchsorted(vals[order], col), 0, len(vals) - 1)
    idx = order[pos]
    if not np.array_equal(vals[idx], col):
        raise DegenerateInput("input value outside the discrete grid")
    return idx


class PopulationIndex(NamedTuple):
    S: float
    D: float
    B: float | None


def enumerate_population_index(dm: DiscreteModel, nu, manifold: Manifold | None = None) -> PopulationIndex:
    """Exact ``(S, D, B)`` by summing over every output pair and every frozen value.

    ``B`` is ``None`` when ``D`` is zero.
    """
    from .models import check_nu

    manifold = manifold or dm.manifold
    shape = dm.grid_shape
    if int(np.prod(shape)) > MAX_GRID_CELLS:
        raise GridTooLarge(f"grid has {int(np.prod(shape))} cells, limit is {MAX_GRID_CELLS}")
    nu = check_nu(nu, len(shape))
    frozen = [i - 1 for i in nu]
    free = [i for i in range(len(shape)) if i not in frozen]

    probs = np.ones(shape)
    for axis, law in enumerate(dm.laws):
        w = np.asarray(law.weights).reshape([-1 if a == axis else 1 for a in range(len(shape))])
        probs = probs * w
    pts = dm.outputs.reshape((-1,) + manifold.point_shape)
    uniq, inv = np.unique(pts.reshape(len(pts), -1), axis=0, return_inverse=True)
    uniq = uniq.reshape((-1,) + manifold.point_shape)
    inv = inv.reshape(shape)
    k = len(uniq)

    # weight of each output value, and conditional weights given each frozen cell
    q = np.bincount(inv.ravel(), weights=probs.ravel(), minlength=k)
    moved = np.moveaxis(inv, frozen + free, range(len(shape)))
    pmoved = np.moveaxis(probs, frozen + free, range(len(shape)))
    n_frozen = int(np.prod([shape[i] for i in frozen]))
    moved = moved.reshape(n_frozen, -1)
    pmoved = pmoved.reshape(n_frozen, -1)
    p_frozen = pmoved.sum(axis=1)
    cond = np.zeros((n_frozen, k))
    for c in range(n_frozen):
        if p_frozen[c] > 0:
            cond[c] = np.bincount(moved[c], weights=pmoved[c], minlength=k) / p_frozen[c]

    S = D = 0.0
    skipped = 0.0
    for u in range(k):
        for v in range(k):
            wgt = q[u] * q[v]
            if wgt == 0:
                continue
            try:
                mask = manifold.ball_mask(uniq[u], uniq[v], uniq).astype(float)
            except AntipodalPoints:
                skipped += wgt
                continue
            h_cond = cond @ mask
            h = float(q @ mask)
            S += wgt * float(p_frozen @ (h_cond - h) ** 2)
            D += wgt * h * (1.0 - h)
    if skipped >= 1.0:
        raise DegenerateBalls("every output pair is antipodal")
    S, D = S / (1.0 - skipped), D / (1.0 - skipped)
    return PopulationIndex(S, D, S / D if D > 0 else None)


def random_discrete_model(rng, manifold: Manifold, d: int | None = None) -> DiscreteModel:
    """A small random grid model with outputs drawn on ``manifold`` (test support)."""
    from .manifolds import LogSurface, RealLine, Sphere

    d = d or int(rng.integers(2, 4))
    sizes = [int(rng.integers(2, 4)) for _ in range(d)]
    grids = []
    for n in sizes:
        w = np.round(0.8 * rng.dirichlet(np.ones(n)) + 0.2 / n, 6)
        w[-1] = 1.0 - w[:-1].sum()
        grids.append((np.arange(n, dtype=float), w))
    n_levels = int(rng.integers(3, 7))
    if isinstance(manifold, RealLine):
        levels = np.sort(rng.choice(np.arange(-6, 7), size=n_levels, replace=False)).astype(float)
    elif isinstance(manifold, Sphere) and manifold.d == 2:
        # all angles within a half-turn, so no two levels are antipodal
        ang = rng.choice(np.arange(12), size=n_levels, replace=False) * (2 * np.pi / 24) + 0.1
        levels = np.column_stack([np.cos(ang), np.sin(ang)])
    elif isinstance(manifold, LogSurface):
        lg = rng.integers(-2, 3, size=(n_levels, 2)).astype(float) * 0.5
        levels = np.exp(np.column_stack([lg, -lg.sum(axis=1)]))
    else:
        raise ValueError(f"no random discrete outputs for {manifold.name}")
    table_idx = rng.integers(0, n_levels, size=sizes)
    return DiscreteModel(grids, levels[table_idx], manifold)


# -- naive reference estimator --------------------------------------------


def naive_estimate_reference(pairs, wpool, manifold: Manifold) -> tuple[float, float]:
    """Literal triple-loop evaluation of the numerator and denominator estimators.

    For every pool pair ``tau``: ``G_j = h(Z_j) h(Z_j^nu)``,
    ``J_j = (h(Z_j) + h(Z_j^nu)) / 2`` and ``H_ij = J_i J_j``; then
    ``S = sum G / (N T) - sum H / (N^2 T)`` and
    ``D = mean_tau [ mean_j J_j - (mean_j J_j)^2 ]``.
    """
    z, zv, w = pairs.z, pairs.z_nu, wpool.points
    n, nw = len(z), len(w)
    if n > MAX_NAIVE or nw > MAX_NAIVE:
        raise TooLarge(f"naive reference limited to N, Nw <= {MAX_NAIVE}")
    sum_g = 0.0
    sum_h = 0.0
    d_terms = 0.0
    n_tau = 0
    for k1, k2 in itertools.combinations(range(nw), 2):
        try:
            hz = [manifold.ball_contains(w[k1], w[k2], z[j]) for j in range(n)]
        except AntipodalPoints:
            continue
        hv = [manifold.ball_contains(w[k1], w[k2], zv[j]) for j in range(n)]
        jj = [0.5 * (int(hz[j]) + int(hv[j])) for j in range(n)]
        for j in range(n):
            sum_g += int(hz[j]) * int(hv[j])
        for i in range(n):
            for j in range(n):
                sum_h += jj[i] * jj[j]
        jbar = sum(jj) / n
        d_terms += jbar - jbar * jbar
        n_tau += 1
    if n_tau == 0:
        raise DegenerateBalls("every pool pair was antipodal")
    s_hat = sum_g / (n * n_tau) - sum_h / (n * n * n_tau)
    return s_hat, d_terms / n_tau

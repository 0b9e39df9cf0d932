"""Ball-membership counting kernels.

For every pool pair ``tau = (k1, k2)`` the estimators only need two integers:

* ``g`` -- the number of pick-freeze pairs with *both* members inside the
  ball of diameter ``W[k1] W[k2]``;
* ``s`` -- the total number of members inside it (``0 <= s <= 2N``).

The kernels return ``sum g``, ``sum s`` and ``sum s**2`` over all pairs as
int64 together with the number of pairs used.  Integer accumulation makes the
result independent of loop order, so the compiled and numpy paths, and any
split of the pool-pair loop, agree exactly.

Each kernel exists twice: a scalar loop compiled with numba, and a
vectorized numpy fallback that performs the same floating-point operations in
the same order.  :func:`ball_counts` picks one according to
:data:`geosens._accel.USE_NUMBA`.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _accel
from ._accel import njit
from .manifolds import ANTIPODAL_EPS, seq_dot, seq_norm, seq_sq

_CHUNK_ELEMS = 4_000_000


@dataclass(frozen=True)
class BallCounts:
    sum_g: int
    sum_s: int
    sum_s2: int
    n_tau: int
    n_dropped: int = 0

    def __add__(self, other: "BallCounts") -> "BallCounts":
        return BallCounts(
            self.sum_g + other.sum_g,
            self.sum_s + other.sum_s,
            self.sum_s2 + other.sum_s2,
            self.n_tau + other.n_tau,
            self.n_dropped + other.n_dropped,
        )


# -- compiled kernels ------------------------------------------------------


@njit
def _flat_tau(ZT, ZvT, W, k1, k2, tol, center, d1, d2):
    # ZT, ZvT are coordinate-major (p, N) so the target loops vectorize
    p = W.shape[1]
    r2 = 0.0
    for a in range(p):
        center[a] = 0.5 * (W[k1, a] + W[k2, a])
        dl = W[k1, a] - W[k2, a]
        r2 += dl * dl
    rad = 0.5 * np.sqrt(r2) + tol
    rad2 = rad * rad
    n = ZT.shape[1]
    g = 0
    s = 0
    if p == 1:
        c = center[0]
        for j in range(n):
            x = ZT[0, j] - c
            y = ZvT[0, j] - c
            in1 = np.int64(x * x <= rad2)
            in2 = np.int64(y * y <= rad2)
            s += in1 + in2
            g += in1 * in2
        return g, s
    d1[:] = 0.0
    d2[:] = 0.0
    for a in range(p):
        c = center[a]
        for j in range(n):
            x = ZT[a, j] - c
            y = ZvT[a, j] - c
            d1[j] += x * x
            d2[j] += y * y
    for j in range(n):
        in1 = np.int64(d1[j] <= rad2)
        in2 = np.int64(d2[j] <= rad2)
        s += in1 + in2
        g += in1 * in2
    return g, s


@njit
def _sphere_tau(ZT, ZvT, W, k1, k2, tol, center, d1, d2):
    p = W.shape[1]
    dot = 0.0
    for a in range(p):
        dot += W[k1, a] * W[k2, a]
    if dot < -1.0 + 1e-9:
        return -1, -1
    nrm = 0.0
    for a in range(p):
        center[a] = W[k1, a] + W[k2, a]
        nrm += center[a] * center[a]
    nrm = np.sqrt(nrm)
    for a in range(p):
        center[a] = center[a] / nrm
    cos_rad = np.cos(0.5 * np.arccos(min(max(dot, -1.0), 1.0)) + tol)
    n = ZT.shape[1]
    d1[:] = 0.0
    d2[:] = 0.0
    for a in range(p):
        c = center[a]
        for j in range(n):
            d1[j] += ZT[a, j] * c
            d2[j] += ZvT[a, j] * c
    g = 0
    s = 0
    for j in range(n):
        in1 = np.int64(d1[j] >= cos_rad)
        in2 = np.int64(d2[j] >= cos_rad)
        s += in1 + in2
        g += in1 * in2
    return g, s


def _make_tau_loop(tau_fn):
    @njit
    def loop(Z, Zv, W, taus, exact, tol):
        ZT = np.ascontiguousarray(Z.T)
        ZvT = np.ascontiguousarray(Zv.T)
        center = np.empty(W.shape[1])
        d1 = np.empty(Z.shape[0])
        d2 = np.empty(Z.shape[0])
        sg = 0
        ss = 0
        sq = 0
        n = 0
        dropped = 0
        m = W.shape[0] * (W.shape[0] - 1) // 2 if exact else taus.shape[0]
        k1 = 0
        k2 = 0
        for t in range(m):
            if exact:
                # lexicographic walk over k1 < k2
                k2 += 1
                if k2 >= W.shape[0] or t == 0:
                    if t > 0:
                        k1 += 1
                    k2 = k1 + 1
            else:
                k1 = taus[t, 0]
                k2 = taus[t, 1]
            g, s = tau_fn(ZT, ZvT, W, k1, k2, tol, center, d1, d2)
            if g < 0:
                dropped += 1
                continue
            sg += g
            ss += s
            sq += s * s
            n += 1
        return sg, ss, sq, n, dropped

    return loop


_flat_counts_jit = _make_tau_loop(_flat_tau)
_sphere_counts_jit = _make_tau_loop(_sphere_tau)


@njit
def _quadrant_counts_jit(Z, Zv, W, idx):
    p = W.shape[1]
    sg = 0
    ss = 0
    sq = 0
    for t in range(idx.shape[0]):
        k = idx[t]
        g = 0
        s = 0
        for j in range(Z.shape[0]):
            in1 = np.int64(1)
            in2 = np.int64(1)
            for a in range(p):
                if Z[j, a] > W[k, a]:
                    in1 = 0
                if Zv[j, a] > W[k, a]:
                    in2 = 0
            s += in1 + in2
            g += in1 * in2
        sg += g
        ss += s
        sq += s * s
    return sg, ss, sq, idx.shape[0]


# -- numpy fallbacks -------------------------------------------------------


def _all_pairs_blocks(nw: int, per_block: int):
    """Yield (k1 array, k2 array) blocks enumerating P_{Nw,2} in lexicographic order."""
    per_block = max(per_block, 1)
    k1s, k2s, size = [], [], 0
    for k1 in range(nw - 1):
        k2 = np.arange(k1 + 1, nw)
        k1s.append(np.full(len(k2), k1))
        k2s.append(k2)
        size += len(k2)
        if size >= per_block:
            yield np.concatenate(k1s), np.concatenate(k2s)
            k1s, k2s, size = [], [], 0
    if size:
        yield np.concatenate(k1s), np.concatenate(k2s)


def _tau_blocks(nw, taus, exact, n_targets, p):
    per_block = _CHUNK_ELEMS // max(n_targets * p, 1)
    if exact:
        yield from _all_pairs_blocks(nw, per_block)
    else:
        for start in range(0, len(taus), max(per_block, 1)):
            blk = taus[start : start + max(per_block, 1)]
            yield blk[:, 0], blk[:, 1]


def _reduce(in1, in2):
    g = np.count_nonzero(in1 & in2, axis=0).astype(np.int64)
    s = (np.count_nonzero(in1, axis=0) + np.count_nonzero(in2, axis=0)).astype(np.int64)
    return int(g.sum()), int(s.sum()), int((s * s).sum())


def _flat_counts_np(Z, Zv, W, taus, exact, tol):
    sg = ss = sq = n = 0
    for k1, k2 in _tau_blocks(len(W), taus, exact, 2 * len(Z), W.shape[1]):
        w1, w2 = W[k1], W[k2]
        center = 0.5 * (w1 + w2)
        rad = 0.5 * np.sqrt(seq_sq(w1 - w2)) + tol
        rad2 = rad * rad
        in1 = seq_sq(Z[:, None, :] - center[None]) <= rad2
        in2 = seq_sq(Zv[:, None, :] - center[None]) <= rad2
        g, s, q = _reduce(in1, in2)
        sg, ss, sq, n = sg + g, ss + s, sq + q, n + len(k1)
    return sg, ss, sq, n, 0


def _sphere_counts_np(Z, Zv, W, taus, exact, tol):
    sg = ss = sq = n = dropped = 0
    for k1, k2 in _tau_blocks(len(W), taus, exact, 2 * len(Z), W.shape[1]):
        w1, w2 = W[k1], W[k2]
        dot = seq_dot(w1, w2)
        ok = ~(dot < -1.0 + ANTIPODAL_EPS)
        dropped += int(np.count_nonzero(~ok))
        w1, w2, dot = w1[ok], w2[ok], dot[ok]
        if len(dot) == 0:
            continue
        s_ = w1 + w2
        center = s_ / seq_norm(s_)[:, None]
        cos_rad = np.cos(0.5 * np.arccos(np.clip(dot, -1.0, 1.0)) + tol)
        in1 = seq_dot(Z[:, None, :], center[None]) >= cos_rad
        in2 = seq_dot(Zv[:, None, :], center[None]) >= cos_rad
        g, s, q = _reduce(in1, in2)
        sg, ss, sq, n = sg + g, ss + s, sq + q, n + len(dot)
    return sg, ss, sq, n, dropped


def _quadrant_counts_np(Z, Zv, W, idx):
    sg = ss = sq = 0
    per_block = max(_CHUNK_ELEMS // max(2 * len(Z) * W.shape[1], 1), 1)
    for start in range(0, len(idx), per_block):
        w = W[idx[start : start + per_block]]
        in1 = np.all(Z[:, None, :] <= w[None], axis=2)
        in2 = np.all(Zv[:, None, :] <= w[None], axis=2)
        g, s, q = _reduce(in1, in2)
        sg, ss, sq = sg + g, ss + s, sq + q
    return sg, ss, sq, len(idx)


# -- dispatch --------------------------------------------------------------


def _prep(a):
    a = np.ascontiguousarray(a, dtype=np.float64)
    return a.reshape(len(a), -1)


def _prep_taus(taus):
    if taus is None:
        return np.empty((0, 2), dtype=np.int64), True
    return np.ascontiguousarray(taus, dtype=np.int64).reshape(-1, 2), False


def ball_counts(geometry: str, Z, Zv, W, tol: float, taus=None, use_numba: bool | None = None) -> BallCounts:
    """Count ball memberships of pick-freeze pairs over pool pairs.

    Parameters
    ----------
    geometry : {"flat", "sphere"}
        ``"flat"`` expects chart coordinates; ``"sphere"`` unit vectors.
    Z, Zv : (N, p) arrays
        The two members of each pick-freeze pair.
    W : (Nw, p) array
        Pool points indexing the balls.
    tol : float
        Closed-ball slack.
    taus : (m, 2) int array, optional
        Pool pairs to use; all ``k1 < k2`` pairs when omitted.
    """
    if use_numba is None:
        use_numba = _accel.USE_NUMBA
    Z, Zv, W = _prep(Z), _prep(Zv), _prep(W)
    taus, exact = _prep_taus(taus)
    if geometry == "flat":
        fn = _flat_counts_jit if use_numba else _flat_counts_np
        sg, ss, sq, n, _ = fn(Z, Zv, W, taus, exact, float(tol))
        return BallCounts(int(sg), int(ss), int(sq), int(n), 0)
    if geometry == "sphere":
        fn = _sphere_counts_jit if use_numba else _sphere_counts_np
        sg, ss, sq, n, dropped = fn(Z, Zv, W, taus, exact, float(tol))
        return BallCounts(int(sg), int(ss), int(sq), int(n), int(dropped))
    raise ValueError(f"no compiled kernel for geometry {geometry!r}")


def generic_ball_counts(manifold, Z, Zv, W, taus=None) -> BallCounts:
    """Same counts through ``manifold.ball_mask``; one vectorized call per pool pair."""
    from .errors import AntipodalPoints

    targets = np.concatenate([manifold.as_batch(Z), manifold.as_batch(Zv)])
    n_pairs = len(targets) // 2
    sg = ss = sq = n = dropped = 0
    if taus is None:
        it = ((k1, k2) for k1 in range(len(W) - 1) for k2 in range(k1 + 1, len(W)))
    else:
        it = ((int(a), int(b)) for a, b in np.asarray(taus).reshape(-1, 2))
    for k1, k2 in it:
        try:
            mask = manifold.ball_mask(W[k1], W[k2], targets)
        except AntipodalPoints:
            dropped += 1
            continue
        in1, in2 = mask[:n_pairs], mask[n_pairs:]
        g = int(np.count_nonzero(in1 & in2))
        s = int(np.count_nonzero(in1) + np.count_nonzero(in2))
        sg, ss, sq, n = sg + g, ss + s, sq + s * s, n + 1
    return BallCounts(sg, ss, sq, n, dropped)


def quadrant_counts(Z, Zv, W, idx=None, use_numba: bool | None = None) -> BallCounts:
    """Counts for the lower-quadrant indicator ``1{z <= w}`` over single pool points."""
    if use_numba is None:
        use_numba = _accel.USE_NUMBA
    Z, Zv, W = _prep(Z), _prep(Zv), _prep(W)
    idx = np.arange(len(W), dtype=np.int64) if idx is None else np.ascontiguousarray(idx, dtype=np.int64)
    fn = _quadrant_counts_jit if use_numba else _quadrant_counts_np
    sg, ss, sq, n = fn(Z, Zv, W, idx)
    return BallCounts(int(sg), int(ss), int(sq), int(n), 0)

"""UMAP with per-point neighbourhood sizes.

Graph construction follows the usual recipe (local connectivity ``rho``,
bandwidth ``sigma`` matched to ``log2(k)``, fuzzy union) with ``k``
varying per point. The layout is the standard negative-sampling SGD on
the fuzzy cross-entropy, run sequentially so results depend only on the
seed.
"""

import logging
import warnings
from dataclasses import dataclass, field
from functools import lru_cache

import numba
import numpy as np
import scipy.sparse as sp
from scipy.optimize import curve_fit

from adaptrix._random import substream
from adaptrix.errors import ArgumentError, DegenerateGeometryError, NumericalError
from adaptrix.graph import _check_k_star, symmetrize, weighted_adjacency
from adaptrix.lle import Embedding
from adaptrix.neighbors import build_neighbor_table
from adaptrix.spectral import laplacian_embedding

log = logging.getLogger(__name__)

SIGMA_RTOL = 1e-5
INIT_EXTENT = 10.0


@lru_cache(maxsize=16)
def fit_curve_params(min_dist, spread=1.0):
    """Least-squares fit of ``1 / (1 + a r^(2b))`` to the offset exponential."""

    def curve(r, a, b):
        return 1.0 / (1.0 + a * r ** (2 * b))

    r = np.linspace(0, spread * 3, 300)
    target = np.where(r < min_dist, 1.0, np.exp(-(r - min_dist) / spread))
    (a, b), _ = curve_fit(curve, r, target)
    return float(a), float(b)


@dataclass(frozen=True)
class UmapConfig:
    n_epochs: int = 500
    learning_rate: float = 1.0
    negative_samples: int = 5
    min_dist: float = 0.1
    curve_a: float | None = None
    curve_b: float | None = None
    seed: int = 0
    repulsion: float = 1.0
    curve: tuple = field(init=False, repr=False)

    def __post_init__(self):
        if int(self.n_epochs) != self.n_epochs or self.n_epochs < 0:
            raise ArgumentError("n_epochs must be a non-negative integer")
        if not self.learning_rate > 0:
            raise ArgumentError("learning_rate must be positive")
        if int(self.negative_samples) != self.negative_samples or self.negative_samples < 0:
            raise ArgumentError("negative_samples must be a non-negative integer")
        if not self.min_dist >= 0:
            raise ArgumentError("min_dist must be non-negative")
        a, b = self.curve_a, self.curve_b
        if a is None or b is None:
            fa, fb = fit_curve_params(float(self.min_dist))
            a = fa if a is None else a
            b = fb if b is None else b
        if not (a > 0 and b > 0):
            raise ArgumentError("curve parameters must be positive")
        object.__setattr__(self, "curve", (float(a), float(b)))


# ---------------------------------------------------------------- fuzzy graph


def _bandwidths(D, valid, rho, target, lo, hi, rtol):
    """Vectorised bisection on ``log(sigma)`` for every row at once."""
    lo = np.log(lo)
    hi = np.log(hi)
    shifted = np.where(valid, np.maximum(D - rho[:, None], 0.0), 0.0)

    def mass(log_sigma):
        s = np.exp(log_sigma)[:, None]
        return np.where(valid, np.exp(-shifted / s), 0.0).sum(axis=1)

    clamped = mass(lo) >= target
    too_far = mass(hi) < target
    a, b = lo.copy(), hi.copy()
    while True:
        mid = 0.5 * (a + b)
        below = mass(mid) < target
        a = np.where(below, mid, a)
        b = np.where(below, b, mid)
        if np.all(np.expm1(b - a) <= rtol):
            break
    sigma = np.exp(0.5 * (a + b))
    sigma = np.where(clamped, np.exp(lo), sigma)
    sigma = np.where(too_far, np.exp(hi), sigma)
    return sigma, clamped | too_far


def _row_connectivity(D, valid, k):
    if np.any(k < 2):
        raise ArgumentError("every neighbourhood needs at least 2 neighbours")
    positive = np.where(valid & (D > 0), D, np.inf)
    rho = positive.min(axis=1)
    dead = ~np.isfinite(rho)
    if np.any(dead):
        raise DegenerateGeometryError(
            f"point {int(np.flatnonzero(dead)[0])} coincides with all of its neighbours"
        )
    mean = np.where(valid, D, 0.0).sum(axis=1) / k
    sigma, flags = _bandwidths(
        D, valid, rho, np.log2(k), 1e-12 * mean, 1e6 * mean, SIGMA_RTOL * 1e-5
    )
    return rho, sigma, flags


def local_connectivity(dists_row, k_star_i):
    """``(rho, sigma, clamped)`` for one sorted distance row.

    ``rho`` is the distance to the nearest non-coincident neighbour and
    ``sigma`` solves ``sum_j exp(-max(0, d_j - rho) / sigma) = log2(k)``
    over the first ``k`` distances. ``clamped`` is set when no bandwidth
    in the search bracket attains the target.
    """
    k = int(k_star_i)
    d = np.asarray(dists_row, dtype=np.float64)[:k]
    if d.shape[0] < k:
        raise ArgumentError(f"row has {d.shape[0]} distances, k={k} requested")
    rho, sigma, flags = _row_connectivity(d[None, :], np.ones((1, k), bool), np.array([k]))
    return float(rho[0]), float(sigma[0]), bool(flags[0])


def fuzzy_weights(table, k_star):
    """Directed membership strengths as a list of per-row weight vectors."""
    k_star = _check_k_star(k_star, table)
    depth = int(k_star.max())
    D = table.dists[:, :depth]
    valid = np.arange(depth)[None, :] < k_star[:, None]
    rho, sigma, flags = _row_connectivity(D, valid, k_star)
    if np.any(flags):
        log.info("%d bandwidths clamped to the bracket end", int(flags.sum()))
    Wt = np.exp(-np.maximum(D - rho[:, None], 0.0) / sigma[:, None])
    return [Wt[i, : k_star[i]] for i in range(table.n)], rho, sigma, flags


def fuzzy_graph_star(cloud, k_star, table=None):
    """Fuzzy-union symmetrised membership graph over the adaptive neighbourhoods."""
    k_star = np.asarray(k_star)
    depth = int(np.max(k_star))
    if table is None or table.depth < depth:
        table = build_neighbor_table(cloud, depth)
    weights, _, _, _ = fuzzy_weights(table, k_star)
    W = weighted_adjacency(table, k_star, weights)
    return symmetrize(W, "fuzzy_union")


# ---------------------------------------------------------------- layout


@numba.njit(cache=True)
def _clip(v):
    if v > 4.0:
        return 4.0
    if v < -4.0:
        return -4.0
    return v


@numba.njit(cache=True)
def _next(state):
    # xorshift64*; state is a length-1 uint64 array
    x = state[0]
    x ^= x >> np.uint64(12)
    x ^= x << np.uint64(25)
    x ^= x >> np.uint64(27)
    state[0] = x
    return (x * np.uint64(2685821657736338717)) >> np.uint64(33)


@numba.njit(cache=True)
def _sgd(Y, head, tail, eps, eps_next, eps_neg, eps_neg_next, state, start, stop, n_epochs,
         a, b, gamma, lr0, neg_rate):
    # Runs epochs [start, stop); the schedule arrays and RNG state carry over
    # between calls, so chunked runs equal a single run.
    n, dim = Y.shape
    n_edges = head.shape[0]
    for epoch in range(start, stop):
        lr = lr0 * (1.0 - epoch / n_epochs)
        for e in range(n_edges):
            if eps_next[e] > epoch:
                continue
            i = head[e]
            j = tail[e]
            d2 = 0.0
            for c in range(dim):
                diff = Y[i, c] - Y[j, c]
                d2 += diff * diff
            if d2 > 0.0:
                coeff = -2.0 * a * b * d2 ** (b - 1.0) / (a * d2**b + 1.0)
            else:
                coeff = 0.0
            for c in range(dim):
                g = _clip(coeff * (Y[i, c] - Y[j, c]))
                Y[i, c] += g * lr
                Y[j, c] -= g * lr
            eps_next[e] += eps[e]

            if neg_rate > 0:
                n_neg = int((epoch - eps_neg_next[e]) / eps_neg[e])
            else:
                n_neg = 0
            for _ in range(n_neg):
                k = int(_next(state) % np.uint64(n))
                if k == i:
                    continue
                d2 = 0.0
                for c in range(dim):
                    diff = Y[i, c] - Y[k, c]
                    d2 += diff * diff
                if d2 > 0.0:
                    coeff = 2.0 * gamma * b / ((0.001 + d2) * (a * d2**b + 1.0))
                    for c in range(dim):
                        g = _clip(coeff * (Y[i, c] - Y[k, c]))
                        Y[i, c] += g * lr
                else:
                    for c in range(dim):
                        Y[i, c] += 4.0 * lr
            if neg_rate > 0:
                eps_neg_next[e] += n_neg * eps_neg[e]
    return Y


def epochs_per_sample(weights, n_epochs):
    """Sampling period of each edge: the heaviest edge is sampled every epoch."""
    out = np.full(weights.shape[0], -1.0)
    samples = n_epochs * (weights / weights.max())
    out[samples > 0] = n_epochs / samples[samples > 0]
    return out


def _edges(W, n_epochs):
    C = sp.coo_matrix(W)
    keep = C.data >= C.data.max() / max(n_epochs, 1)
    head = C.row[keep].astype(np.int64)
    tail = C.col[keep].astype(np.int64)
    w = C.data[keep].astype(np.float64)
    order = np.lexsort((tail, head))
    return head[order], tail[order], w[order]


def cross_entropy(W, Y, a, b, eps=1e-12):
    """Fuzzy-set cross-entropy between ``W`` and the layout ``Y`` (all pairs)."""
    Y = np.asarray(Y, dtype=np.float64)
    P = np.asarray(sp.csr_matrix(W).todense())
    d2 = np.sum((Y[:, None, :] - Y[None, :, :]) ** 2, axis=-1)
    Q = 1.0 / (1.0 + a * d2**b)
    off = ~np.eye(Y.shape[0], dtype=bool)
    Q = np.clip(Q, eps, 1 - eps)
    terms = -(P * np.log(Q) + (1 - P) * np.log(1 - Q))
    return float(terms[off].sum())


def optimize_layout(W_sym, d_proj, config, init, callback=None, callback_every=50):
    """Negative-sampling SGD on the cross-entropy, starting from ``init``.

    ``callback(epoch, Y)`` is invoked every ``callback_every`` epochs and
    after the last one; it does not change the result.
    """
    Y0 = init.coords if isinstance(init, Embedding) else np.asarray(init, dtype=np.float64)
    n = W_sym.shape[0]
    if Y0.shape != (n, d_proj):
        raise ArgumentError(f"init has shape {Y0.shape}, expected {(n, d_proj)}")
    Y = np.array(Y0, dtype=np.float64, copy=True)
    if config.n_epochs == 0 or W_sym.nnz == 0:
        return Embedding(Y, d_proj, "umap*")
    n_epochs = int(config.n_epochs)
    head, tail, w = _edges(W_sym, n_epochs)
    eps = epochs_per_sample(w, n_epochs)
    neg_rate = float(config.negative_samples)
    eps_neg = eps / neg_rate if neg_rate > 0 else np.zeros_like(eps)
    eps_next, eps_neg_next = eps.copy(), eps_neg.copy()
    a, b = config.curve
    seed = int(substream(config.seed, "umap").integers(1, 2**63 - 1))
    state = np.array([seed], dtype=np.uint64) * np.uint64(6364136223846793005)
    state += np.uint64(1442695040888963407)
    if state[0] == 0:
        state[0] = np.uint64(88172645463325252)
    step = n_epochs if callback is None else max(1, int(callback_every))
    for start in range(0, n_epochs, step):
        stop = min(start + step, n_epochs)
        _sgd(
            Y, head, tail, eps, eps_next, eps_neg, eps_neg_next, state, start, stop, n_epochs,
            a, b, float(config.repulsion), float(config.learning_rate), neg_rate,
        )
        if callback is not None:
            callback(stop, Y.copy())
    if not np.all(np.isfinite(Y)):
        raise NumericalError("layout diverged")
    return Embedding(Y, d_proj, "umap*")


def spectral_init(W_sym, d_proj, seed=0):
    """Laplacian-eigenmap start on the graph support, scaled to ``[-10, 10]``.

    Falls back to uniform random coordinates if the eigensolver fails.
    """
    n = W_sym.shape[0]
    support = sp.csr_matrix(W_sym, copy=True)
    support.data[:] = 1.0
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            Y, _, _ = laplacian_embedding(support, d_proj)
        Y = Y * (INIT_EXTENT / np.abs(Y).max())
    except (NumericalError, ArgumentError, np.linalg.LinAlgError) as exc:
        log.info("spectral initialisation failed (%s); using random start", exc)
        Y = substream(seed, "umap-init").uniform(-INIT_EXTENT, INIT_EXTENT, (n, d_proj))
    return Embedding(Y, d_proj, "spectral-init")


def umap_star(cloud, k_star, d_proj, config=None, table=None):
    """Fuzzy graph, spectral start and SGD layout, in that order."""
    config = config or UmapConfig()
    if int(d_proj) != d_proj or d_proj < 1 or d_proj > cloud.n - 2:
        raise ArgumentError(f"d_proj must be in [1, {cloud.n - 2}]")
    W = fuzzy_graph_star(cloud, k_star, table)
    init = spectral_init(W, int(d_proj), config.seed)
    return optimize_layout(W, int(d_proj), config, init)

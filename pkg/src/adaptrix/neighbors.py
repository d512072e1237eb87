"""Exact Euclidean k-nearest-neighbour tables."""

from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from adaptrix.errors import ArgumentError

# Above this ambient dimension a k-d tree degenerates to a linear scan.
TREE_MAX_DIM = 15

_SLACK = 4
_CHUNK = 256
_REL_MARGIN = 1e-9


@dataclass(frozen=True)
class NeighborTable:
    """Sorted neighbour indices and distances, self excluded.

    ``ids[i, j]`` is the ``(j+1)``-th nearest neighbour of point ``i``
    and ``dists[i, j]`` its distance. Rows are ordered by ascending
    distance, ties by ascending index.
    """

    ids: np.ndarray
    dists: np.ndarray

    @property
    def n(self):
        return self.ids.shape[0]

    @property
    def depth(self):
        return self.ids.shape[1]


def euclidean(a, b):
    """Distance along the last axis, computed the same way everywhere."""
    diff = np.asarray(a, dtype=np.float64) - np.asarray(b, dtype=np.float64)
    return np.sqrt(np.sum(diff * diff, axis=-1))


def _coords(cloud):
    return cloud.coords if hasattr(cloud, "coords") else np.asarray(cloud, dtype=np.float64)


def _brute_candidates(x, m):
    sq = np.einsum("ij,ij->i", x, x)
    out = np.empty((x.shape[0], m), dtype=np.int64)
    for start in range(0, x.shape[0], _CHUNK):
        stop = min(start + _CHUNK, x.shape[0])
        d2 = sq[start:stop, None] + sq[None, :] - 2.0 * (x[start:stop] @ x.T)
        part = np.argpartition(d2, m - 1, axis=1)[:, :m]
        out[start:stop] = part
    return out


def _tree_candidates(x, m, workers):
    _, idx = cKDTree(x).query(x, k=m, workers=workers)
    return np.asarray(idx, dtype=np.int64).reshape(x.shape[0], m)


def _finish_rows(x, cand, rows, K):
    """Exact distances, self removal and (distance, index) ordering."""
    c = cand[rows]
    d = euclidean(x[c], x[rows][:, None, :])
    d = np.where(c == rows[:, None], np.inf, d)
    order = np.lexsort((c, d), axis=1)
    c = np.take_along_axis(c, order, axis=1)
    d = np.take_along_axis(d, order, axis=1)
    return c, d


def _full_row(x, i, K):
    d = euclidean(x, x[i])
    d[i] = np.inf
    idx = np.arange(x.shape[0])
    order = np.lexsort((idx, d))[:K]
    return idx[order], d[order]


def build_neighbor_table(cloud, K, workers=1):
    """Exact ``K``-NN of every point of ``cloud`` (a PointCloud or matrix)."""
    x = _coords(cloud)
    n = x.shape[0]
    if int(K) != K or K < 1:
        raise ArgumentError(f"K must be a positive integer, got {K}")
    K = int(K)
    if K >= n:
        raise ArgumentError(f"K={K} neighbours requested but only {n - 1} other points exist")
    m = min(n, K + 1 + _SLACK)
    if x.shape[1] <= TREE_MAX_DIM:
        cand = _tree_candidates(x, m, workers)
    else:
        cand = _brute_candidates(x, m)

    ids = np.empty((n, K), dtype=np.int64)
    dists = np.empty((n, K), dtype=np.float64)
    for start in range(0, n, _CHUNK):
        rows = np.arange(start, min(start + _CHUNK, n))
        c, d = _finish_rows(x, cand, rows, K)
        ids[rows] = c[:, :K]
        dists[rows] = d[:, :K]
        if m < n:
            # Candidates beyond the cut must be strictly farther than the
            # K-th neighbour, otherwise an unseen point could tie or win.
            finite = np.where(np.isfinite(d), d, -np.inf)
            outer = finite.max(axis=1)
            kth = d[:, K - 1]
            unsafe = ~(outer > kth * (1 + _REL_MARGIN) + 1e-300)
            for r in rows[unsafe]:
                ids[r], dists[r] = _full_row(x, r, K)
    ids.setflags(write=False)
    dists.setflags(write=False)
    return NeighborTable(ids, dists)


def query_knn(cloud, q, k):
    """The ``k`` training points nearest to ``q`` as ``(index, distance)`` pairs.

    ``q`` itself is not excluded: a query equal to a training point
    returns that point first at distance 0.
    """
    x = _coords(cloud)
    q = np.asarray(q, dtype=np.float64)
    if q.shape != (x.shape[1],):
        raise ArgumentError(f"query has shape {q.shape}, expected ({x.shape[1]},)")
    if int(k) != k or not 1 <= k <= x.shape[0]:
        raise ArgumentError(f"k must be in [1, {x.shape[0]}], got {k}")
    d = euclidean(x, q)
    idx = np.arange(x.shape[0])
    order = np.lexsort((idx, d))[: int(k)]
    return [(int(i), float(d[i])) for i in order]


def query_knn_arrays(x, q, k):
    """Array form of :func:`query_knn` used on hot paths."""
    d = euclidean(x, q)
    order = np.lexsort((np.arange(x.shape[0]), d))[:k]
    return order, d[order]

"""Locally linear embedding with per-point neighbourhood sizes."""

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

from adaptrix.errors import ArgumentError, DisconnectedGraphError, NumericalError
from adaptrix.graph import _check_k_star, weighted_adjacency
from adaptrix.linalg import batch_constrained_lsq_weights, sym_eigs_smallest
from adaptrix.neighbors import build_neighbor_table


# The small end of the LLE spectrum is tightly clustered, which stalls
# shift-invert iterations; LAPACK is faster up to this size.
DENSE_MAX_N = 6000


@dataclass(frozen=True)
class Embedding:
    coords: np.ndarray
    d_proj: int
    method_tag: str = ""

    def __post_init__(self):
        coords = np.asarray(self.coords, dtype=np.float64)
        if coords.ndim != 2 or coords.shape[1] != self.d_proj:
            raise ArgumentError(f"embedding shape {coords.shape} does not match d_proj={self.d_proj}")
        if not np.all(np.isfinite(coords)):
            raise NumericalError("embedding contains non-finite coordinates")
        object.__setattr__(self, "coords", coords)

    @property
    def n(self):
        return self.coords.shape[0]


def fix_signs(V):
    """Flip columns so that each one's largest-magnitude entry is positive."""
    idx = np.argmax(np.abs(V), axis=0)
    signs = np.sign(V[idx, np.arange(V.shape[1])])
    signs[signs == 0] = 1.0
    return V * signs


def _table_for(cloud, k_star, table):
    depth = int(np.max(k_star))
    if table is None or table.depth < depth:
        table = build_neighbor_table(cloud, depth)
    return table


def reconstruction_weights(cloud, k_star, table=None):
    """Sparse ``W`` whose row ``i`` reconstructs ``x_i`` from its ``k_star[i]`` neighbours."""
    table = _table_for(cloud, k_star, table)
    k_star = _check_k_star(k_star, table)
    weights = batch_constrained_lsq_weights(cloud.coords, table.ids, k_star)
    return weighted_adjacency(table, k_star, weights)


def embed_from_weights(W, d_proj, on_disconnected="raise"):
    """Bottom non-constant eigenvectors of ``(I - W)^T (I - W)``, scaled to unit covariance.

    Rows of ``W`` sum to one, so the constant vector is always in the null
    space. It is deflated explicitly because the next eigenvalues can sit
    within rounding distance of zero. With ``on_disconnected="warn"`` a
    graph with several components still embeds; the leading coordinates
    then mostly encode component membership.
    """
    if on_disconnected not in ("raise", "warn"):
        raise ArgumentError("on_disconnected must be 'raise' or 'warn'")
    n = W.shape[0]
    n_comp, _ = connected_components(W, directed=True, connection="weak")
    if n_comp > 1:
        msg = (f"neighbourhood graph has {n_comp} connected components; "
               "the embedding is not defined across components")
        if on_disconnected == "raise":
            raise DisconnectedGraphError(n_comp, msg)
        warnings.warn(msg, RuntimeWarning)
    IW = sp.identity(n, format="csr") - W
    M = (IW.T @ IW).tocsr()
    M = 0.5 * (M + M.T)
    ones = np.full((n, 1), 1.0 / np.sqrt(n))
    w, V = sym_eigs_smallest(M, d_proj, dense_max_n=DENSE_MAX_N, deflate=ones)
    Y = V * np.sqrt(n)
    Y -= Y.mean(axis=0)
    return fix_signs(Y), w


def lle_star(cloud, k_star, d_proj, table=None, on_disconnected="raise"):
    """Embed ``cloud`` in ``d_proj`` dimensions using neighbourhood sizes ``k_star``.

    The result satisfies the usual constraints: centred columns and
    ``Y.T @ Y / n == I``.
    """
    n, dim = cloud.coords.shape
    if int(d_proj) != d_proj or d_proj < 1:
        raise ArgumentError("d_proj must be a positive integer")
    if d_proj > dim or d_proj > n - 2:
        raise ArgumentError(f"d_proj={d_proj} must not exceed D={dim} nor n-2={n - 2}")
    k_star = np.asarray(k_star)
    table = _table_for(cloud, k_star, table)
    W = reconstruction_weights(cloud, k_star, table)
    Y, _ = embed_from_weights(W, int(d_proj), on_disconnected)
    return Embedding(Y, int(d_proj), "lle*")


def lle_fixed(cloud, k, d_proj, table=None, on_disconnected="raise"):
    """Standard LLE with ``k`` neighbours for every point."""
    emb = lle_star(cloud, np.full(cloud.n, int(k)), d_proj, table, on_disconnected)
    return Embedding(emb.coords, emb.d_proj, f"lle(k={int(k)})")

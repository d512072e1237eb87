"""Spectral embedding and clustering on adaptive k-NN graphs."""

import logging
import warnings

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

from adaptrix.errors import ArgumentError, DegenerateGeometryError
from adaptrix.evaluate import kmeans
from adaptrix.graph import adaptive_adjacency, symmetrize
from adaptrix.linalg import sym_eigs_smallest
from adaptrix.lle import Embedding, fix_signs
from adaptrix.neighbors import build_neighbor_table

log = logging.getLogger(__name__)

ZERO_EIGENVALUE = 1e-8


def normalized_laplacian(A):
    """``I - D^{-1/2} A D^{-1/2}`` for a symmetric non-negative ``A``.

    Returns the Laplacian and ``sqrt(deg)``.
    """
    A = sp.csr_matrix(A, dtype=np.float64)
    deg = np.asarray(A.sum(axis=1)).ravel()
    isolated = np.flatnonzero(deg <= 0)
    if isolated.size:
        raise DegenerateGeometryError(f"vertex {isolated[0]} has no neighbours (degree 0)")
    inv_sqrt = 1.0 / np.sqrt(deg)
    Dm = sp.diags(inv_sqrt)
    L = sp.identity(A.shape[0], format="csr") - Dm @ A @ Dm
    L = 0.5 * (L + L.T)
    return L.tocsr(), np.sqrt(deg)


def laplacian_embedding(A, d_proj):
    """Bottom eigenvectors of the normalised Laplacian, trivial direction removed.

    The trivial direction is ``sqrt(deg)``. On a disconnected graph the
    remaining zero eigenvectors are kept, since they are exactly the
    component indicators. Returns the coordinates, the eigenvalues and
    the number of connected components.
    """
    n = A.shape[0]
    n_comp, _ = connected_components(A, directed=False)
    if n_comp > 1:
        warnings.warn(f"graph has {n_comp} connected components", RuntimeWarning)
    L, sqrt_deg = normalized_laplacian(A)
    m = min(n, d_proj + 1)
    w, V = sym_eigs_smallest(L, m)
    trivial = sqrt_deg / np.linalg.norm(sqrt_deg)
    if n_comp == 1:
        return V[:, 1:], w[1:], n_comp
    # Several zero eigenvalues: the solver's basis of that space is
    # arbitrary, so remove the trivial direction explicitly.
    if np.sum(w <= ZERO_EIGENVALUE) < m:
        w, V = sym_eigs_smallest(L, min(n, n_comp + d_proj))
    P = V - np.outer(trivial, trivial @ V)
    U, s, _ = np.linalg.svd(P, full_matrices=False)
    Q = U[:, :d_proj]
    H = Q.T @ (L @ Q)
    vals, R = np.linalg.eigh(0.5 * (H + H.T))
    return Q @ R, vals, n_comp


def spectral_embed_star(cloud, k_star, d_proj, table=None, normalize_rows=True):
    """Spectral embedding of the or-symmetrised adaptive adjacency graph."""
    n = cloud.n
    if int(d_proj) != d_proj or d_proj < 1:
        raise ArgumentError("d_proj must be a positive integer")
    if d_proj > n - 2:
        raise ArgumentError(f"d_proj={d_proj} must not exceed n-2={n - 2}")
    k_star = np.asarray(k_star)
    depth = int(np.max(k_star))
    if table is None or table.depth < depth:
        table = build_neighbor_table(cloud, depth)
    A = symmetrize(adaptive_adjacency(table, k_star), "or")
    Y, _, n_comp = laplacian_embedding(A, int(d_proj))
    if normalize_rows:
        norms = np.linalg.norm(Y, axis=1, keepdims=True)
        Y = np.divide(Y, norms, out=np.zeros_like(Y), where=norms > 0)
    tag = "spectral*" if n_comp == 1 else f"spectral*(components={n_comp})"
    return Embedding(fix_signs(Y), int(d_proj), tag)


def spectral_cluster_star(cloud, k_star, d_star, n_clusters, seed=0, table=None):
    """K-means on the adaptive spectral embedding."""
    if int(n_clusters) != n_clusters or n_clusters < 1:
        raise ArgumentError("n_clusters must be a positive integer")
    if n_clusters == 1:
        return np.zeros(cloud.n, dtype=np.int64)
    emb = spectral_embed_star(cloud, k_star, d_star, table)
    labels, _, _ = kmeans(emb.coords, int(n_clusters), seed=seed)
    return labels

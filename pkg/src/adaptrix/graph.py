"""Adaptive neighbourhood graphs stored as CSR matrices.

A row-indexed sparse weight matrix is represented directly by
``scipy.sparse.csr_matrix`` with sorted column indices and no explicit
self-loops.
"""

import numpy as np
import scipy.sparse as sp

from adaptrix.errors import ArgumentError

SYMMETRIZE_MODES = ("or", "and", "mean", "fuzzy_union")


def _check_k_star(k_star, table):
    k_star = np.asarray(k_star)
    if k_star.shape != (table.n,):
        raise ArgumentError(f"k_star must have length {table.n}, got shape {k_star.shape}")
    if not np.issubdtype(k_star.dtype, np.integer):
        if np.any(k_star != np.round(k_star)):
            raise ArgumentError("k_star entries must be integers")
    k_star = k_star.astype(np.int64)
    if k_star.min() < 1:
        raise ArgumentError("k_star entries must be positive")
    if k_star.max() > table.depth:
        raise ArgumentError(
            f"k_star up to {k_star.max()} exceeds neighbour table depth {table.depth}"
        )
    return k_star


def weighted_adjacency(table, k_star, weights=None):
    """CSR matrix with row ``i`` supported on the ``k_star[i]`` nearest neighbours.

    ``weights`` is a list of per-row weight vectors aligned with the
    neighbour order; when omitted every stored entry is 1.
    """
    k_star = _check_k_star(k_star, table)
    n = table.n
    indptr = np.concatenate([[0], np.cumsum(k_star)])
    mask = np.arange(table.depth)[None, :] < k_star[:, None]
    indices = table.ids[mask]
    if weights is None:
        data = np.ones(indices.shape[0])
    else:
        data = np.concatenate([np.asarray(w, dtype=np.float64) for w in weights])
        if data.shape != indices.shape:
            raise ArgumentError("weight vectors do not match k_star")
    A = sp.csr_matrix((data, indices, indptr), shape=(n, n))
    A.sort_indices()
    return A


def adaptive_adjacency(table, k_star):
    """0/1 adjacency linking each point to its ``k_star[i]`` nearest neighbours."""
    return weighted_adjacency(table, k_star)


def symmetrize(A, mode="or"):
    """Symmetric combination of ``A`` and its transpose.

    ``or`` / ``and`` take the elementwise max / min, ``mean`` the average
    and ``fuzzy_union`` the probabilistic sum ``a + b - a*b``.
    """
    if A.shape[0] != A.shape[1]:
        raise ArgumentError(f"expected a square matrix, got shape {A.shape}")
    A = sp.csr_matrix(A, dtype=np.float64)
    AT = A.T.tocsr()
    if mode == "or":
        S = A.maximum(AT)
    elif mode == "and":
        S = A.minimum(AT)
    elif mode == "mean":
        S = (A + AT) * 0.5
    elif mode == "fuzzy_union":
        S = A + AT - A.multiply(AT)
    else:
        raise ArgumentError(f"unknown symmetrization mode {mode!r}; use one of {SYMMETRIZE_MODES}")
    S = sp.csr_matrix(S)
    S.eliminate_zeros()
    S.sort_indices()
    return S


def export_weights_csv(path, W):
    """Write the stored entries of ``W`` as ``i,j,w`` lines."""
    C = sp.coo_matrix(W)
    order = np.lexsort((C.col, C.row))
    with open(path, "w", encoding="utf-8") as fh:
        for r, c, v in zip(C.row[order], C.col[order], C.data[order]):
            fh.write(f"{int(r)},{int(c)},{float(v)!r}\n")

"""Symmetric eigenpairs and affine-constrained least squares."""

import logging

import numpy as np
import scipy.linalg
import scipy.sparse as sp
from scipy.sparse.linalg import ArpackNoConvergence, LinearOperator, eigsh, splu

from adaptrix.errors import ArgumentError, NumericalError

log = logging.getLogger(__name__)

DENSE_MAX_N = 2000
SYMMETRY_RTOL = 1e-10
RESIDUAL_RTOL = 1e-8


def _frobenius(M):
    if sp.issparse(M):
        return float(np.sqrt((M.multiply(M)).sum()))
    return float(np.linalg.norm(M))


def _check_symmetric(M):
    scale = _frobenius(M)
    asym = M - M.T
    err = _frobenius(asym) if sp.issparse(M) else float(np.linalg.norm(asym))
    if err > SYMMETRY_RTOL * max(scale, np.finfo(float).tiny):
        raise ArgumentError(f"matrix is not symmetric (relative asymmetry {err / scale:.3e})")
    return scale


def _rayleigh_ritz(M, V):
    """Orthonormalise ``V`` and rotate it onto the eigenbasis of its span."""
    Q, _ = np.linalg.qr(V)
    H = Q.T @ (M @ Q)
    H = 0.5 * (H + H.T)
    w, U = np.linalg.eigh(H)
    return w, Q @ U


def sym_eigs_smallest(M, m, dense_max_n=DENSE_MAX_N, deflate=None):
    """The ``m`` algebraically smallest eigenpairs of the symmetric matrix ``M``.

    ``deflate`` is an optional ``n x p`` matrix with orthonormal columns;
    its span is shifted above the spectrum, so the returned vectors are
    orthogonal to it. Problems up to ``dense_max_n`` go to LAPACK, larger
    sparse ones to ARPACK in shift-invert mode just below zero, which
    suits the positive semi-definite operators built by the embedders.
    Each result is checked against the residual bound before it is
    returned.
    """
    n = M.shape[0]
    if M.ndim != 2 or M.shape[1] != n:
        raise ArgumentError(f"expected a square matrix, got shape {M.shape}")
    if int(m) != m or not 1 <= m <= n:
        raise ArgumentError(f"m must be in [1, {n}], got {m}")
    m = int(m)
    scale = _check_symmetric(M)
    U = None
    if deflate is not None:
        U = np.asarray(deflate, dtype=np.float64).reshape(n, -1)
        if m > n - U.shape[1]:
            raise ArgumentError("not enough eigenpairs left after deflation")
    shift = 2.0 * max(scale, 1.0)

    if n <= dense_max_n or m >= n - 1:
        w, V = _dense(M, m, U, shift)
    else:
        w, V = _shift_invert(M, m, scale, U, shift)
        if w is None:
            log.info("shift-invert did not meet the residual bound; using dense solver")
            w, V = _dense(M, m, U, shift)

    res = _residuals(M, w, V)
    if np.max(res) > RESIDUAL_RTOL * max(scale, 1.0):
        raise NumericalError(
            f"eigensolver residual {np.max(res):.3e} exceeds {RESIDUAL_RTOL:g} * ||M||_F"
        )
    return w, V


def _dense(M, m, U=None, shift=0.0):
    A = M.toarray() if sp.issparse(M) else np.array(M, dtype=np.float64)
    A = 0.5 * (A + A.T)
    if U is not None:
        A += shift * (U @ U.T)
    w, V = scipy.linalg.eigh(A, subset_by_index=(0, m - 1))
    return w, V


def _residuals(M, w, V):
    return np.linalg.norm(M @ V - V * w[None, :], axis=0)


def _shift_invert(M, m, scale, U, shift):
    n = M.shape[0]
    A = sp.csc_matrix(M, dtype=np.float64)
    sigma = -1e-9 * max(scale, 1.0)
    try:
        lu = splu((A - sigma * sp.identity(n, format="csc")).tocsc())
    except RuntimeError as exc:
        log.info("factorisation failed: %s", exc)
        return None, None
    if U is None:
        solve = lu.solve
        matvec = A.__matmul__
    else:
        # Woodbury identity for (A - sigma I + shift U U^T)^-1.
        AiU = lu.solve(U)
        cap = np.linalg.inv(np.eye(U.shape[1]) / shift + U.T @ AiU)

        def solve(x):
            y = lu.solve(x)
            return y - AiU @ (cap @ (U.T @ y))

        def matvec(x):
            return A @ x + shift * (U @ (U.T @ x))

    op = LinearOperator((n, n), matvec=solve, dtype=np.float64)
    Aop = LinearOperator((n, n), matvec=matvec, dtype=np.float64)
    v0 = np.cos(np.arange(n) * 0.618) + 1.0
    k = min(n - 2, m + 2)
    try:
        w, V = eigsh(Aop, k=k, sigma=sigma, which="LM", OPinv=op, v0=v0, tol=0.0,
                     maxiter=max(1000, 10 * n))
    except (ArpackNoConvergence, RuntimeError) as exc:
        log.info("ARPACK failed: %s", exc)
        return None, None
    order = np.argsort(w)
    V = V[:, order]
    if U is not None:
        V = V - U @ (U.T @ V)
    w, V = _rayleigh_ritz(A, V)
    w, V = w[:m], V[:, :m]
    if np.max(_residuals(A, w, V)) > RESIDUAL_RTOL * max(scale, 1.0):
        return None, None
    return w, V


def gram_regularization(k, dim):
    """Relative ridge added to a local Gram matrix of ``k`` neighbours in ``dim`` dims."""
    return 1e-3 if k > dim else 1e-12


def constrained_lsq_weights(x_i, neighbors, reg=None):
    """Weights ``w`` minimising ``|x_i - sum_j w_j x_j|`` subject to ``sum(w) == 1``.

    The local Gram system is ridge-regularised by ``reg * trace(G) / k``
    (``reg`` defaults to :func:`gram_regularization`) so that it stays
    solvable when there are more neighbours than dimensions.
    """
    x_i = np.asarray(x_i, dtype=np.float64)
    Z = np.atleast_2d(np.asarray(neighbors, dtype=np.float64))
    k = Z.shape[0]
    if k == 0 or Z.size == 0:
        raise ArgumentError("at least one neighbour is required")
    if Z.shape[1] != x_i.shape[0]:
        raise ArgumentError(f"neighbours have dimension {Z.shape[1]}, point has {x_i.shape[0]}")
    if k == 1:
        return np.ones(1)
    if reg is None:
        reg = gram_regularization(k, x_i.shape[0])
    C = Z - x_i
    G = C @ C.T
    return _solve_gram(G, reg)


def _solve_gram(G, reg):
    k = G.shape[0]
    trace = np.trace(G)
    ridge = reg * trace / k if trace > 0 else reg
    G = G + np.eye(k) * ridge
    try:
        w = scipy.linalg.solve(G, np.ones(k), assume_a="pos")
    except (np.linalg.LinAlgError, scipy.linalg.LinAlgError):
        w = np.linalg.lstsq(G, np.ones(k), rcond=None)[0]
    total = w.sum()
    if not np.isfinite(total) or total == 0:
        raise NumericalError("local Gram system is singular")
    w = w / total
    # Absorb the rounding residue so the weights sum to 1 at machine precision.
    w[np.argmax(np.abs(w))] += 1.0 - w.sum()
    return w


def batch_constrained_lsq_weights(x, ids, k_star, reg=None):
    """Per-row reconstruction weights for every point of ``x``.

    Returns a list of weight vectors; row ``i`` uses the first
    ``k_star[i]`` columns of ``ids[i]`` as its neighbours.
    """
    out = []
    dim = x.shape[1]
    for i in range(x.shape[0]):
        k = int(k_star[i])
        nb = ids[i, :k]
        if k == 1:
            out.append(np.ones(1))
            continue
        C = x[nb] - x[i]
        r = gram_regularization(k, dim) if reg is None else reg
        out.append(_solve_gram(C @ C.T, r))
    return out

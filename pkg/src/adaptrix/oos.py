"""Projecting unseen points into a trained adaptive LLE embedding."""

import warnings
from dataclasses import dataclass

import numpy as np

from adaptrix.errors import AdaptrixError, ArgumentError
from adaptrix.idestim import AbideConfig, _statistics, abide
from adaptrix.linalg import constrained_lsq_weights
from adaptrix.lle import Embedding, lle_fixed, lle_star
from adaptrix.neighbors import build_neighbor_table, query_knn_arrays


@dataclass(frozen=True)
class TrainedModel:
    """A training sample with its embedding and neighbourhood statistics.

    ``fixed_k`` switches projection to plain LLE behaviour: every test
    point uses that many neighbours and no test is run.
    """

    train_cloud: object
    train_embedding: Embedding
    d_star: int
    abide_config: AbideConfig
    table: object = None
    k_star: np.ndarray | None = None
    fixed_k: int | None = None

    def __post_init__(self):
        if self.train_embedding.n != self.train_cloud.n:
            raise ArgumentError("embedding and training cloud differ in size")
        if self.fixed_k is None and self.train_embedding.d_proj != self.d_star:
            raise ArgumentError("embedding dimension must equal d_star")


def fit_lle_star(train_cloud, abide_config=None, d_proj=None, on_disconnected="raise",
                 workers=1):
    """Estimate ``d*`` and ``k*`` on the training data and embed it."""
    config = abide_config or AbideConfig()
    k_max = config.resolved_k_max(train_cloud.n)
    table = build_neighbor_table(train_cloud, k_max + 1, workers=workers)
    result = abide(train_cloud, config, table=table)
    d = result.d_star if d_proj is None else int(d_proj)
    emb = lle_star(train_cloud, result.k_star, d, table, on_disconnected)
    return TrainedModel(train_cloud, emb, d, config, table, result.k_star)


def fit_lle_fixed(train_cloud, k, d_proj, on_disconnected="raise", table=None):
    """Plain LLE with ``k`` neighbours, packaged for out-of-sample projection."""
    emb = lle_fixed(train_cloud, k, d_proj, table, on_disconnected)
    return TrainedModel(train_cloud, emb, int(d_proj), AbideConfig(), fixed_k=int(k))


def k_star_for_test_point(model, x_test):
    """Neighbourhood size and training neighbours for one test point.

    The test point is the centre; each candidate neighbour ``j`` uses its
    own training-set neighbour radii. The dimension stays fixed at
    ``d*``. If the test never rejects homogeneity the median training
    ``k*`` is used.
    """
    X = model.train_cloud.coords
    if model.fixed_k is not None:
        ids, dists = query_knn_arrays(X, x_test, model.fixed_k)
        return model.fixed_k, ids, dists
    config = model.abide_config
    n_aug = model.train_cloud.n + 1
    k_max = min(config.resolved_k_max(n_aug), model.table.depth, model.train_cloud.n - 1)
    ids, dists = query_knn_arrays(X, x_test, k_max + 1)
    ks = np.arange(config.k_min, k_max + 1)
    r_i = dists[ks - 1]
    r_j = model.table.dists[ids[ks], ks - 1]
    D = _statistics(r_i, r_j, ks, float(model.d_star))
    hits = np.flatnonzero(D >= config.threshold)
    if hits.size:
        k = int(ks[hits[0]])
    else:
        k = int(round(float(np.median(model.k_star))))
    return k, ids, dists


def project_test_point(model, x_test):
    """Embed ``x_test`` as the weighted average of its neighbours' embeddings."""
    x_test = np.asarray(x_test, dtype=np.float64)
    if x_test.shape != (model.train_cloud.dim,):
        raise ArgumentError(
            f"test point has shape {x_test.shape}, expected ({model.train_cloud.dim},)"
        )
    k, ids, dists = k_star_for_test_point(model, x_test)
    nb = ids[:k]
    Z = model.train_cloud.coords[nb]
    if k > 1 and np.all(Z == Z[0]) and np.any(Z[0] != x_test):
        warnings.warn("all neighbours of the test point coincide", RuntimeWarning)
    w = constrained_lsq_weights(x_test, Z)
    return w @ model.train_embedding.coords[nb]


def project_batch(model, X_test):
    """Row-by-row :func:`project_test_point`; rows never see each other."""
    X_test = np.asarray(X_test, dtype=np.float64)
    d = model.train_embedding.d_proj
    if X_test.size == 0:
        return np.empty((0, d))
    if X_test.ndim != 2:
        raise ArgumentError("test matrix must be two-dimensional")
    out = np.empty((X_test.shape[0], d))
    for r in range(X_test.shape[0]):
        try:
            out[r] = project_test_point(model, X_test[r])
        except AdaptrixError as exc:
            exc.args = (f"test row {r}: {exc}",)
            raise
    return out

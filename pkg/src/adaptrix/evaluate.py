"""Clustering and classification scores used to compare embeddings."""

import logging
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from adaptrix._random import substream
from adaptrix.errors import ArgumentError

log = logging.getLogger(__name__)


# ---------------------------------------------------------------- k-means


def _sq_dists(X, C):
    d2 = (
        np.einsum("ij,ij->i", X, X)[:, None]
        - 2.0 * X @ C.T
        + np.einsum("ij,ij->i", C, C)[None, :]
    )
    return np.maximum(d2, 0.0)


def _kmeans_pp(X, k, rng):
    n = X.shape[0]
    centers = np.empty((k, X.shape[1]))
    centers[0] = X[rng.integers(n)]
    closest = _sq_dists(X, centers[:1])[:, 0]
    for c in range(1, k):
        total = closest.sum()
        if total <= 0:
            idx = rng.integers(n)
        else:
            idx = int(np.searchsorted(np.cumsum(closest), rng.random() * total, side="right"))
            idx = min(idx, n - 1)
        centers[c] = X[idx]
        closest = np.minimum(closest, _sq_dists(X, centers[c : c + 1])[:, 0])
    return centers


def lloyd(X, centers, max_iter=300, tol=1e-6):
    """Lloyd iterations from ``centers``.

    Returns labels, centroids, final inertia and the inertia recorded
    after every assignment step.
    """
    centers = centers.copy()
    history = []
    for _ in range(max_iter):
        d2 = _sq_dists(X, centers)
        labels = np.argmin(d2, axis=1)
        history.append(float(d2[np.arange(X.shape[0]), labels].sum()))
        new = np.empty_like(centers)
        counts = np.bincount(labels, minlength=centers.shape[0])
        for c in range(centers.shape[0]):
            if counts[c]:
                new[c] = X[labels == c].mean(axis=0)
            else:
                # Reseed an empty cluster at the point farthest from its centre.
                far = int(np.argmax(d2[np.arange(X.shape[0]), labels]))
                new[c] = X[far]
                labels[far] = c
        shift = float(np.sqrt(np.max(np.sum((new - centers) ** 2, axis=1))))
        centers = new
        if shift < tol:
            break
    d2 = _sq_dists(X, centers)
    labels = np.argmin(d2, axis=1)
    inertia = float(d2[np.arange(X.shape[0]), labels].sum())
    history.append(inertia)
    return labels, centers, inertia, history


def kmeans(data, k, seed=0, n_init=10, max_iter=300, tol=1e-6):
    """k-means++ seeded Lloyd, best of ``n_init`` restarts by inertia."""
    X = np.asarray(data, dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None]
    if int(k) != k or k < 1:
        raise ArgumentError("k must be a positive integer")
    if k > X.shape[0]:
        raise ArgumentError(f"k={k} exceeds the number of points {X.shape[0]}")
    k = int(k)
    rng = substream(seed, "kmeans")
    best = None
    for _ in range(n_init):
        labels, centers, inertia, _ = lloyd(X, _kmeans_pp(X, k, rng), max_iter, tol)
        if best is None or inertia < best[2]:
            best = (labels, centers, inertia)
    return best


# ---------------------------------------------------------------- partitions


@dataclass(frozen=True)
class ClusterEval:
    ari: float
    homogeneity: float
    completeness: float
    v_measure: float

    def as_dict(self):
        return {
            "ari": self.ari,
            "homogeneity": self.homogeneity,
            "completeness": self.completeness,
            "v_measure": self.v_measure,
        }


def contingency(truth, pred):
    """Class-by-cluster count matrix."""
    truth = np.asarray(truth)
    pred = np.asarray(pred)
    if truth.shape != pred.shape or truth.ndim != 1:
        raise ArgumentError(f"label vectors differ in shape: {truth.shape} vs {pred.shape}")
    _, t = np.unique(truth, return_inverse=True)
    _, p = np.unique(pred, return_inverse=True)
    C = np.zeros((t.max() + 1, p.max() + 1), dtype=np.int64)
    np.add.at(C, (t, p), 1)
    return C


def _pairs(x):
    x = np.asarray(x, dtype=np.float64)
    return x * (x - 1) / 2.0


def adjusted_rand_index(truth, pred):
    if len(truth) < 2:
        raise ArgumentError("need at least two points")
    C = contingency(truth, pred)
    n = C.sum()
    index = _pairs(C).sum()
    rows = _pairs(C.sum(axis=1)).sum()
    cols = _pairs(C.sum(axis=0)).sum()
    expected = rows * cols / _pairs(n)
    maximum = 0.5 * (rows + cols)
    if maximum == expected:
        # Both partitions trivial (one block, or all singletons): agreement is perfect.
        return 1.0
    return float((index - expected) / (maximum - expected))


def _entropy(counts):
    counts = counts[counts > 0].astype(np.float64)
    p = counts / counts.sum()
    return float(-(p * np.log(p)).sum())


def homogeneity_completeness_v(truth, pred):
    """Homogeneity, completeness and their harmonic mean (natural logs)."""
    C = contingency(truth, pred).astype(np.float64)
    n = C.sum()
    h_class = _entropy(C.sum(axis=1))
    h_cluster = _entropy(C.sum(axis=0))
    nz = C > 0
    joint = C[nz] / n
    # H(C|K) = -sum p(c,k) log(p(c,k) / p(k)), H(K|C) likewise.
    pk = np.broadcast_to(C.sum(axis=0)[None, :], C.shape)[nz] / n
    pc = np.broadcast_to(C.sum(axis=1)[:, None], C.shape)[nz] / n
    h_c_given_k = float(-(joint * np.log(joint / pk)).sum())
    h_k_given_c = float(-(joint * np.log(joint / pc)).sum())
    homogeneity = 1.0 if h_class == 0 else 1.0 - h_c_given_k / h_class
    completeness = 1.0 if h_cluster == 0 else 1.0 - h_k_given_c / h_cluster
    if homogeneity + completeness == 0:
        v = 0.0
    else:
        v = 2.0 * homogeneity * completeness / (homogeneity + completeness)
    return homogeneity, completeness, v


def cluster_eval(truth, pred):
    h, c, v = homogeneity_completeness_v(truth, pred)
    return ClusterEval(adjusted_rand_index(truth, pred), h, c, v)


def cluster_embedding(coords, truth, seed=0):
    """K-means with one cluster per true class, scored against ``truth``."""
    k = len(np.unique(truth))
    labels, _, _ = kmeans(coords, k, seed=seed)
    return cluster_eval(truth, labels)


# ---------------------------------------------------------------- classification


@dataclass(frozen=True)
class LogisticModel:
    """Multinomial logistic regression; row 0 of ``weights`` is the intercept."""

    weights: np.ndarray
    classes: np.ndarray
    converged: bool
    n_iter: int
    grad_norm: float


def _design(X):
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None]
    return np.hstack([np.ones((X.shape[0], 1)), X])


def _nll_and_grad(W, Z, Y):
    S = Z @ W
    lse = logsumexp(S, axis=1)
    nll = float((lse - (S * Y).sum(axis=1)).mean())
    P = np.exp(S - lse[:, None])
    grad = Z.T @ (P - Y) / Z.shape[0]
    return nll, grad


def logistic_fit(X, y, max_iter=1000, tol=1e-6):
    """Unpenalised multinomial logistic regression by gradient descent.

    Each step backtracks from twice the previous step length until the
    Armijo condition holds. On separable data the likelihood has no
    maximiser; the fit then stops at ``max_iter`` with a warning.
    """
    Z = _design(X)
    y = np.asarray(y)
    if y.shape != (Z.shape[0],):
        raise ArgumentError("X and y disagree on the number of rows")
    classes, yi = np.unique(y, return_inverse=True)
    Y = np.eye(len(classes))[yi]
    W = np.zeros((Z.shape[1], len(classes)))
    nll, grad = _nll_and_grad(W, Z, Y)
    step = 1.0
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        gnorm = float(np.max(np.abs(grad)))
        if gnorm < tol:
            converged = True
            it -= 1
            break
        step *= 2.0
        g2 = float((grad * grad).sum())
        while True:
            W_new = W - step * grad
            nll_new, grad_new = _nll_and_grad(W_new, Z, Y)
            if nll_new <= nll - 0.5 * step * g2 or step < 1e-12:
                break
            step *= 0.5
        W, nll, grad = W_new, nll_new, grad_new
    else:
        converged = float(np.max(np.abs(grad))) < tol
    gnorm = float(np.max(np.abs(grad)))
    if not converged:
        warnings.warn(
            f"logistic regression did not converge in {max_iter} iterations "
            f"(gradient {gnorm:.2e}); classes may be separable",
            RuntimeWarning,
        )
    elif len(classes) > 1 and np.all(np.argmax(Z @ W, axis=1) == yi):
        # The gradient can vanish numerically while the weights still diverge.
        warnings.warn(
            "training classes are perfectly separable; the unpenalised likelihood "
            "has no maximiser and the weights are only a finite approximation",
            RuntimeWarning,
        )
    return LogisticModel(W, classes, converged, it, gnorm)


def classify(model, X):
    Z = _design(X)
    if Z.shape[1] != model.weights.shape[0]:
        raise ArgumentError(
            f"model expects {model.weights.shape[0] - 1} features, got {Z.shape[1] - 1}"
        )
    return model.classes[np.argmax(Z @ model.weights, axis=1)]


def accuracy(truth, pred):
    truth = np.asarray(truth)
    pred = np.asarray(pred)
    if truth.shape != pred.shape:
        raise ArgumentError("label vectors differ in shape")
    return float(np.mean(truth == pred))


def f1_macro(truth, pred):
    truth = np.asarray(truth)
    pred = np.asarray(pred)
    if truth.shape != pred.shape:
        raise ArgumentError("label vectors differ in shape")
    scores = []
    for c in np.union1d(truth, pred):
        tp = np.sum((truth == c) & (pred == c))
        fp = np.sum((truth != c) & (pred == c))
        fn = np.sum((truth == c) & (pred != c))
        denom = 2 * tp + fp + fn
        scores.append(0.0 if denom == 0 else 2.0 * tp / denom)
    return float(np.mean(scores))


# ---------------------------------------------------------------- resampling


def stratified_folds(labels, m, seed=0):
    """Split indices into ``m`` folds, class by class, round robin."""
    labels = np.asarray(labels)
    n = labels.shape[0]
    if int(m) != m or m < 2 or m > n:
        raise ArgumentError(f"number of folds must be in [2, {n}], got {m}")
    m = int(m)
    rng = substream(seed, "folds")
    classes, counts = np.unique(labels, return_counts=True)
    folds = [[] for _ in range(m)]
    if np.any(counts < m):
        warnings.warn(
            "some class has fewer members than folds; falling back to unstratified folds",
            RuntimeWarning,
        )
        for pos, idx in enumerate(rng.permutation(n)):
            folds[pos % m].append(idx)
    else:
        offset = 0
        for c in classes:
            members = rng.permutation(np.flatnonzero(labels == c))
            for pos, idx in enumerate(members):
                folds[(pos + offset) % m].append(idx)
            offset += len(members)
    return [np.sort(np.array(f, dtype=np.int64)) for f in folds]


def holdout_splits(labels, test_fraction, repeats, seed=0):
    """``repeats`` stratified train/test splits with the given test fraction."""
    labels = np.asarray(labels)
    if not 0 < test_fraction < 1:
        raise ArgumentError("test fraction must lie in (0, 1)")
    rng = substream(seed, "holdout")
    splits = []
    for _ in range(int(repeats)):
        test = []
        for c in np.unique(labels):
            members = rng.permutation(np.flatnonzero(labels == c))
            take = max(1, int(round(test_fraction * len(members))))
            test.extend(members[:take])
        test = np.sort(np.array(test, dtype=np.int64))
        train = np.setdiff1d(np.arange(labels.shape[0]), test)
        splits.append((train, test))
    return splits


def evaluate_splits(cloud, splits, pipeline, seed=0):
    """Fit ``pipeline`` on each train split and score the projected test split.

    ``pipeline(train_cloud, test_coords, seed)`` must return the training
    embedding and the projected test embedding as arrays.
    """
    if cloud.labels is None:
        raise ArgumentError("supervised evaluation needs labels")
    folds = []
    for f, (train, test) in enumerate(splits):
        train_cloud = cloud.subset(train)
        Y_train, Y_test = pipeline(train_cloud, cloud.coords[test], seed)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            model = logistic_fit(Y_train, train_cloud.labels)
        pred = classify(model, Y_test)
        truth = cloud.labels[test]
        folds.append(
            {
                "fold": f,
                "n_train": int(len(train)),
                "n_test": int(len(test)),
                "accuracy": accuracy(truth, pred),
                "f1_macro": f1_macro(truth, pred),
                "converged": bool(model.converged),
            }
        )
        log.info("split %d: accuracy %.4f", f, folds[-1]["accuracy"])
    return {
        "folds": folds,
        "mean_accuracy": float(np.mean([f["accuracy"] for f in folds])),
        "mean_f1_macro": float(np.mean([f["f1_macro"] for f in folds])),
    }


def kfold_cv(cloud, m, pipeline, seed=0):
    """Stratified ``m``-fold cross-validation of an embed-then-classify pipeline."""
    if cloud.labels is None:
        raise ArgumentError("cross-validation needs labels")
    folds = stratified_folds(cloud.labels, m, seed)
    everything = np.arange(cloud.n)
    splits = [(np.setdiff1d(everything, f), f) for f in folds]
    return evaluate_splits(cloud, splits, pipeline, seed)

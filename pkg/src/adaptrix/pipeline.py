"""Compose the dimension estimate with an embedder."""

import time
from dataclasses import dataclass

import numpy as np

from adaptrix.errors import AdaptrixError, ArgumentError, StageError
from adaptrix.idestim import AbideConfig, abide
from adaptrix.lle import lle_star
from adaptrix.neighbors import build_neighbor_table
from adaptrix.spectral import spectral_embed_star
from adaptrix.umap import UmapConfig, umap_star

METHODS = ("lle", "spectral", "umap")


@dataclass(frozen=True)
class Reduction:
    """Everything one run of :func:`adaptive_reduce` produced."""

    abide: object
    embedding: object
    k_used: np.ndarray
    d_proj: int
    estimate_seconds: float
    embed_seconds: float


def resolve_fixed_k(fixed_k, result):
    """``int`` stays as is, ``"median"`` becomes the rounded median of ``k*``."""
    if fixed_k is None:
        return None
    if fixed_k == "median":
        return max(1, int(round(float(np.median(result.k_star)))))
    k = int(fixed_k)
    if k < 1:
        raise ArgumentError("fixed k must be positive")
    return k


def embed(cloud, method, k_star, d_proj, table=None, umap_config=None,
          on_disconnected="raise"):
    """Dispatch to one embedder with an explicit neighbourhood-size vector.

    ``on_disconnected`` only affects LLE; the graph-based embedders
    already handle several components.
    """
    if method == "lle":
        return lle_star(cloud, k_star, d_proj, table, on_disconnected)
    if method == "spectral":
        return spectral_embed_star(cloud, k_star, d_proj, table)
    if method == "umap":
        return umap_star(cloud, k_star, d_proj, umap_config or UmapConfig(), table)
    raise ArgumentError(f"unknown method {method!r}; choose from {METHODS}")


def run_reduction(
    cloud, method, d_override=None, abide_config=None, umap_config=None, fixed_k=None,
    workers=1, on_disconnected="raise",
):
    """Estimate ``(d*, k*)`` once and embed.

    ``fixed_k`` replaces every ``k*`` by one value (an int or
    ``"median"``); ``d_override`` replaces ``d*`` as target dimension.
    """
    if method not in METHODS:
        raise ArgumentError(f"unknown method {method!r}; choose from {METHODS}")
    config = abide_config or AbideConfig()
    t0 = time.perf_counter()
    try:
        k_max = config.resolved_k_max(cloud.n)
        table = build_neighbor_table(cloud, k_max + 1, workers=workers)
        result = abide(cloud, config, table=table)
    except AdaptrixError as exc:
        raise StageError("estimation", exc) from exc
    t1 = time.perf_counter()
    d_proj = result.d_star if d_override is None else int(d_override)
    k = resolve_fixed_k(fixed_k, result)
    k_used = result.k_star if k is None else np.full(cloud.n, k, dtype=np.int64)
    try:
        if k is not None and k > table.depth:
            table = build_neighbor_table(cloud, k, workers=workers)
        emb = embed(cloud, method, k_used, d_proj, table, umap_config, on_disconnected)
    except AdaptrixError as exc:
        raise StageError("embedding", exc) from exc
    t2 = time.perf_counter()
    return Reduction(result, emb, k_used, d_proj, t1 - t0, t2 - t1)


def adaptive_reduce(cloud, method, d_override=None, abide_config=None, umap_config=None):
    """Return ``(AbideResult, Embedding)`` for the adaptive version of ``method``."""
    red = run_reduction(cloud, method, d_override, abide_config, umap_config)
    return red.abide, red.embedding


def kstar_summary(result):
    """Median, mean, standard deviation and Freedman-Diaconis histogram of ``k*``."""
    k = np.asarray(result.k_star if hasattr(result, "k_star") else result, dtype=np.float64)
    if k.size == 0:
        raise ArgumentError("empty k* vector")
    if np.ptp(k) == 0:
        counts, edges = np.array([k.size]), np.array([k[0] - 0.5, k[0] + 0.5])
    else:
        counts, edges = np.histogram(k, bins="fd")
    return {
        "median": float(np.median(k)),
        "mean": float(np.mean(k)),
        "std": float(np.std(k)),
        "min": int(k.min()),
        "max": int(k.max()),
        "histogram": {"counts": [int(c) for c in counts], "edges": [float(e) for e in edges]},
    }

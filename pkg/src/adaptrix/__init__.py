"""Locally adaptive neighbourhoods for intrinsic dimension estimation and embedding."""

from adaptrix.dataset import PointCloud, generate_manifolds, load_csv, load_iris
from adaptrix.errors import (
    AdaptrixError,
    ArgumentError,
    DataError,
    DisconnectedGraphError,
    NumericalError,
    StageError,
)
from adaptrix.idestim import AbideConfig, AbideResult, abide
from adaptrix.lle import Embedding, lle_fixed, lle_star
from adaptrix.pipeline import adaptive_reduce, kstar_summary, run_reduction
from adaptrix.spectral import spectral_cluster_star, spectral_embed_star
from adaptrix.umap import UmapConfig, umap_star

__version__ = "0.1.0"

__all__ = [
    "AbideConfig",
    "AbideResult",
    "AdaptrixError",
    "ArgumentError",
    "DataError",
    "DisconnectedGraphError",
    "Embedding",
    "NumericalError",
    "PointCloud",
    "StageError",
    "UmapConfig",
    "abide",
    "adaptive_reduce",
    "generate_manifolds",
    "kstar_summary",
    "lle_fixed",
    "lle_star",
    "load_csv",
    "load_iris",
    "run_reduction",
    "spectral_cluster_star",
    "spectral_embed_star",
    "umap_star",
]

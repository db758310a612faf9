"""Streaming text clustering and topic analysis."""

__version__ = "0.1.0"

from .cluster import ClusterParams, Clustering, dynamic_cluster
from .textprep import IdfModel, RawPost, SparseVector, Vocabulary
from .window import SlidingWindow

__all__ = [
    "ClusterParams",
    "Clustering",
    "dynamic_cluster",
    "IdfModel",
    "RawPost",
    "SparseVector",
    "Vocabulary",
    "SlidingWindow",
    "__version__",
]

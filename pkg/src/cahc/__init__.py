"""Contrastive attributed hypergraph clustering."""

__version__ = "0.1.0"

from .core import Hypergraph, load_hypergraph, read_embeddings, remove_isolated_nodes, write_embeddings
from .cluster import TrainConfig, kmeans, run_cahc
from .metrics import evaluate
from .synth import SynthSpec, generate

__all__ = [
    "Hypergraph",
    "load_hypergraph",
    "remove_isolated_nodes",
    "read_embeddings",
    "write_embeddings",
    "TrainConfig",
    "kmeans",
    "run_cahc",
    "evaluate",
    "SynthSpec",
    "generate",
]

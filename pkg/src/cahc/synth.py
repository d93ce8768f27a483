"""Planted-partition attributed hypergraphs for desk-scale experiments."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import Hypergraph

__all__ = ["SynthSpec", "generate", "block_sizes"]


@dataclass(frozen=True)
class SynthSpec:
    """Parameters of the planted-partition generator.

    Nodes are split into ``k_blocks`` near-equal blocks. Each block receives
    ``edges_per_block`` hyperedges of ``edge_size`` distinct members drawn from
    the block; every member is then swapped, with probability ``noise_rate``,
    for a random node outside the block. Features are
    ``feature_signal * onehot(block)`` plus standard Gaussian noise.
    """

    n_nodes: int = 150
    k_blocks: int = 3
    edges_per_block: int = 60
    edge_size: int = 4
    noise_rate: float = 0.1
    feature_dim: int = 16
    feature_signal: float = 2.0
    seed: int = 0

    def __post_init__(self):
        if self.k_blocks < 2:
            raise ValueError("k_blocks must be >= 2")
        if self.edge_size < 2:
            raise ValueError("edge_size must be >= 2")
        if not 0.0 <= self.noise_rate <= 1.0:
            raise ValueError("noise_rate must lie in [0, 1]")
        if self.feature_dim < self.k_blocks:
            raise ValueError("feature_dim must be >= k_blocks to hold the block indicator")
        if min(block_sizes(self.n_nodes, self.k_blocks)) < self.edge_size:
            raise ValueError("blocks are smaller than edge_size")
        if self.edges_per_block < 1:
            raise ValueError("edges_per_block must be >= 1")


def block_sizes(n: int, k: int) -> list[int]:
    base, extra = divmod(n, k)
    return [base + (1 if b < extra else 0) for b in range(k)]


def generate(spec: SynthSpec) -> Hypergraph:
    rng = np.random.default_rng(spec.seed)
    sizes = block_sizes(spec.n_nodes, spec.k_blocks)
    labels = np.repeat(np.arange(spec.k_blocks), sizes)
    starts = np.concatenate([[0], np.cumsum(sizes)])
    edges = []
    for b in range(spec.k_blocks):
        inside = np.arange(starts[b], starts[b + 1])
        outside = np.concatenate([np.arange(0, starts[b]), np.arange(starts[b + 1], spec.n_nodes)])
        for _ in range(spec.edges_per_block):
            members = rng.choice(inside, size=spec.edge_size, replace=False)
            swap = rng.random(spec.edge_size) < spec.noise_rate
            if swap.any():
                pool = rng.permutation(outside)
                members = members.copy()
                members[swap] = pool[: swap.sum()]
            edges.append(np.sort(members))
    inc = np.zeros((spec.n_nodes, len(edges)), dtype=np.int8)
    for j, members in enumerate(edges):
        inc[members, j] = 1
    features = rng.standard_normal((spec.n_nodes, spec.feature_dim))
    features[np.arange(spec.n_nodes), labels] += spec.feature_signal
    return Hypergraph(inc, features, labels, spec.k_blocks)

"""Stochastic hypergraph views and corrupted (negative) hyperedges."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .core import Hypergraph

__all__ = [
    "AugmentConfig",
    "HypergraphView",
    "mask_features",
    "mask_membership",
    "make_view",
    "generate_negative_hyperedges",
]


@dataclass(frozen=True)
class AugmentConfig:
    p_f: float = 0.2
    p_m: float = 0.2
    seed: int = 0
    neg_replacements: int = 1

    def __post_init__(self):
        for name in ("p_f", "p_m"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name}={v} is not a probability")
        if self.neg_replacements < 1:
            raise ValueError("neg_replacements must be >= 1")


@dataclass(frozen=True, eq=False)
class HypergraphView:
    features: np.ndarray
    incidence: np.ndarray
    tag: str = ""

    @property
    def n_nodes(self) -> int:
        return self.incidence.shape[0]

    @property
    def n_edges(self) -> int:
        return self.incidence.shape[1]

    def pairs(self) -> tuple[np.ndarray, np.ndarray]:
        edges, nodes = np.nonzero(self.incidence.T)
        return nodes, edges

    @classmethod
    def of(cls, h: Hypergraph, tag: str = "original") -> "HypergraphView":
        return cls(h.features, h.incidence, tag)


def mask_features(x: np.ndarray, p_f: float, rng: np.random.Generator) -> np.ndarray:
    """Zero each entry independently with probability ``p_f``."""
    keep = rng.random(x.shape) >= p_f
    return np.where(keep, x, 0.0)


def mask_membership(
    h_inc: np.ndarray, p_m: float, rng: np.random.Generator, repair: bool = True
) -> np.ndarray:
    """Drop each node-hyperedge membership with probability ``p_m``.

    With ``repair``, a hyperedge left empty gets one of its original members
    back (chosen uniformly) so that every column stays non-empty.
    """
    keep = rng.random(h_inc.shape) >= p_m
    out = (h_inc * keep).astype(h_inc.dtype)
    if repair:
        for j in np.flatnonzero(out.sum(axis=0) == 0):
            members = np.flatnonzero(h_inc[:, j])
            if members.size:
                out[rng.choice(members), j] = 1
    return out


def make_view(h: Hypergraph, p_f: float, p_m: float, rng: np.random.Generator, tag: str = "") -> HypergraphView:
    return HypergraphView(
        mask_features(h.features, p_f, rng), mask_membership(h.incidence, p_m, rng), tag
    )


def generate_negative_hyperedges(
    h: Hypergraph, rng: np.random.Generator, replacements: int = 1
) -> list[np.ndarray]:
    """One corrupted copy of every hyperedge.

    ``replacements`` members (uniformly chosen) are swapped for uniformly
    chosen non-members, so the result has the source's cardinality. Edges
    with too few non-members to swap are skipped with a warning.
    """
    n = h.n_nodes
    if n < 2:
        raise ValueError("need at least 2 nodes to corrupt hyperedges")
    out = []
    skipped = 0
    for j in range(h.n_edges):
        members = np.flatnonzero(h.incidence[:, j])
        outside = np.flatnonzero(h.incidence[:, j] == 0)
        r = min(replacements, members.size)
        if outside.size < r:
            skipped += 1
            continue
        drop = rng.choice(members.size, size=r, replace=False)
        add = rng.choice(outside, size=r, replace=False)
        neg = members.copy()
        neg[drop] = add
        out.append(np.sort(neg))
    if skipped:
        warnings.warn(f"{skipped} hyperedge(s) span too many nodes to corrupt; skipped", RuntimeWarning)
    return out

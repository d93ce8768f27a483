"""Contrastive and clustering losses.

Inputs may be plain arrays or :class:`~cahc.compute.Tensor` objects; the
result is always a scalar Tensor so it can be differentiated.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import compute as C
from .compute import Tensor

__all__ = [
    "LossWeights",
    "Temperatures",
    "hyperedge_loss",
    "node_pair_loss",
    "node_loss",
    "rep_loss",
    "soft_assign",
    "pseudo_labels",
    "clustering_loss",
    "total_loss",
    "LOG_FLOOR",
]

LOG_FLOOR = 1e-12


@dataclass(frozen=True)
class LossWeights:
    w_hyper: float = 1.0
    w_node: float = 1.0
    w_clus: float = 1.0

    def __post_init__(self):
        if min(self.w_hyper, self.w_node, self.w_clus) < 0:
            raise ValueError("loss weights must be non-negative")


@dataclass(frozen=True)
class Temperatures:
    tau_n: float = 0.5
    tau_c: float = 0.5

    def __post_init__(self):
        if self.tau_n <= 0 or self.tau_c <= 0:
            raise ValueError("temperatures must be positive")


def _as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else C.tensor(x)


def hyperedge_loss(pos_logits, neg_logits) -> Tensor:
    """``-mean log sigmoid(pos) - mean log(1 - sigmoid(neg))``."""
    pos, neg = _as_tensor(pos_logits), _as_tensor(neg_logits)
    if pos.value.size == 0 or neg.value.size == 0:
        raise ValueError("hyperedge_loss needs at least one positive and one negative logit")
    # log(1 - sigmoid(s)) == log sigmoid(-s)
    return C.neg(C.add(C.mean_all(C.log_sigmoid(pos)), C.mean_all(C.log_sigmoid(C.neg(neg)))))


def _infonce_terms(z1: Tensor, z2: Tensor, tau_n: float, eps: float | None) -> tuple[Tensor, Tensor]:
    sim = C.scale(C.cosine_similarity_matrix(z1, z2, eps), 1.0 / tau_n)
    fwd = C.diag(C.log_softmax_rows(sim))
    bwd = C.diag(C.log_softmax_rows(C.transpose(sim)))
    return fwd, bwd


def node_pair_loss(zi1, i: int, z2, tau_n: float, eps: float | None = None) -> Tensor:
    """InfoNCE term for one anchor row ``zi1`` against every row of ``z2``;
    row ``i`` of ``z2`` is the positive."""
    if tau_n <= 0:
        raise ValueError("tau_n must be positive")
    anchor = _as_tensor(zi1)
    if anchor.value.ndim == 1:
        anchor = C.reshape(anchor, (1, -1))
    z2 = _as_tensor(z2)
    sim = C.scale(C.cosine_similarity_matrix(anchor, z2, eps), 1.0 / tau_n)
    return C.neg(C.take(C.log_softmax_rows(sim), [0], [i]))


def node_loss(z1, z2, tau_n: float, eps: float | None = None) -> Tensor:
    """Symmetric InfoNCE averaged over both directions and all N anchors."""
    if tau_n <= 0:
        raise ValueError("tau_n must be positive")
    z1, z2 = _as_tensor(z1), _as_tensor(z2)
    if z1.shape != z2.shape:
        raise C.ShapeError(f"node_loss views differ in shape: {z1.shape} vs {z2.shape}")
    fwd, bwd = _infonce_terms(z1, z2, tau_n, eps)
    n = z1.shape[0]
    return C.scale(C.add(C.sum_all(fwd), C.sum_all(bwd)), -1.0 / (2 * n))


def rep_loss(h_loss: Tensor, n_loss: Tensor, weights: LossWeights = LossWeights()) -> Tensor:
    return C.add(C.scale(_as_tensor(h_loss), weights.w_hyper), C.scale(_as_tensor(n_loss), weights.w_node))


def soft_assign(z, centroids, tau_c: float, eps: float | None = None) -> Tensor:
    """Row-softmax of cosine similarity to each centroid, scaled by ``1/tau_c``."""
    if tau_c <= 0:
        raise ValueError("tau_c must be positive")
    z, c = _as_tensor(z), _as_tensor(centroids)
    if c.value.ndim != 2 or c.shape[0] < 1:
        raise ValueError("need at least one centroid")
    return C.softmax_rows(C.scale(C.cosine_similarity_matrix(z, c, eps), 1.0 / tau_c))


def pseudo_labels(mu) -> np.ndarray:
    """Row-wise argmax; ties go to the lowest cluster index."""
    values = mu.value if isinstance(mu, Tensor) else np.asarray(mu)
    return np.argmax(values, axis=1)


def clustering_loss(mu, labels) -> Tensor:
    """Cross-entropy of ``mu`` against hard labels, ``log`` floored at 1e-12."""
    mu = _as_tensor(mu)
    labels = np.asarray(labels, dtype=np.intp)
    n = mu.shape[0]
    if labels.shape != (n,):
        raise C.ShapeError(f"labels shape {labels.shape} vs {n} rows")
    picked = C.take(mu, np.arange(n), labels)
    return C.scale(C.sum_all(C.log(C.clip_min(picked, LOG_FLOOR))), -1.0 / n)


def total_loss(rep: Tensor, clus: Tensor, weights: LossWeights = LossWeights()) -> Tensor:
    return C.add(_as_tensor(rep), C.scale(_as_tensor(clus), weights.w_clus))

"""Multi-head attention hypergraph encoder, projection head and edge scorer.

One encoder layer updates node states ``P`` and hyperedge states ``Q``::

    P' = relu(agg_ev(P, Q) @ theta_v + P @ phi_v)
    Q' = relu(agg_ve(P, Q) @ theta_e + Q @ phi_e)

where ``agg_ev`` lets every node attend over its incident hyperedges and
``agg_ve`` lets every hyperedge attend over its member nodes. Incidences are
handled as explicit (node, edge) pair lists.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import compute as C
from .augment import HypergraphView
from .compute import Tensor

__all__ = [
    "EncoderConfig",
    "Params",
    "Incidence",
    "init_params",
    "init_states",
    "attention_coefficients",
    "aggregate",
    "layer_forward",
    "encode",
    "pool_edges",
    "project",
    "score_edges",
]

EDGE_REPRS = ("z", "z_proj", "q")


@dataclass(frozen=True)
class EncoderConfig:
    in_dim: int
    layers: int = 1
    heads: int = 4
    head_dim: int = 128
    out_dim: int | None = None
    leaky_slope: float = 0.2
    attention: bool = True
    edge_repr: str = "z"

    def __post_init__(self):
        if self.layers < 1:
            raise ValueError("layers must be >= 1")
        if min(self.in_dim, self.heads, self.head_dim) < 1:
            raise ValueError("in_dim, heads and head_dim must be positive")
        if self.out_dim is not None and self.out_dim < 1:
            raise ValueError("out_dim must be positive")
        if self.edge_repr not in EDGE_REPRS:
            raise ValueError(f"edge_repr must be one of {EDGE_REPRS}")

    @property
    def width(self) -> int:
        """Concatenated width of all attention heads."""
        return self.heads * self.head_dim

    @property
    def embedding_dim(self) -> int:
        return self.out_dim if self.out_dim is not None else self.width


class Params(dict):
    """Ordered name -> parameter Tensor mapping."""

    def tensors(self, prefix: str = "") -> list[Tensor]:
        return [t for k, t in self.items() if k.startswith(prefix)]

    def snapshot(self) -> dict[str, np.ndarray]:
        return {k: t.value.copy() for k, t in self.items()}

    def load(self, values: dict[str, np.ndarray]) -> None:
        for k, v in values.items():
            self[k].value[...] = v


@dataclass(frozen=True, eq=False)
class Incidence:
    """Pair-list form of an incidence matrix."""

    nodes: np.ndarray
    edges: np.ndarray
    n_nodes: int
    n_edges: int

    @classmethod
    def from_matrix(cls, inc: np.ndarray) -> "Incidence":
        edges, nodes = np.nonzero(np.asarray(inc).T)
        return cls(nodes, edges, inc.shape[0], inc.shape[1])

    @classmethod
    def from_sets(cls, sets: Sequence[np.ndarray], n_nodes: int) -> "Incidence":
        nodes = np.concatenate([np.asarray(s, dtype=np.intp) for s in sets]) if sets else np.zeros(0, np.intp)
        edges = np.repeat(np.arange(len(sets)), [len(s) for s in sets])
        return cls(nodes, edges, n_nodes, len(sets))


def _glorot(rng: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:
    if fan_in < 1 or fan_out < 1:
        raise ValueError(f"degenerate parameter shape ({fan_in}, {fan_out})")
    bound = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-bound, bound, size=(fan_in, fan_out))


def init_params(cfg: EncoderConfig, seed: int) -> Params:
    """Glorot-uniform weights, zero biases, deterministic per seed."""
    rng = np.random.default_rng(seed)
    p = Params()

    def add(name, fan_in, fan_out):
        p[name] = C.parameter(_glorot(rng, fan_in, fan_out), name)

    hd, w, out = cfg.head_dim, cfg.width, cfg.embedding_dim
    in_v = in_e = cfg.in_dim
    for layer in range(cfg.layers):
        # "ev": nodes attend over edges; "ve": edges attend over nodes.
        for direction, q_in, kv_in in (("ev", in_v, in_e), ("ve", in_e, in_v)):
            pre = f"enc.{layer}.{direction}"
            for h in range(cfg.heads):
                add(f"{pre}.W_P{h}", q_in, hd)
                add(f"{pre}.W_Q{h}", kv_in, hd)
                add(f"{pre}.a{h}", 2 * hd, 1)
            add(f"{pre}.W_O", w, w)
        add(f"enc.{layer}.theta_v", w, out)
        add(f"enc.{layer}.phi_v", in_v, out)
        add(f"enc.{layer}.theta_e", w, out)
        add(f"enc.{layer}.phi_e", in_e, out)
        in_v = in_e = out
    for head in ("proj", "score"):
        out2 = 1 if head == "score" else out
        add(f"{head}.W1", out, out)
        p[f"{head}.b1"] = C.parameter(np.zeros((1, out)), f"{head}.b1")
        add(f"{head}.W2", out, out2)
        p[f"{head}.b2"] = C.parameter(np.zeros((1, out2)), f"{head}.b2")
    return p


def init_states(view: HypergraphView) -> tuple[Tensor, Tensor]:
    """``P0 = X``; ``Q0[j]`` = mean feature row over the members of edge j."""
    x = C.tensor(view.features)
    inc = Incidence.from_matrix(view.incidence)
    counts = np.bincount(inc.edges, minlength=inc.n_edges)
    if np.any(counts == 0):
        raise ValueError(f"hyperedge {int(np.flatnonzero(counts == 0)[0])} is empty in this view")
    q0 = C.row_mean_pool_by_segments(x, inc.nodes, inc.edges, inc.n_edges)
    return x, q0


def _direction(inc: Incidence, direction: str):
    """(query ids, key ids, group count) for a direction."""
    if direction == "ev":
        return inc.nodes, inc.edges, inc.n_nodes
    if direction == "ve":
        return inc.edges, inc.nodes, inc.n_edges
    raise ValueError(f"unknown direction {direction!r}")


def attention_coefficients(
    queries: Tensor,
    keys: Tensor,
    inc: Incidence,
    direction: str,
    params: Params,
    prefix: str,
    head: int,
    slope: float = 0.2,
    allow_empty: bool = False,
) -> Tensor:
    """Per-pair attention weights, shape ``(n_pairs, 1)``.

    ``queries`` are the states doing the attending (nodes for ``"ev"``,
    edges for ``"ve"``); weights are normalized within each query's group.
    A query with no incident pairs raises unless ``allow_empty``.
    """
    q_ids, k_ids, n_groups = _direction(inc, direction)
    counts = np.bincount(q_ids, minlength=n_groups)
    if not allow_empty and np.any(counts == 0):
        who = "node" if direction == "ev" else "hyperedge"
        raise ValueError(f"{who} {int(np.flatnonzero(counts == 0)[0])} has no incident pairs")
    hd = params[f"{prefix}.W_P{head}"].shape[1]
    a = params[f"{prefix}.a{head}"]
    a_q = _rows(a, 0, hd)
    a_k = _rows(a, hd, 2 * hd)
    sq = C.matmul(C.matmul(queries, params[f"{prefix}.W_P{head}"]), a_q)
    sk = C.matmul(C.matmul(keys, params[f"{prefix}.W_Q{head}"]), a_k)
    scores = C.leaky_relu(C.add(C.gather_rows(sq, q_ids), C.gather_rows(sk, k_ids)), slope)
    return C.segment_softmax(scores, q_ids, n_groups)


def _rows(a: Tensor, start: int, stop: int) -> Tensor:
    return C.gather_rows(a, np.arange(start, stop))


def aggregate(
    queries: Tensor,
    keys: Tensor,
    inc: Incidence,
    direction: str,
    params: Params,
    prefix: str,
    slope: float = 0.2,
    attention: bool = True,
) -> Tensor:
    """Multi-head attention aggregation, ``concat_h(alpha_h @ keys W_Q^h) @ W_O``.

    With ``attention=False`` every group is averaged uniformly. A query with
    no incident pairs (a node whose memberships were all masked out of a
    view) receives a zero row.
    """
    q_ids, k_ids, n_groups = _direction(inc, direction)
    heads = []
    h = 0
    while f"{prefix}.W_Q{h}" in params:
        msg = C.gather_rows(C.matmul(keys, params[f"{prefix}.W_Q{h}"]), k_ids)
        if attention:
            alpha = attention_coefficients(
                queries, keys, inc, direction, params, prefix, h, slope, allow_empty=True
            )
            heads.append(C.segment_sum(C.mul(alpha, msg), q_ids, n_groups))
        else:
            counts = np.bincount(q_ids, minlength=n_groups)
            heads.append(C.segment_sum(C.scale_rows(msg, 1.0 / counts[q_ids]), q_ids, n_groups))
        h += 1
    return C.matmul(C.concat_cols(heads), params[f"{prefix}.W_O"])


def layer_forward(
    p: Tensor,
    q: Tensor,
    inc: Incidence,
    params: Params,
    layer: int = 0,
    slope: float = 0.2,
    attention: bool = True,
    need_edges: bool = True,
) -> tuple[Tensor, Tensor | None]:
    pre = f"enc.{layer}"
    agg_v = aggregate(p, q, inc, "ev", params, f"{pre}.ev", slope, attention)
    p_new = C.relu(C.add(C.matmul(agg_v, params[f"{pre}.theta_v"]), C.matmul(p, params[f"{pre}.phi_v"])))
    if not need_edges:
        return p_new, None
    agg_e = aggregate(q, p, inc, "ve", params, f"{pre}.ve", slope, attention)
    q_new = C.relu(C.add(C.matmul(agg_e, params[f"{pre}.theta_e"]), C.matmul(q, params[f"{pre}.phi_e"])))
    return p_new, q_new


def pool_edges(z: Tensor, inc: Incidence) -> Tensor:
    """Mean of member rows of ``z`` per hyperedge."""
    return C.row_mean_pool_by_segments(z, inc.nodes, inc.edges, inc.n_edges)


def encode(view: HypergraphView, params: Params, cfg: EncoderConfig) -> tuple[Tensor, Tensor]:
    """Node embeddings ``Z`` and hyperedge embeddings ``Y`` for one view.

    ``Y`` pools ``Z`` over each edge's members (``cfg.edge_repr == "z"``),
    pools the projected embeddings (``"z_proj"``), or is the encoder's final
    hyperedge state (``"q"``).
    """
    inc = Incidence.from_matrix(view.incidence)
    p, q = init_states(view)
    for layer in range(cfg.layers):
        last = layer == cfg.layers - 1
        p, q = layer_forward(
            p, q, inc, params, layer, cfg.leaky_slope, cfg.attention,
            need_edges=not last or cfg.edge_repr == "q",
        )
    if cfg.edge_repr == "q":
        return p, q
    if cfg.edge_repr == "z_proj":
        return p, pool_edges(project(p, params), inc)
    return p, pool_edges(p, inc)


def _mlp(x: Tensor, params: Params, prefix: str) -> Tensor:
    hidden = C.relu(C.add(C.matmul(x, params[f"{prefix}.W1"]), params[f"{prefix}.b1"]))
    return C.add(C.matmul(hidden, params[f"{prefix}.W2"]), params[f"{prefix}.b2"])


def project(z: Tensor, params: Params) -> Tensor:
    return _mlp(z, params, "proj")


def score_edges(y: Tensor, params: Params) -> Tensor:
    """One pre-sigmoid logit per row of ``y``, shape ``(rows, 1)``."""
    return _mlp(y, params, "score")

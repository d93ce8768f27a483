"""k-means and the two-stage training driver, with ablation switches.

Stage 1 trains the encoder, projection head and edge scorer on the
contrastive objective. Stage 2 fixes k-means centroids computed from the
stage-1 embeddings and keeps training every parameter on the contrastive
objective plus the pseudo-label clustering loss.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np

from . import compute as C
from . import objectives as O
from .augment import HypergraphView, generate_negative_hyperedges, make_view
from .core import Hypergraph
from .encoder import EncoderConfig, Incidence, Params, encode, init_params, pool_edges, project, score_edges

__all__ = [
    "ABLATIONS",
    "ClusterState",
    "TrainConfig",
    "RunResult",
    "TrainingError",
    "kmeans",
    "kmeans_seed",
    "encoder_config",
    "representation_loss",
    "train_stage1",
    "train_stage2",
    "run_cahc",
]

log = logging.getLogger(__name__)

ABLATIONS = ("re", "hy", "no", "cl", "mu")
NORM_EPS = 1e-12


class TrainingError(FloatingPointError):
    """Training produced a non-finite loss or gradient."""


@dataclass
class ClusterState:
    centroids: np.ndarray
    assignments: np.ndarray
    inertia: float
    iterations: int


def _kmeans_pp(z: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = z.shape[0]
    centers = [z[rng.integers(n)]]
    d2 = np.sum((z - centers[0]) ** 2, axis=1)
    for _ in range(1, k):
        total = d2.sum()
        idx = rng.choice(n, p=d2 / total) if total > 0 else rng.integers(n)
        centers.append(z[idx])
        d2 = np.minimum(d2, np.sum((z - z[idx]) ** 2, axis=1))
    return np.array(centers)


def _sq_dists(z: np.ndarray, c: np.ndarray) -> np.ndarray:
    diff = z[:, None, :] - c[None, :, :]
    return np.einsum("nkd,nkd->nk", diff, diff)


def _lloyd(z, centers, max_iter) -> ClusterState:
    k = centers.shape[0]
    assign = np.full(z.shape[0], -1)
    it = 0
    for it in range(1, max_iter + 1):
        d2 = _sq_dists(z, centers)
        new = np.argmin(d2, axis=1)
        if np.array_equal(new, assign):
            it -= 1
            break
        assign = new
        counts = np.bincount(assign, minlength=k)
        for c in np.flatnonzero(counts == 0):
            # Reseed an empty cluster at the point farthest from its centroid.
            far = int(np.argmax(d2[np.arange(z.shape[0]), assign]))
            assign[far] = c
            d2[far] = 0.0
            counts = np.bincount(assign, minlength=k)
        centers = np.array([z[assign == c].mean(axis=0) for c in range(k)])
    d2 = _sq_dists(z, centers)
    assign = np.argmin(d2, axis=1)
    inertia = float(d2[np.arange(z.shape[0]), assign].sum())
    return ClusterState(centers, assign, inertia, it)


def kmeans(z, k: int, seed: int = 0, max_iter: int = 300, restarts: int = 10) -> ClusterState:
    """k-means++ seeding followed by Lloyd iterations; best of ``restarts``."""
    z = np.asarray(z, dtype=np.float64)
    n = z.shape[0]
    with np.errstate(over="ignore"):
        if not (np.all(np.isfinite(z)) and np.isfinite(np.einsum("ij,ij->", z, z))):
            raise ValueError("k-means input contains non-finite values or overflows")
    if k < 1:
        raise ValueError("k must be >= 1")
    if k > n:
        raise ValueError(f"k={k} exceeds the number of points {n}")
    rng = np.random.default_rng(seed)
    best = None
    for _ in range(max(restarts, 1)):
        state = _lloyd(z, _kmeans_pp(z, k, rng), max_iter)
        if best is None or state.inertia < best.inertia:
            best = state
    return best


@dataclass
class TrainConfig:
    k: int | None = None
    t1: int = 100
    t2: int = 50
    lr: float = 1e-3
    ass_lr: float = 1e-3
    weight_decay: float = 0.0
    seed: int = 0
    refresh_period: int = 0
    ablate: tuple[str, ...] = ()
    hyper_on: str = "views"
    p_f: float = 0.2
    p_m: float = 0.2
    neg_replacements: int = 1
    neg_source: str = "original"
    tau_n: float = 0.5
    tau_c: float = 0.5
    w_hyper: float = 1.0
    w_node: float = 1.0
    w_clus: float = 1.0
    layers: int = 1
    heads: int = 4
    head_dim: int = 128
    embedding_dim: int | None = None
    leaky_slope: float = 0.2
    edge_repr: str = "z"
    kmeans_restarts: int = 10

    def __post_init__(self):
        self.ablate = tuple(sorted(set(self.ablate)))
        bad = set(self.ablate) - set(ABLATIONS)
        if bad:
            raise ValueError(f"unknown ablation(s) {sorted(bad)}; choose from {ABLATIONS}")
        if self.t1 < 0 or self.t2 < 0:
            raise ValueError("epoch counts must be non-negative")
        if self.lr <= 0 or self.ass_lr <= 0:
            raise ValueError("learning rates must be positive")
        if self.weight_decay < 0 or self.refresh_period < 0:
            raise ValueError("weight_decay and refresh_period must be non-negative")
        if self.hyper_on not in ("views", "original"):
            raise ValueError("hyper_on must be 'views' or 'original'")
        if self.neg_source not in ("original", "view"):
            raise ValueError("neg_source must be 'original' or 'view'")
        # Delegate range checks to the owning config objects.
        self.weights
        self.temperatures

    @property
    def weights(self) -> O.LossWeights:
        return O.LossWeights(
            0.0 if "hy" in self.ablate else self.w_hyper,
            0.0 if "no" in self.ablate else self.w_node,
            self.w_clus,
        )

    @property
    def temperatures(self) -> O.Temperatures:
        return O.Temperatures(self.tau_n, self.tau_c)


def encoder_config(h: Hypergraph, cfg: TrainConfig) -> EncoderConfig:
    return EncoderConfig(
        in_dim=h.feature_dim,
        layers=cfg.layers,
        heads=cfg.heads,
        head_dim=cfg.head_dim,
        out_dim=cfg.embedding_dim,
        leaky_slope=cfg.leaky_slope,
        attention="mu" not in cfg.ablate,
        edge_repr=cfg.edge_repr,
    )


@dataclass
class RunResult:
    assignments: np.ndarray
    z_final: np.ndarray
    z_init: np.ndarray
    stage1_trace: list[dict] = field(default_factory=list)
    stage2_trace: list[dict] = field(default_factory=list)
    centroids: np.ndarray | None = None
    params: Params | None = None


def _hyper_term(z, y, negs: Incidence, params: Params, enc: EncoderConfig):
    pooled = project(z, params) if enc.edge_repr == "z_proj" else z
    pos = score_edges(y, params)
    neg = score_edges(pool_edges(pooled, negs), params)
    return O.hyperedge_loss(pos, neg)


def representation_loss(
    h: Hypergraph,
    params: Params,
    enc: EncoderConfig,
    cfg: TrainConfig,
    rng: np.random.Generator,
    original: tuple | None = None,
):
    """Contrastive loss on two fresh views. Returns ``(loss, parts)``.

    ``original`` optionally carries an already computed ``(Z, Y)`` of the
    un-augmented hypergraph, reused when ``cfg.hyper_on == "original"``.
    """
    w = cfg.weights
    views = [make_view(h, cfg.p_f, cfg.p_m, rng, tag) for tag in ("view1", "view2")]
    if w.w_hyper > 0:
        neg_src = h if cfg.neg_source == "original" else Hypergraph(views[0].incidence, h.features)
        negs = Incidence.from_sets(generate_negative_hyperedges(neg_src, rng, cfg.neg_replacements), h.n_nodes)
    need_views = w.w_node > 0 or (w.w_hyper > 0 and cfg.hyper_on == "views")
    encoded = [encode(v, params, enc) for v in views] if need_views else []
    parts = {}
    terms = []
    if w.w_hyper > 0:
        if cfg.hyper_on == "views":
            l_h = C.scale(
                C.add(*[_hyper_term(z, y, negs, params, enc) for z, y in encoded]), 0.5
            )
        else:
            z, y = original if original is not None else encode(HypergraphView.of(h), params, enc)
            l_h = _hyper_term(z, y, negs, params, enc)
        parts["hyper"] = l_h.item()
        terms.append(C.scale(l_h, w.w_hyper))
    if w.w_node > 0:
        (z1, _), (z2, _) = encoded
        l_n = O.node_loss(project(z1, params), project(z2, params), cfg.tau_n, eps=NORM_EPS)
        parts["node"] = l_n.item()
        terms.append(C.scale(l_n, w.w_node))
    if not terms:
        return C.tensor(0.0), {"hyper": 0.0, "node": 0.0}
    loss = terms[0] if len(terms) == 1 else C.add(*terms)
    return loss, parts


def _step(loss, params: Params, opt: C.AdamState, stage: str, epoch: int) -> None:
    value = loss.item()
    if not np.isfinite(value):
        raise TrainingError(f"{stage} epoch {epoch}: non-finite loss {value}")
    tensors = list(params.values())
    C.zero_grad(tensors)
    C.backward(loss)
    try:
        C.adam_step(tensors, opt)
    except C.NonFiniteGradientError as exc:
        raise TrainingError(f"{stage} epoch {epoch}: {exc}") from None


def _embed(h: Hypergraph, params: Params, enc: EncoderConfig):
    return encode(HypergraphView.of(h), params, enc)


def _checked(z: np.ndarray, stage: str) -> np.ndarray:
    with np.errstate(over="ignore"):
        # squared norms must fit too, or k-means distances overflow
        ok = np.all(np.isfinite(z)) and np.isfinite(np.einsum("ij,ij->", z, z))
    if not ok:
        raise TrainingError(f"{stage}: embeddings are non-finite or overflow")
    return z


def _rngs(seed: int):
    """Independent streams: init seed, stage-1 rng, stage-2 rng, k-means seed."""
    init_seq, s1, s2, km = np.random.SeedSequence(seed).spawn(4)
    return (
        int(init_seq.generate_state(1)[0]),
        np.random.default_rng(s1),
        np.random.default_rng(s2),
        int(km.generate_state(1)[0]),
    )


def kmeans_seed(seed: int) -> int:
    """The k-means seed a run with ``seed`` uses on its embeddings."""
    return _rngs(seed)[3]


def train_stage1(h: Hypergraph, cfg: TrainConfig, params: Params | None = None):
    """Representation learning. Returns ``(params, Z_init, trace)``."""
    enc = encoder_config(h, cfg)
    init_seed, rng, _, _ = _rngs(cfg.seed)
    if params is None:
        params = init_params(enc, init_seed)
    trace = []
    if "re" not in cfg.ablate:
        opt = C.AdamState(lr=cfg.lr, weight_decay=cfg.weight_decay)
        for epoch in range(1, cfg.t1 + 1):
            loss, parts = representation_loss(h, params, enc, cfg, rng)
            _step(loss, params, opt, "stage1", epoch)
            trace.append({"stage": 1, "epoch": epoch, "loss": loss.item(), **parts})
            log.debug("stage1 epoch %d loss %.6f", epoch, loss.item())
    z_init = _checked(_embed(h, params, enc)[0].value.copy(), "stage1")
    return params, z_init, trace


def train_stage2(h: Hypergraph, params: Params, z_init: np.ndarray, cfg: TrainConfig):
    """Joint embedding / cluster-assignment learning.

    Returns ``(params, assignments, Z_final, centroids, trace)``.
    """
    k = cfg.k if cfg.k is not None else h.k_classes
    if not k:
        raise ValueError("number of clusters k is not set")
    enc = encoder_config(h, cfg)
    _, _, rng, km_seed = _rngs(cfg.seed)
    state = kmeans(z_init, k, seed=km_seed, restarts=cfg.kmeans_restarts)
    if cfg.t2 == 0:
        return params, state.assignments, z_init.copy(), state.centroids, []
    centroids = state.centroids
    opt = C.AdamState(lr=cfg.ass_lr, weight_decay=cfg.weight_decay)
    w = cfg.weights
    trace = []
    for epoch in range(1, cfg.t2 + 1):
        original = _embed(h, params, enc)
        z = original[0]
        rep, parts = representation_loss(h, params, enc, cfg, rng, original)
        mu = O.soft_assign(z, centroids, cfg.tau_c, eps=NORM_EPS)
        labels = O.pseudo_labels(mu)
        clus = O.clustering_loss(mu, labels)
        loss = O.total_loss(rep, clus, w) if w.w_clus > 0 else rep
        _step(loss, params, opt, "stage2", epoch)
        trace.append({"stage": 2, "epoch": epoch, "loss": loss.item(), **parts, "clus": clus.item()})
        log.debug("stage2 epoch %d loss %.6f", epoch, loss.item())
        if cfg.refresh_period and epoch % cfg.refresh_period == 0:
            z_now = _embed(h, params, enc)[0].value
            centroids = kmeans(z_now, k, seed=km_seed + epoch, restarts=cfg.kmeans_restarts).centroids
    z_final = _checked(_embed(h, params, enc)[0].value.copy(), "stage2")
    mu = O.soft_assign(z_final, centroids, cfg.tau_c, eps=NORM_EPS)
    return params, O.pseudo_labels(mu), z_final, centroids, trace


def run_cahc(h: Hypergraph, cfg: TrainConfig) -> RunResult:
    """Full pipeline honoring ``cfg.ablate``.

    ``re`` skips stage 1, ``hy``/``no`` zero the hyperedge/node loss, ``cl``
    replaces stage 2 by k-means on the stage-1 embeddings and ``mu`` swaps
    attention for uniform mean aggregation.
    """
    params, z_init, trace1 = train_stage1(h, cfg)
    stage2_cfg = replace(cfg, t2=0) if "cl" in cfg.ablate else cfg
    params, assign, z_final, centroids, trace2 = train_stage2(h, params, z_init, stage2_cfg)
    return RunResult(assign, z_final, z_init, trace1, trace2, centroids, params)

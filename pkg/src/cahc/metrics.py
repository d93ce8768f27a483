"""Clustering quality metrics.

Accuracy and macro-F1 first align predicted cluster ids to classes with an
optimal one-to-one matching (Hungarian algorithm). NMI uses the arithmetic
mean of the two label entropies as normalizer.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

__all__ = [
    "hungarian",
    "contingency",
    "align_labels",
    "accuracy",
    "f1_macro",
    "nmi",
    "ari",
    "silhouette",
    "MetricsReport",
    "evaluate",
]


def hungarian(cost) -> np.ndarray:
    """Minimum-cost perfect matching on a square matrix.

    Returns ``perm`` with row ``i`` assigned to column ``perm[i]``. Shortest
    augmenting path with dual potentials, O(n^3).
    """
    a = np.asarray(cost, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"cost matrix must be square, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError("cost matrix has non-finite entries")
    n = a.shape[0]
    # 1-based arrays; index 0 is the virtual root column.
    u = np.zeros(n + 1)
    v = np.zeros(n + 1)
    match = np.zeros(n + 1, dtype=np.intp)  # match[col] = row
    way = np.zeros(n + 1, dtype=np.intp)
    for row in range(1, n + 1):
        match[0] = row
        col0 = 0
        minv = np.full(n + 1, np.inf)
        used = np.zeros(n + 1, dtype=bool)
        while True:
            used[col0] = True
            i0 = match[col0]
            free = ~used[1:]
            cur = a[i0 - 1] - u[i0] - v[1:]
            better = free & (cur < minv[1:])
            minv[1:][better] = cur[better]
            way[1:][better] = col0
            cand = np.where(free, minv[1:], np.inf)
            col1 = int(np.argmin(cand)) + 1
            delta = cand[col1 - 1]
            u[match[used]] += delta
            v[used] -= delta
            minv[1:][free] -= delta
            col0 = col1
            if match[col0] == 0:
                break
        while col0:
            col1 = way[col0]
            match[col0] = match[col1]
            col0 = col1
    perm = np.empty(n, dtype=np.intp)
    perm[match[1:] - 1] = np.arange(n)
    return perm


def _compact(labels) -> tuple[np.ndarray, int]:
    values, inverse = np.unique(np.asarray(labels), return_inverse=True)
    return inverse.reshape(-1), values.size


def _pair(pred, true) -> tuple[np.ndarray, int, np.ndarray, int]:
    pred, true = np.asarray(pred), np.asarray(true)
    if pred.shape != true.shape or pred.ndim != 1:
        raise ValueError(f"label vectors differ in shape: {pred.shape} vs {true.shape}")
    if pred.size == 0:
        raise ValueError("empty label vectors")
    p, kp = _compact(pred)
    t, kt = _compact(true)
    return p, kp, t, kt


def contingency(pred, true) -> np.ndarray:
    """``table[p, t]`` = number of items in cluster p and class t (ids compacted)."""
    p, kp, t, kt = _pair(pred, true)
    table = np.zeros((kp, kt), dtype=np.int64)
    np.add.at(table, (p, t), 1)
    return table


def align_labels(pred, true) -> np.ndarray:
    """Map every predicted id onto a class index so matched mass is maximal.

    Returns the relabeled prediction in the compacted class index space;
    clusters left without a real class get ids ``>= n_classes``. Ties in
    matched mass are broken by the summed per-pair F1, so the result does
    not depend on how the clusters happen to be numbered.
    """
    p, kp, t, kt = _pair(pred, true)
    k = max(kp, kt)
    table = np.zeros((k, k), dtype=np.int64)
    np.add.at(table, (p, t), 1)
    sizes = table.sum(axis=1)[:, None] + table.sum(axis=0)[None, :]
    pair_f1 = np.divide(2.0 * table, sizes, out=np.zeros((k, k)), where=table > 0)
    # integer counts dominate: the F1 sum over a matching is at most k
    perm = hungarian(-(table * (k + 1.0) + pair_f1))
    return perm[p]


def accuracy(pred, true) -> float:
    _, _, t, _ = _pair(pred, true)
    mapped = align_labels(pred, true)
    return float(np.mean(mapped == t))


def f1_macro(pred, true) -> float:
    """Unweighted mean of per-class F1 after alignment.

    Averaged over ``max(#clusters, #classes)`` labels; a label with no true
    members (or no predictions) scores 0.
    """
    _, kp, t, kt = _pair(pred, true)
    mapped = align_labels(pred, true)
    k = max(kp, kt)
    scores = []
    for c in range(k):
        tp = np.sum((mapped == c) & (t == c))
        n_pred = np.sum(mapped == c)
        n_true = np.sum(t == c)
        scores.append(0.0 if tp == 0 else 2.0 * tp / (n_pred + n_true))
    return float(np.mean(scores))


def _entropy(counts: np.ndarray) -> float:
    p = counts[counts > 0] / counts.sum()
    return float(-np.sum(p * np.log(p)))


def nmi(pred, true) -> float:
    table = contingency(pred, true).astype(np.float64)
    n = table.sum()
    h_p = _entropy(table.sum(axis=1))
    h_t = _entropy(table.sum(axis=0))
    if h_p == 0.0 and h_t == 0.0:
        return 1.0
    pij = table / n
    outer = np.outer(table.sum(axis=1), table.sum(axis=0)) / (n * n)
    nz = pij > 0
    mi = float(np.sum(pij[nz] * np.log(pij[nz] / outer[nz])))
    denom = 0.5 * (h_p + h_t)
    return float(min(max(mi / denom, 0.0), 1.0))


def _comb2(x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    return x * (x - 1.0) / 2.0


def ari(pred, true) -> float:
    table = contingency(pred, true)
    n = table.sum()
    index = _comb2(table).sum()
    a = _comb2(table.sum(axis=1)).sum()
    b = _comb2(table.sum(axis=0)).sum()
    total = _comb2(n)
    expected = a * b / total if total else 0.0
    max_index = 0.5 * (a + b)
    if max_index == expected:
        return 1.0
    return float((index - expected) / (max_index - expected))


def silhouette(z, labels) -> float:
    """Mean silhouette width with Euclidean distance; singletons score 0."""
    z = np.asarray(z, dtype=np.float64)
    lab, k = _compact(labels)
    if z.ndim != 2 or z.shape[0] != lab.size:
        raise ValueError("embedding rows and labels differ in length")
    if k < 2:
        raise ValueError("silhouette needs at least 2 clusters")
    sq = np.sum(z * z, axis=1)
    dist = np.sqrt(np.maximum(sq[:, None] + sq[None, :] - 2.0 * z @ z.T, 0.0))
    np.fill_diagonal(dist, 0.0)
    onehot = np.eye(k)[lab]
    sizes = onehot.sum(axis=0)
    sums = dist @ onehot  # (N, K) total distance to each cluster
    own = sizes[lab]
    a = np.where(own > 1, sums[np.arange(lab.size), lab] / np.maximum(own - 1, 1), 0.0)
    other = sums / sizes
    other[np.arange(lab.size), lab] = np.inf
    b = other.min(axis=1)
    s = np.where(own > 1, (b - a) / np.maximum(np.maximum(a, b), 1e-300), 0.0)
    return float(np.mean(s))


@dataclass
class MetricsReport:
    acc: float
    f1_macro: float
    nmi: float
    ari: float
    silhouette: float | None
    n: int
    k_true: int
    k_pred: int
    seed: int | None = None

    def to_dict(self) -> dict:
        return asdict(self)


def evaluate(pred, true, z=None, seed: int | None = None) -> MetricsReport:
    pred, true = np.asarray(pred), np.asarray(true)
    k_pred = int(np.unique(pred).size)
    sil = None
    if z is not None and 2 <= k_pred < pred.size:
        sil = silhouette(z, pred)
    return MetricsReport(
        acc=accuracy(pred, true),
        f1_macro=f1_macro(pred, true),
        nmi=nmi(pred, true),
        ari=ari(pred, true),
        silhouette=sil,
        n=int(pred.size),
        k_true=int(np.unique(true).size),
        k_pred=k_pred,
        seed=seed,
    )

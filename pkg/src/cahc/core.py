"""Hypergraph data model, preprocessing and file I/O.

File formats
------------
edges
    UTF-8 text, one hyperedge per line, whitespace-separated 0-based node ids.
    Blank lines and lines starting with ``#`` are ignored.
features
    CSV without header, one row per node, ``.`` as decimal separator.
labels
    One integer per line.
embeddings
    First line ``N D``, then N lines of D space-separated values written
    with 17 significant digits (enough for an exact float64 round trip).
"""

from __future__ import annotations

import os
import tempfile
from dataclasses import dataclass
from pathlib import Path

import numpy as np

__all__ = [
    "Hypergraph",
    "HypergraphError",
    "ParseError",
    "load_hypergraph",
    "remove_isolated_nodes",
    "write_hypergraph",
    "write_embeddings",
    "read_embeddings",
    "atomic_write_text",
]


class HypergraphError(ValueError):
    """Structural problem with a hypergraph or embedding matrix."""


class ParseError(HypergraphError):
    def __init__(self, path, line_no: int, message: str):
        super().__init__(f"{path}:{line_no}: {message}")
        self.path = path
        self.line_no = line_no


@dataclass(frozen=True, eq=False)
class Hypergraph:
    """Attributed hypergraph with binary incidence.

    ``incidence[i, j] == 1`` iff node ``i`` belongs to hyperedge ``j``.
    Labels are ground truth used only for evaluation.
    """

    incidence: np.ndarray
    features: np.ndarray
    labels: np.ndarray | None = None
    k_classes: int | None = None

    def __post_init__(self):
        inc = np.asarray(self.incidence)
        if inc.ndim != 2:
            raise HypergraphError(f"incidence must be 2-D, got shape {inc.shape}")
        if not np.all((inc == 0) | (inc == 1)):
            raise HypergraphError("incidence must be binary")
        inc = inc.astype(np.int8)
        feats = np.asarray(self.features, dtype=np.float64)
        if feats.ndim != 2 or feats.shape[0] != inc.shape[0]:
            raise HypergraphError(
                f"features shape {feats.shape} does not match {inc.shape[0]} nodes"
            )
        empty = np.flatnonzero(inc.sum(axis=0) == 0)
        if empty.size:
            raise HypergraphError(f"hyperedge {int(empty[0])} has no members")
        labels = self.labels
        k = self.k_classes
        if labels is not None:
            labels = np.asarray(labels, dtype=np.int64)
            if labels.shape != (inc.shape[0],):
                raise HypergraphError(f"labels length {labels.shape} != {inc.shape[0]} nodes")
            if labels.size and labels.min() < 0:
                raise HypergraphError("labels must be non-negative")
            if k is None:
                k = int(labels.max()) + 1 if labels.size else 0
            elif labels.size and labels.max() >= k:
                raise HypergraphError(f"label {int(labels.max())} outside [0, {k})")
        object.__setattr__(self, "incidence", inc)
        object.__setattr__(self, "features", feats)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "k_classes", k)

    @property
    def n_nodes(self) -> int:
        return self.incidence.shape[0]

    @property
    def n_edges(self) -> int:
        return self.incidence.shape[1]

    @property
    def feature_dim(self) -> int:
        return self.features.shape[1]

    def pairs(self) -> tuple[np.ndarray, np.ndarray]:
        """(node ids, edge ids) of every incidence, sorted by edge then node."""
        edges, nodes = np.nonzero(self.incidence.T)
        return nodes, edges

    def edge_members(self) -> list[np.ndarray]:
        return [np.flatnonzero(self.incidence[:, j]) for j in range(self.n_edges)]

    def __repr__(self) -> str:
        return (
            f"Hypergraph(N={self.n_nodes}, M={self.n_edges}, d={self.feature_dim}, "
            f"k={self.k_classes})"
        )


def _read_edges(path) -> list[list[int]]:
    edges = []
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            text = line.strip()
            if text.startswith("#"):
                continue
            if not text:
                raise ParseError(path, line_no, "empty hyperedge")
            try:
                ids = [int(tok) for tok in text.split()]
            except ValueError as exc:
                raise ParseError(path, line_no, f"bad node id ({exc})") from None
            if min(ids) < 0:
                raise ParseError(path, line_no, "negative node id")
            edges.append(sorted(set(ids)))
    return edges


def _read_labels(path) -> np.ndarray:
    out = []
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            text = line.strip()
            if not text:
                continue
            try:
                out.append(int(text))
            except ValueError:
                raise ParseError(path, line_no, f"bad label {text!r}") from None
    return np.asarray(out, dtype=np.int64)


def _read_features(path) -> np.ndarray:
    rows = []
    width = None
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            text = line.strip()
            if not text:
                continue
            try:
                row = [float(tok) for tok in text.split(",")]
            except ValueError as exc:
                raise ParseError(path, line_no, f"bad feature value ({exc})") from None
            if width is None:
                width = len(row)
            elif len(row) != width:
                raise ParseError(path, line_no, f"expected {width} columns, got {len(row)}")
            rows.append(row)
    if not rows:
        raise HypergraphError(f"{path}: no feature rows")
    return np.asarray(rows, dtype=np.float64)


def load_hypergraph(
    edge_list_path, features_path, labels_path=None, k_classes: int | None = None
) -> Hypergraph:
    """Read a hypergraph from disk. Isolated nodes are kept; see
    :func:`remove_isolated_nodes`."""
    edges = _read_edges(edge_list_path)
    feats = _read_features(features_path)
    n = feats.shape[0]
    inc = np.zeros((n, len(edges)), dtype=np.int8)
    for j, members in enumerate(edges):
        if members[-1] >= n:
            raise IndexError(
                f"{edge_list_path}: hyperedge {j} references node {members[-1]} but only {n} nodes exist"
            )
        inc[members, j] = 1
    labels = _read_labels(labels_path) if labels_path is not None else None
    return Hypergraph(inc, feats, labels, k_classes)


def remove_isolated_nodes(h: Hypergraph) -> Hypergraph:
    keep = h.incidence.sum(axis=1) > 0
    if not keep.any():
        raise HypergraphError("every node is isolated")
    if keep.all():
        return h
    inc = h.incidence[keep]
    inc = inc[:, inc.sum(axis=0) > 0]
    labels = h.labels[keep] if h.labels is not None else None
    return Hypergraph(inc, h.features[keep], labels, h.k_classes)


def atomic_write_text(path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_hypergraph(h: Hypergraph, directory, stem: str = "") -> dict[str, Path]:
    """Write ``edges.txt``, ``features.csv`` and (if present) ``labels.txt``."""
    directory = Path(directory)
    paths = {
        "edges": directory / f"{stem}edges.txt",
        "features": directory / f"{stem}features.csv",
    }
    atomic_write_text(
        paths["edges"], "".join(" ".join(map(str, m)) + "\n" for m in h.edge_members())
    )
    atomic_write_text(
        paths["features"],
        "".join(",".join(repr(float(v)) for v in row) + "\n" for row in h.features),
    )
    if h.labels is not None:
        paths["labels"] = directory / f"{stem}labels.txt"
        atomic_write_text(paths["labels"], "".join(f"{int(v)}\n" for v in h.labels))
    return paths


def _check_embedding(z: np.ndarray) -> np.ndarray:
    z = np.asarray(z, dtype=np.float64)
    if z.ndim != 2 or z.shape[0] == 0 or z.shape[1] == 0:
        raise HypergraphError(f"embedding matrix must be non-empty 2-D, got shape {z.shape}")
    if not np.all(np.isfinite(z)):
        raise HypergraphError("embedding matrix has non-finite entries")
    return z


def write_embeddings(z, path) -> None:
    z = _check_embedding(z)
    lines = [f"{z.shape[0]} {z.shape[1]}"]
    lines += [" ".join(f"{v:.17g}" for v in row) for row in z]
    atomic_write_text(path, "\n".join(lines) + "\n")


def read_embeddings(path) -> np.ndarray:
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().split()
        if len(header) != 2:
            raise ParseError(path, 1, "expected header 'N D'")
        n, d = int(header[0]), int(header[1])
        rows = [line.split() for line in fh if line.strip()]
    if len(rows) != n:
        raise HypergraphError(f"{path}: header says {n} rows, found {len(rows)}")
    for i, row in enumerate(rows):
        if len(row) != d:
            raise ParseError(path, i + 2, f"header says {d} columns, found {len(row)}")
    return _check_embedding(np.array(rows, dtype=np.float64).reshape(n, d))

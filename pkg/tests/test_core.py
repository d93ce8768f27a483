import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cahc.core import (
    Hypergraph,
    HypergraphError,
    ParseError,
    load_hypergraph,
    read_embeddings,
    remove_isolated_nodes,
    write_embeddings,
    write_hypergraph,
)


def _write(tmp_path, edges, features, labels=None):
    (tmp_path / "e.txt").write_text(edges)
    (tmp_path / "f.csv").write_text(features)
    lab = None
    if labels is not None:
        (tmp_path / "l.txt").write_text(labels)
        lab = tmp_path / "l.txt"
    return tmp_path / "e.txt", tmp_path / "f.csv", lab


def test_load_small(tmp_path):
    e, f, l = _write(tmp_path, "0 1\n1 2\n", "1,0\n0,1\n0,0\n", "0\n1\n1\n")
    h = load_hypergraph(e, f, l)
    assert (h.n_nodes, h.n_edges) == (3, 2)
    np.testing.assert_array_equal(h.incidence, [[1, 0], [1, 1], [0, 1]])
    assert h.k_classes == 2


def test_load_dedups_members(tmp_path):
    e, f, _ = _write(tmp_path, "0 0 1\n", "1\n2\n")
    h = load_hypergraph(e, f)
    assert h.incidence[:, 0].sum() == 2


def test_load_skips_comments(tmp_path):
    e, f, _ = _write(tmp_path, "# header\n0 1\n", "1\n2\n")
    assert load_hypergraph(e, f).n_edges == 1


def test_malformed_line_reports_line_number(tmp_path):
    e, f, _ = _write(tmp_path, "0 1\n0 x\n", "1\n2\n")
    with pytest.raises(ParseError, match=":2:"):
        load_hypergraph(e, f)


def test_out_of_range_node(tmp_path):
    e, f, _ = _write(tmp_path, "0 5\n", "1\n2\n")
    with pytest.raises(IndexError):
        load_hypergraph(e, f)


def test_empty_edge_line(tmp_path):
    e, f, _ = _write(tmp_path, "0 1\n\n", "1\n2\n")
    with pytest.raises(ParseError, match="empty hyperedge"):
        load_hypergraph(e, f)


def test_rejects_empty_column_and_bad_labels():
    with pytest.raises(HypergraphError):
        Hypergraph(np.array([[1, 0], [1, 0]]), np.zeros((2, 1)))
    with pytest.raises(HypergraphError):
        Hypergraph(np.array([[1], [1]]), np.zeros((2, 1)), np.array([0, 3]), 2)


def test_remove_isolated_small():
    inc = np.array([[1, 0], [1, 1], [0, 0]])
    feats = np.arange(6.0).reshape(3, 2)
    h = remove_isolated_nodes(Hypergraph(inc, feats, np.array([0, 1, 2])))
    assert h.n_nodes == 2
    np.testing.assert_array_equal(h.features, feats[:2])
    np.testing.assert_array_equal(h.labels, [0, 1])


def test_remove_isolated_identity(small_graph):
    assert remove_isolated_nodes(small_graph) is small_graph


def test_remove_isolated_random_scan(rng):
    inc = np.zeros((10, 4), dtype=np.int8)
    active = rng.choice(10, size=7, replace=False)
    for j in range(4):
        inc[rng.choice(active, size=3, replace=False), j] = 1
    for i in active:
        if inc[i].sum() == 0:
            inc[i, 0] = 1
    h = remove_isolated_nodes(Hypergraph(inc, rng.normal(size=(10, 3))))
    assert h.n_nodes == 7
    assert all(h.incidence[i].sum() >= 1 for i in range(h.n_nodes))


def test_all_isolated_is_error():
    h = Hypergraph(np.zeros((3, 0)), np.zeros((3, 1)))
    with pytest.raises(HypergraphError):
        remove_isolated_nodes(h)


@st.composite
def _graphs(draw):
    n = draw(st.integers(2, 10))
    m = draw(st.integers(1, 6))
    cols = [draw(st.sets(st.integers(0, n - 1), min_size=1, max_size=n)) for _ in range(m)]
    inc = np.zeros((n, m), dtype=np.int8)
    for j, c in enumerate(cols):
        inc[list(c), j] = 1
    return Hypergraph(inc, np.arange(n * 2, dtype=float).reshape(n, 2))


@settings(max_examples=50, deadline=None)
@given(_graphs())
def test_removal_idempotent_and_preserves_comembership(h):
    once = remove_isolated_nodes(h)
    twice = remove_isolated_nodes(once)
    np.testing.assert_array_equal(once.incidence, twice.incidence)
    assert once.incidence.sum(axis=1).min() >= 1
    assert once.incidence.sum(axis=0).min() >= 1
    # features row 2i identify the original node i
    kept = (once.features[:, 0] / 2).astype(int)
    for a in range(once.n_nodes):
        for b in range(once.n_nodes):
            before = np.any(h.incidence[kept[a]] & h.incidence[kept[b]])
            after = np.any(once.incidence[a] & once.incidence[b])
            assert before == after


def test_embedding_round_trip(tmp_path, rng):
    z = rng.normal(size=(4, 3)) * 1e3
    write_embeddings(z, tmp_path / "z.txt")
    back = read_embeddings(tmp_path / "z.txt")
    assert np.array_equal(back, z)


def test_embedding_scalar_and_degenerate(tmp_path):
    write_embeddings(np.array([[2.5]]), tmp_path / "z.txt")
    assert read_embeddings(tmp_path / "z.txt")[0, 0] == 2.5
    with pytest.raises(HypergraphError):
        write_embeddings(np.zeros((0, 0)), tmp_path / "bad.txt")


def test_embedding_header_mismatch(tmp_path):
    (tmp_path / "z.txt").write_text("2 2\n1 2\n")
    with pytest.raises(HypergraphError):
        read_embeddings(tmp_path / "z.txt")


def test_hypergraph_file_round_trip(tmp_path, small_graph):
    paths = write_hypergraph(small_graph, tmp_path)
    back = load_hypergraph(paths["edges"], paths["features"], paths["labels"])
    np.testing.assert_array_equal(back.incidence, small_graph.incidence)
    assert np.array_equal(back.features, small_graph.features)
    np.testing.assert_array_equal(back.labels, small_graph.labels)

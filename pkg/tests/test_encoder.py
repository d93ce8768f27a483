import numpy as np
import pytest

from cahc import compute as C
from cahc.augment import HypergraphView
from cahc.core import Hypergraph
from cahc.encoder import (
    EncoderConfig,
    Incidence,
    aggregate,
    attention_coefficients,
    encode,
    init_params,
    init_states,
    layer_forward,
    pool_edges,
    project,
    score_edges,
)

from .conftest import random_hypergraph


def _zero(params):
    for t in params.values():
        t.value[...] = 0.0


def _setup(seed=0, n=8, m=5, d=4, heads=2, head_dim=3):
    rng = np.random.default_rng(seed)
    h = random_hypergraph(rng, n=n, m=m, d=d)
    cfg = EncoderConfig(in_dim=d, heads=heads, head_dim=head_dim)
    return h, cfg, init_params(cfg, seed)


def _leaky(x, slope=0.2):
    return x if x > 0 else slope * x


def _oracle_alpha(P, Q, inc, params, prefix, head):
    """alpha[(i, j)] for node i attending over edge j, by explicit loops."""
    W_P = params[f"{prefix}.W_P{head}"].value
    W_Q = params[f"{prefix}.W_Q{head}"].value
    a = params[f"{prefix}.a{head}"].value[:, 0]
    alpha = {}
    for i in range(inc.shape[0]):
        js = [j for j in range(inc.shape[1]) if inc[i, j]]
        scores = [_leaky(a @ np.concatenate([P[i] @ W_P, Q[j] @ W_Q])) for j in js]
        ex = [np.exp(s) for s in scores]
        for j, e in zip(js, ex):
            alpha[(i, j)] = e / sum(ex)
    return alpha


def test_init_states_examples():
    x = np.array([[1.0, 0.0], [0.0, 1.0], [3.0, 3.0]])
    inc = np.array([[1, 0], [1, 0], [0, 1]])
    p0, q0 = init_states(HypergraphView(x, inc))
    assert np.array_equal(p0.value, x)
    np.testing.assert_array_equal(q0.value, [[0.5, 0.5], [3.0, 3.0]])


def test_init_states_loop_oracle(rng):
    h = random_hypergraph(rng, n=8, m=5, d=4)
    _, q0 = init_states(HypergraphView.of(h))
    for j in range(h.n_edges):
        members = [i for i in range(h.n_nodes) if h.incidence[i, j]]
        expect = sum(h.features[i] for i in members) / len(members)
        np.testing.assert_allclose(q0.value[j], expect, rtol=0, atol=1e-15)


def test_init_states_empty_column():
    with pytest.raises(ValueError, match="empty"):
        init_states(HypergraphView(np.ones((2, 1)), np.array([[1, 0], [1, 0]])))


def test_attention_single_incident_edge_is_one():
    h, cfg, params = _setup()
    inc = np.zeros((3, 2), dtype=np.int8)
    inc[[0, 1], 0] = 1
    inc[2, 1] = 1
    rng = np.random.default_rng(1)
    P, Q = C.tensor(rng.normal(size=(3, 4))), C.tensor(rng.normal(size=(2, 4)))
    alpha = attention_coefficients(P, Q, Incidence.from_matrix(inc), "ev", params, "enc.0.ev", 0)
    np.testing.assert_array_equal(alpha.value, 1.0)


def test_attention_zero_params_uniform(small_graph):
    cfg = EncoderConfig(in_dim=small_graph.feature_dim, heads=2, head_dim=3)
    params = init_params(cfg, 0)
    _zero(params)
    inc = Incidence.from_matrix(small_graph.incidence)
    p0, q0 = init_states(HypergraphView.of(small_graph))
    alpha = attention_coefficients(p0, q0, inc, "ev", params, "enc.0.ev", 1).value[:, 0]
    deg = small_graph.incidence.sum(axis=1)
    np.testing.assert_allclose(alpha, 1.0 / deg[inc.nodes], atol=1e-15)


@pytest.mark.parametrize("direction", ["ev", "ve"])
def test_attention_group_sums(direction):
    h, cfg, params = _setup(seed=3)
    inc = Incidence.from_matrix(h.incidence)
    p0, q0 = init_states(HypergraphView.of(h))
    queries, keys = (p0, q0) if direction == "ev" else (q0, p0)
    for head in range(cfg.heads):
        alpha = attention_coefficients(queries, keys, inc, direction, params, f"enc.0.{direction}", head)
        groups = inc.nodes if direction == "ev" else inc.edges
        sums = np.bincount(groups, weights=alpha.value[:, 0])
        np.testing.assert_allclose(sums, 1.0, rtol=0, atol=1e-12)


def test_attention_node_without_edges_errors():
    _, _, params = _setup()
    inc = Incidence.from_matrix(np.array([[1], [0]]))
    P = C.tensor(np.ones((2, 4)))
    Q = C.tensor(np.ones((1, 4)))
    with pytest.raises(ValueError, match="node 1"):
        attention_coefficients(P, Q, inc, "ev", params, "enc.0.ev", 0)


def test_attention_matches_loop_oracle():
    h, cfg, params = _setup(seed=5)
    inc = Incidence.from_matrix(h.incidence)
    p0, q0 = init_states(HypergraphView.of(h))
    for head in range(cfg.heads):
        alpha = attention_coefficients(p0, q0, inc, "ev", params, "enc.0.ev", head).value[:, 0]
        oracle = _oracle_alpha(p0.value, q0.value, h.incidence, params, "enc.0.ev", head)
        for k, (i, j) in enumerate(zip(inc.nodes, inc.edges)):
            assert alpha[k] == pytest.approx(oracle[(i, j)], abs=1e-12)


def test_aggregate_passthrough():
    cfg = EncoderConfig(in_dim=3, heads=1, head_dim=3)
    params = init_params(cfg, 0)
    params["enc.0.ev.W_Q0"].value[...] = np.eye(3)
    params["enc.0.ev.W_O"].value[...] = np.eye(3)
    inc = np.array([[1, 0], [0, 1], [0, 1]])
    rng = np.random.default_rng(0)
    P, Q = C.tensor(rng.normal(size=(3, 3))), C.tensor(rng.normal(size=(2, 3)))
    out = aggregate(P, Q, Incidence.from_matrix(inc), "ev", params, "enc.0.ev")
    np.testing.assert_allclose(out.value, Q.value[[0, 1, 1]], atol=1e-15)


def test_aggregate_uniform_is_mean():
    cfg = EncoderConfig(in_dim=2, heads=1, head_dim=2)
    params = init_params(cfg, 0)
    params["enc.0.ev.a0"].value[...] = 0.0
    inc = Incidence.from_matrix(np.array([[1, 1]]))
    Q = C.tensor(np.array([[1.0, 2.0], [3.0, -4.0]]))
    out = aggregate(C.tensor(np.ones((1, 2))), Q, inc, "ev", params, "enc.0.ev")
    W_Q, W_O = params["enc.0.ev.W_Q0"].value, params["enc.0.ev.W_O"].value
    np.testing.assert_allclose(out.value[0], (Q.value @ W_Q).mean(axis=0) @ W_O, atol=1e-14)


def test_aggregate_matches_loop_oracle():
    h, cfg, params = _setup(seed=9)
    inc = Incidence.from_matrix(h.incidence)
    p0, q0 = init_states(HypergraphView.of(h))
    out = aggregate(p0, q0, inc, "ev", params, "enc.0.ev").value
    heads = []
    for head in range(cfg.heads):
        alpha = _oracle_alpha(p0.value, q0.value, h.incidence, params, "enc.0.ev", head)
        W_Q = params[f"enc.0.ev.W_Q{head}"].value
        block = np.zeros((h.n_nodes, cfg.head_dim))
        for (i, j), a in alpha.items():
            block[i] += a * (q0.value[j] @ W_Q)
        heads.append(block)
    expect = np.concatenate(heads, axis=1) @ params["enc.0.ev.W_O"].value
    np.testing.assert_allclose(out, expect, rtol=0, atol=1e-10)


def test_layer_zero_params():
    h, cfg, params = _setup()
    _zero(params)
    p0, q0 = init_states(HypergraphView.of(h))
    p1, q1 = layer_forward(p0, q0, Incidence.from_matrix(h.incidence), params)
    assert not p1.value.any() and not q1.value.any()


def test_layer_residual_path_only():
    h, cfg, params = _setup(d=6, heads=2, head_dim=3)
    params["enc.0.theta_v"].value[...] = 0.0
    params["enc.0.phi_v"].value[...] = 2.0 * np.eye(6)
    p0, q0 = init_states(HypergraphView.of(h))
    p1, _ = layer_forward(p0, q0, Incidence.from_matrix(h.incidence), params)
    np.testing.assert_array_equal(p1.value, np.maximum(2.0 * h.features, 0.0))


def test_layer_gradient():
    h, cfg, params = _setup(seed=11)
    inc = Incidence.from_matrix(h.incidence)
    p0, q0 = init_states(HypergraphView.of(h))
    w = np.random.default_rng(2).normal(size=(2, h.n_nodes + h.n_edges))

    def f():
        p1, q1 = layer_forward(p0, q0, inc, params)
        stacked = C.matmul(C.tensor(w), C.add(C.tensor(np.zeros((1, 1))), _vstack(p1, q1)))
        return C.sum_all(C.mul(stacked, stacked))

    assert C.finite_diff_check(f, params.tensors("enc."), h=1e-6) < 1e-4


def _vstack(a, b):
    return C.transpose(C.concat_cols([C.transpose(a), C.transpose(b)]))


def test_encode_zero_params_and_singleton_pooling():
    h, cfg, params = _setup()
    _zero(params)
    z, _ = encode(HypergraphView.of(h), params, cfg)
    assert not z.value.any()
    inc = np.array([[1, 1], [0, 1], [0, 1]])
    h2 = Hypergraph(inc, np.random.default_rng(0).normal(size=(3, 4)))
    params2 = init_params(cfg, 1)
    z, y = encode(HypergraphView.of(h2), params2, cfg)
    np.testing.assert_array_equal(y.value[0], z.value[0])


def test_encode_pooling_loop_oracle():
    h, cfg, params = _setup(seed=2)
    z, y = encode(HypergraphView.of(h), params, cfg)
    for j in range(h.n_edges):
        members = np.flatnonzero(h.incidence[:, j])
        expect = sum(z.value[i] for i in members) / members.size
        np.testing.assert_allclose(y.value[j], expect, rtol=0, atol=1e-12)


def test_encode_edge_repr_variants():
    h, _, _ = _setup(seed=4)
    for repr_ in ("z_proj", "q"):
        cfg = EncoderConfig(in_dim=4, heads=2, head_dim=3, edge_repr=repr_)
        z, y = encode(HypergraphView.of(h), init_params(cfg, 0), cfg)
        assert y.shape == (h.n_edges, cfg.embedding_dim)


def test_encode_explicit_output_dim():
    h, _, _ = _setup()
    cfg = EncoderConfig(in_dim=4, heads=2, head_dim=3, out_dim=10, layers=2)
    z, y = encode(HypergraphView.of(h), init_params(cfg, 0), cfg)
    assert z.shape == (h.n_nodes, 10) and y.shape == (h.n_edges, 10)


def test_encode_permutation_equivariance():
    for seed in range(5):
        rng = np.random.default_rng(seed)
        h = random_hypergraph(rng, n=16, m=7, d=5)
        cfg = EncoderConfig(in_dim=5, heads=2, head_dim=4, layers=2)
        params = init_params(cfg, seed)
        perm = rng.permutation(h.n_nodes)
        hp = Hypergraph(h.incidence[perm], h.features[perm])
        z, y = encode(HypergraphView.of(h), params, cfg)
        zp, yp = encode(HypergraphView.of(hp), params, cfg)
        np.testing.assert_allclose(zp.value, z.value[perm], rtol=0, atol=1e-10)
        np.testing.assert_allclose(yp.value, y.value, rtol=0, atol=1e-10)


def test_encode_deterministic():
    h, cfg, params = _setup()
    a = encode(HypergraphView.of(h), params, cfg)[0].value
    b = encode(HypergraphView.of(h), params, cfg)[0].value
    assert a.tobytes() == b.tobytes()


def test_heads_zero_params():
    h, cfg, params = _setup()
    _zero(params)
    z = C.tensor(np.random.default_rng(0).normal(size=(5, cfg.embedding_dim)))
    assert not project(z, params).value.any()
    logits = score_edges(z, params)
    assert logits.shape == (5, 1) and not logits.value.any()


def test_mean_logit_gradient_wrt_inputs():
    h, cfg, params = _setup(seed=6)
    x = C.parameter(h.features.copy())
    inc = Incidence.from_matrix(h.incidence)

    def f():
        q0 = C.row_mean_pool_by_segments(x, inc.nodes, inc.edges, inc.n_edges)
        p1, _ = layer_forward(x, q0, inc, params, need_edges=False)
        return C.mean_all(score_edges(pool_edges(p1, inc), params))

    assert C.finite_diff_check(f, [x], h=1e-6) < 1e-4


def test_init_params_determinism_and_degenerate():
    cfg = EncoderConfig(in_dim=4, heads=2, head_dim=3)
    a, b, c = init_params(cfg, 1), init_params(cfg, 1), init_params(cfg, 2)
    assert all(np.array_equal(a[k].value, b[k].value) for k in a)
    assert any(not np.array_equal(a[k].value, c[k].value) for k in a if "W" in k)
    with pytest.raises(ValueError):
        EncoderConfig(in_dim=0)
    bound = np.sqrt(6 / (4 + 3))
    assert np.abs(a["enc.0.ev.W_P0"].value).max() <= bound

import networkx as nx
import numpy as np
import pytest
from hypothesis import given, strategies as st

from dgode.errors import DimensionError, EmptyInputError, SymmetryError
from dgode.numerics import sym_eig
from dgode.graph import (MixhopParams, NormalizedAdjacency, build_conversation_graph, conversation_adjacency,
                         dirichlet_energy, mixhop_step, normalize_adjacency, unroll_mixhop)


def test_two_node_edge():
    adj = normalize_adjacency([[0, 1], [1, 0]])
    np.testing.assert_allclose(adj.matrix, [[0.5, 0.5], [0.5, 0.5]])


def test_isolated_node():
    np.testing.assert_allclose(normalize_adjacency([[0]]).matrix, [[0.5]])


def test_triangle_spectrum_within_alpha():
    adj = normalize_adjacency(np.ones((3, 3)) - np.eye(3), alpha=0.9)
    assert adj.eig.values.min() >= -1e-12 and adj.eig.values.max() <= 0.9 + 1e-12
    np.testing.assert_allclose(adj.eig.values, np.linalg.eigvalsh(adj.matrix), atol=1e-12)


def test_normalization_matches_networkx():
    g = nx.erdos_renyi_graph(9, 0.4, seed=4)
    g.add_node(9)  # isolated
    a = nx.to_numpy_array(g, nodelist=range(10))
    lap = nx.normalized_laplacian_matrix(g, nodelist=range(10)).toarray()
    deg = a.sum(1)
    expect = 0.5 * (np.eye(10) + np.eye(10) - lap)
    # networkx puts 0 on the Laplacian diagonal for isolated nodes
    expect[deg == 0, deg == 0] = 0.5
    np.testing.assert_allclose(normalize_adjacency(a).matrix, expect, atol=1e-14)


def test_rejects_asymmetric():
    with pytest.raises(SymmetryError):
        normalize_adjacency([[0, 1], [0, 0]])


@given(st.integers(1, 10), st.integers(0, 2**31 - 1), st.floats(0.05, 1.0))
def test_spectrum_in_zero_alpha(n, seed, alpha):
    r = np.random.default_rng(seed)
    a = np.triu((r.random((n, n)) < 0.5).astype(float), 1)
    vals = normalize_adjacency(a + a.T, alpha).eig.values
    assert vals.min() >= -1e-12 and vals.max() <= alpha + 1e-12


class U:
    def __init__(self, d, k):
        self.text = np.full(d, k)
        self.audio = np.full(d, k + 0.1)
        self.visual = np.full(d, k + 0.2)
        self.speaker_id, self.label = f"s{k % 2}", "c0"


def test_three_utterance_edge_count():
    g = build_conversation_graph([U(2, k) for k in range(3)], 1, 1)
    assert g.node_count == 9
    assert g.adjacency.sum() / 2 == 15
    assert g.modality_tag[:3] == ["text"] * 3
    np.testing.assert_array_equal(g.utterance_index, [0, 1, 2] * 3)


def test_single_utterance_graph():
    g = build_conversation_graph([U(2, 0)], 4, 4)
    assert g.node_count == 3 and g.adjacency.sum() / 2 == 3


def test_window_counting_oracle():
    L, wp, wf = 7, 2, 3
    a = conversation_adjacency(L, wp, wf)
    reach = max(wp, wf)
    intra = sum(1 for i in range(L) for j in range(i + 1, L) if j - i <= reach)
    assert a.sum() / 2 == 3 * intra + 3 * L
    assert np.all(np.diag(a) == 0)


def test_empty_conversation():
    with pytest.raises(EmptyInputError):
        build_conversation_graph([], 1, 1)


def _adj(n, seed=0):
    r = np.random.default_rng(seed)
    a = np.triu((r.random((n, n)) < 0.5).astype(float), 1)
    return normalize_adjacency(a + a.T)


def test_identity_recursion_counts():
    ident = NormalizedAdjacency(np.eye(3), 1.0, sym_eig(np.eye(3)), np.zeros((3, 3)))
    h0 = np.arange(6.0).reshape(3, 2)
    out = unroll_mixhop(h0, ident, MixhopParams(np.eye(2), np.array([1.0])), 5)
    np.testing.assert_allclose(out, 6 * h0)


def test_zero_inputs():
    adj = _adj(4)
    assert np.all(mixhop_step(np.zeros((4, 2)), np.zeros((4, 2)), adj, MixhopParams(np.eye(2))) == 0)


def test_unroll_matches_direct_sum(rng):
    adj = _adj(6, 2)
    w = rng.normal(scale=0.4, size=(3, 3))
    e = rng.normal(size=(6, 3))
    p = MixhopParams(w, np.array([1.0]))
    for n in range(0, 6):
        direct = sum(np.linalg.matrix_power(adj.matrix, k) @ e @ np.linalg.matrix_power(w, k)
                     for k in range(n + 1))
        np.testing.assert_allclose(unroll_mixhop(e, adj, p, n), direct, atol=1e-12)
    np.testing.assert_allclose(unroll_mixhop(e, adj, p, 1), adj.matrix @ e @ w + e)


def test_unroll_two_hops_matches_hand_recursion(rng):
    adj = _adj(6, 3)
    w = rng.normal(scale=0.3, size=(2, 2))
    gates = np.array([0.7, 0.2])
    e = rng.normal(size=(6, 2))
    h = e
    for _ in range(8):
        h = (0.7 * adj.matrix @ h + 0.2 * adj.matrix @ adj.matrix @ h) @ w + e
    np.testing.assert_allclose(unroll_mixhop(e, adj, MixhopParams(w, gates), 8), h, atol=1e-12)


def test_step_shape_errors():
    adj = _adj(4)
    with pytest.raises(DimensionError):
        mixhop_step(np.zeros((4, 2)), np.zeros((4, 3)), adj, MixhopParams(np.eye(2)))
    with pytest.raises(DimensionError):
        mixhop_step(np.zeros((4, 2)), np.zeros((4, 2)), adj, MixhopParams(np.eye(3)))


@given(st.integers(0, 2**31 - 1), st.floats(-2, 2), st.floats(-2, 2))
def test_step_linear_with_zero_residual(seed, a, b):
    r = np.random.default_rng(seed)
    adj = _adj(5, seed % 7)
    p = MixhopParams(r.normal(size=(2, 2)), np.array([0.3, 0.9]))
    h1, h2, z = r.normal(size=(5, 2)), r.normal(size=(5, 2)), np.zeros((5, 2))
    lhs = mixhop_step(a * h1 + b * h2, z, adj, p)
    rhs = a * mixhop_step(h1, z, adj, p) + b * mixhop_step(h2, z, adj, p)
    np.testing.assert_allclose(lhs, rhs, atol=1e-10)


@given(st.integers(0, 2**31 - 1))
def test_permutation_equivariance(seed):
    r = np.random.default_rng(seed)
    n = 6
    a = np.triu((r.random((n, n)) < 0.5).astype(float), 1)
    a = a + a.T
    perm = r.permutation(n)
    pm = np.eye(n)[perm]
    adj, adj_p = normalize_adjacency(a), normalize_adjacency(pm @ a @ pm.T)
    p = MixhopParams(r.normal(size=(3, 3)), np.array([0.5, 0.5]))
    h, h0 = r.normal(size=(n, 3)), r.normal(size=(n, 3))
    np.testing.assert_allclose(mixhop_step(pm @ h, pm @ h0, adj_p, p), pm @ mixhop_step(h, h0, adj, p),
                               atol=1e-12)


def test_depth_collapse_without_residual(rng):
    adj = normalize_adjacency(conversation_adjacency(5, 2, 2))
    h = rng.normal(size=(15, 3))
    variances = []
    for _ in range(20):
        h = adj.matrix @ h
        variances.append(np.var(h / np.linalg.norm(h), axis=0).sum())
    assert all(x >= y - 1e-15 for x, y in zip(variances, variances[1:]))


def test_dirichlet_examples(rng):
    assert dirichlet_energy(np.ones((4, 2)), _adj(4)) == 0
    edge = normalize_adjacency([[0, 1], [1, 0]])
    assert dirichlet_energy(np.array([[0.0], [2.0]]), edge) == pytest.approx(4.0)
    adj = _adj(8, 5)
    h = rng.normal(size=(8, 3))
    brute = 0.5 * sum(np.sum((h[i] - h[j]) ** 2) for i in range(8) for j in range(8)
                      if adj.source[i, j])
    assert dirichlet_energy(h, adj) == pytest.approx(brute, rel=1e-12)

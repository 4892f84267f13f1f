from collections import deque

import numpy as np
import pytest

import network
from errors import DisconnectedGraph, InvalidTopologyParams, NoConvergence
from network import (
    RING10_CHORDS,
    build_mixing,
    dense_second_eigenvalue,
    laplacian_weights,
    load_edge_list,
    metropolis_weights,
    ring_edges,
    second_eigenvalue,
    sparse_topology,
)


def reachable_from_zero(m, edges):
    neighbours = {i: set() for i in range(m)}
    for i, j in edges:
        neighbours[i].add(j)
        neighbours[j].add(i)
    seen, queue = {0}, deque([0])
    while queue:
        for j in neighbours[queue.popleft()] - seen:
            seen.add(j)
            queue.append(j)
    return seen


def assert_doubly_stochastic(W):
    assert np.array_equal(W, W.T)
    assert np.all(W >= 0)
    assert np.allclose(W.sum(axis=0), 1.0, atol=1e-12)
    assert np.allclose(W.sum(axis=1), 1.0, atol=1e-12)


def test_ring_edges_small_cases():
    assert ring_edges(1) == []
    assert ring_edges(2) == [(0, 1)]
    assert len(ring_edges(7)) == 7


def test_star_graph_weights():
    W = metropolis_weights(4, [(0, 1), (0, 2), (0, 3)])
    assert W[0, 1:] == pytest.approx([1 / 6] * 3)
    assert np.diag(W) == pytest.approx([1 / 2, 5 / 6, 5 / 6, 5 / 6])
    assert_doubly_stochastic(W)


def test_ring_of_four():
    mixing = build_mixing("ring", 4)
    assert mixing.W[0] == pytest.approx([0.5, 0.25, 0.0, 0.25])
    assert mixing.rho == pytest.approx(0.5, abs=1e-10)
    assert dense_second_eigenvalue(mixing.W) == pytest.approx(0.5, abs=1e-12)


def test_ring_of_ten():
    mixing = build_mixing("ring", 10)
    expected = 0.5 + 0.5 * np.cos(2 * np.pi / 10)
    assert mixing.rho == pytest.approx(expected, abs=1e-10)
    assert mixing.rho == pytest.approx(dense_second_eigenvalue(mixing.W), abs=1e-10)


@pytest.mark.parametrize("m", [2, 5, 10, 100])
def test_uniform_complete_graph_has_zero_rho(m):
    mixing = build_mixing("complete", m)
    assert mixing.rho == 0.0
    assert np.all(mixing.W == 1.0 / m)


def test_metropolis_complete_graph():
    mixing = build_mixing("complete", 5, {"uniform": False})
    assert np.diag(mixing.W) == pytest.approx([0.5] * 5)
    assert mixing.rho == pytest.approx(0.375, abs=1e-10)


def test_single_agent_mixing():
    for topology in ("ring", "sparse", "complete"):
        mixing = build_mixing(topology, 1)
        assert mixing.W.tolist() == [[1.0]] and mixing.rho == 0.0 and mixing.m == 1


def test_two_agent_ring_mixes_in_one_step():
    mixing = build_mixing("ring", 2)
    assert mixing.W == pytest.approx(np.full((2, 2), 0.5))
    assert mixing.rho == pytest.approx(0.0, abs=1e-12)


@pytest.mark.parametrize("m", [5, 10, 100])
def test_rho_ordering_and_methods_agree(m):
    rhos = {}
    for topology in ("complete", "sparse", "ring"):
        mixing = build_mixing(topology, m, {"seed": 3})
        assert_doubly_stochastic(mixing.W)
        assert mixing.rho == pytest.approx(dense_second_eigenvalue(mixing.W), abs=1e-10)
        rhos[topology] = mixing.rho
    assert rhos["complete"] <= rhos["sparse"] + 1e-10
    assert rhos["sparse"] <= rhos["ring"] + 1e-10


def test_sparse_graph_is_seeded_and_connected():
    first = sparse_topology(20, seed=8)
    assert first == sparse_topology(20, seed=8)
    assert len(first) >= 20 + 4
    assert reachable_from_zero(20, first) == set(range(20))


def test_fixed_ten_agent_pattern():
    edges = sparse_topology(10, pattern="ring10_chords")
    assert len(edges) == 12
    assert set(RING10_CHORDS) <= set(edges)
    assert reachable_from_zero(10, edges) == set(range(10))
    with pytest.raises(InvalidTopologyParams):
        sparse_topology(8, pattern="ring10_chords")


def test_sparse_parameter_errors():
    with pytest.raises(InvalidTopologyParams):
        sparse_topology(1)
    with pytest.raises(InvalidTopologyParams):
        sparse_topology(10, chords=-1)
    with pytest.raises(InvalidTopologyParams):
        sparse_topology(10, pattern="zigzag")


def test_bad_topology_requests():
    with pytest.raises(InvalidTopologyParams):
        build_mixing("torus", 5)
    with pytest.raises(InvalidTopologyParams):
        build_mixing("ring", 0)
    with pytest.raises(InvalidTopologyParams):
        build_mixing("custom", 5)


def test_custom_edge_list(tmp_path):
    path = tmp_path / "graph.edges"
    path.write_text("0 1\n1 2\n2 3\n3 0\n0 2\n")
    assert load_edge_list(path, 4) == [(0, 1), (0, 2), (0, 3), (1, 2), (2, 3)]
    mixing = build_mixing("custom", 4, {"edge_list": str(path)})
    assert_doubly_stochastic(mixing.W)
    assert 0.0 < mixing.rho < 1.0


def test_disconnected_edge_list_is_rejected(tmp_path):
    path = tmp_path / "split.edges"
    path.write_text("0 1\n2 3\n")
    with pytest.raises(DisconnectedGraph):
        build_mixing("custom", 4, {"edge_list": str(path)})


def test_edge_list_outside_the_agent_range(tmp_path):
    path = tmp_path / "wide.edges"
    path.write_text("0 1\n1 5\n")
    with pytest.raises(InvalidTopologyParams):
        load_edge_list(path, 4)


def test_power_iteration_budget():
    W = build_mixing("ring", 10).W
    with pytest.raises(NoConvergence):
        second_eigenvalue(W, max_iter=1)
    assert second_eigenvalue(W, method="dense") == pytest.approx(0.5 + 0.5 * np.cos(np.pi / 5), abs=1e-12)


def test_build_mixing_falls_back_to_dense_eigensolver(monkeypatch):
    def stuck(W, method="power", tol=1e-12, max_iter=200000):
        raise NoConvergence("stuck")

    monkeypatch.setattr(network, "second_eigenvalue", stuck)
    mixing = build_mixing("ring", 6)
    assert mixing.rho == pytest.approx(0.5 + 0.5 * np.cos(np.pi / 3), abs=1e-12)


@pytest.mark.parametrize("topology, params", [
    ("ring", {}),
    ("sparse", {"seed": 3}),
    ("complete", {"uniform": False}),
    ("ring", {"weights": "laplacian", "laplacian_scale": 0.05}),
    ("sparse", {"weights": "laplacian", "laplacian_scale": 0.5}),
])
def test_mixing_contracts_disagreement(topology, params, rng):
    mixing = build_mixing(topology, 10, params)
    for _ in range(20):
        D = rng.normal(size=(10, 3))
        D -= D.mean(axis=0)
        assert np.linalg.norm(mixing.W @ D) <= mixing.rho * np.linalg.norm(D) + 1e-10


@pytest.mark.parametrize("topology", ["ring", "sparse", "complete"])
def test_mixing_preserves_the_average(topology, rng):
    X = rng.normal(size=(7, 4))
    for params in ({}, {"weights": "laplacian", "laplacian_scale": 0.3}):
        W = build_mixing(topology, 7, params).W
        np.testing.assert_allclose((W @ X).mean(axis=0), X.mean(axis=0), atol=1e-12)


def test_laplacian_weights_on_a_ring():
    W = laplacian_weights(5, ring_edges(5), scale=0.05)
    assert W[0] == pytest.approx([0.98, 0.01, 0.0, 0.0, 0.01])
    assert_doubly_stochastic(W)
    mixing = build_mixing("ring", 5, {"weights": "laplacian", "laplacian_scale": 0.05})
    expected = 1.0 - 0.01 * (2.0 - 2.0 * np.cos(2 * np.pi / 5))
    assert mixing.rho == pytest.approx(expected, abs=1e-10)


def test_full_scale_laplacian_complete_graph_is_uniform_averaging():
    mixing = build_mixing("complete", 6, {"weights": "laplacian"})
    np.testing.assert_allclose(mixing.W, np.full((6, 6), 1 / 6), atol=1e-15)
    assert mixing.rho == pytest.approx(0.0, abs=1e-12)
    lazy = build_mixing("complete", 6, {"weights": "laplacian", "laplacian_scale": 0.05})
    assert lazy.rho == pytest.approx(0.95, abs=1e-10)


@pytest.mark.parametrize("m", [5, 10, 100])
def test_laplacian_eigenvalues_never_rise_when_edges_are_added(m):
    params = {"weights": "laplacian", "laplacian_scale": 0.05, "seed": 0}
    spectra = {topology: np.sort(np.linalg.eigvalsh(build_mixing(topology, m, params).W))
               for topology in ("ring", "sparse", "complete")}
    assert np.all(spectra["sparse"] <= spectra["ring"] + 1e-12)
    assert np.all(spectra["complete"] <= spectra["sparse"] + 1e-12)
    assert spectra["ring"][0] >= 0.95 - 1e-12


def test_laplacian_scale_outside_its_range():
    with pytest.raises(InvalidTopologyParams):
        laplacian_weights(4, ring_edges(4), scale=0.0)
    with pytest.raises(InvalidTopologyParams):
        build_mixing("ring", 4, {"weights": "chebyshev"})

#!/usr/bin/env python3
"""
Communication graphs and doubly stochastic mixing matrices

Two weight rules:
    metropolis  W_ij = 1 / (2 max(d_i, d_j))  for each edge (i, j)
    laplacian   W = I - (c / m) L,  c in (0, 1]  (every edge weighs c / m)
with W_ii = 1 - sum_{j != i} W_ij. Both are symmetric, doubly stochastic and
have rho < 1 on every connected graph. Under the laplacian rule adding edges
never raises any eigenvalue of W, and c = 1 on the complete graph gives
(1/m) 1 1^T. rho is the spectral norm of W - (1/m) 1 1^T.
"""

import logging
from dataclasses import dataclass, field
from itertools import combinations

import networkx as nx
import numpy as np
from scipy.linalg import eigvalsh

from errors import DisconnectedGraph, InvalidTopologyParams, NoConvergence

logger = logging.getLogger(__name__)

TOPOLOGIES = ("ring", "sparse", "complete", "custom")
WEIGHT_RULES = ("metropolis", "laplacian")

# rho comparisons between candidate graphs
RHO_TOL = 1e-12

# ten-agent pattern: ring plus two chords across the cycle
RING10_CHORDS = ((1, 6), (3, 8))


@dataclass(frozen=True)
class MixingMatrix:
    """Validated symmetric doubly stochastic W with cached rho"""

    W: np.ndarray
    rho: float
    topology: str
    edges: tuple = field(default=(), repr=False)

    @property
    def m(self):
        return self.W.shape[0]


def ring_edges(m):
    if m < 2:
        return []
    if m == 2:
        return [(0, 1)]
    return [(i, (i + 1) % m) for i in range(m)]


def complete_edges(m):
    return list(combinations(range(m), 2))


def as_graph(m, edges):
    graph = nx.Graph()
    graph.add_nodes_from(range(m))
    graph.add_edges_from(edges)
    return graph


def is_connected(m, edges):
    return m == 1 or nx.is_connected(as_graph(m, edges))


def metropolis_weights(m, edges):
    """Lazy Metropolis weight matrix of an undirected graph"""
    graph = as_graph(m, edges)
    degree = dict(graph.degree())
    W = np.zeros((m, m))
    for i, j in graph.edges():
        if i == j:
            continue
        weight = 1.0 / (2.0 * max(degree[i], degree[j]))
        W[i, j] = weight
        W[j, i] = weight
    W[np.diag_indices(m)] = 1.0 - W.sum(axis=1)
    return W


def laplacian_weights(m, edges, scale=1.0):
    """W = I - (scale / m) L: the same weight scale / m on every edge"""
    if not 0.0 < scale <= 1.0:
        raise InvalidTopologyParams(f"laplacian scale must lie in (0, 1], got {scale}")
    W = np.zeros((m, m))
    for i, j in as_graph(m, edges).edges():
        if i == j:
            continue
        W[i, j] = W[j, i] = scale / m
    W[np.diag_indices(m)] = 1.0 - W.sum(axis=1)
    return W


def weight_matrix(m, edges, rule="metropolis", scale=1.0):
    if rule == "metropolis":
        return metropolis_weights(m, edges)
    if rule == "laplacian":
        return laplacian_weights(m, edges, scale)
    raise InvalidTopologyParams(f"unknown weight rule: {rule}")


def dense_second_eigenvalue(W):
    """max |eigenvalue| of W - (1/m) 1 1^T from a dense symmetric eigensolver"""
    m = W.shape[0]
    if m == 1:
        return 0.0
    deviation = W - np.full((m, m), 1.0 / m)
    return float(np.max(np.abs(eigvalsh(0.5 * (deviation + deviation.T)))))


def second_eigenvalue(W, method="power", tol=1e-12, max_iter=200000):
    """
    rho = ||W - (1/m) 1 1^T||_2

    Power iteration runs on B^2 (B = W - J), so eigenvalues +rho and -rho
    cannot make it oscillate; it stops once ||B^2 v - theta v|| <= tol.

    Raises:
        NoConvergence: power iteration hit max_iter
    """
    W = np.asarray(W, dtype=float)
    m = W.shape[0]
    if m == 1:
        return 0.0
    if method == "dense":
        return dense_second_eigenvalue(W)
    B = W - np.full((m, m), 1.0 / m)
    if not np.any(B):
        return 0.0
    v = np.random.default_rng(0).standard_normal(m)
    v -= v.mean()
    v /= np.linalg.norm(v)
    for _ in range(max_iter):
        w = B @ (B @ v)
        theta = float(v @ w)
        if np.linalg.norm(w - theta * v) <= tol:
            return float(np.sqrt(max(theta, 0.0)))
        size = np.linalg.norm(w)
        if size == 0.0:
            return 0.0
        v = w / size
    raise NoConvergence(f"power iteration did not reach tol={tol} in {max_iter} iterations")


def sparse_topology(m, seed=0, chords=None, pattern=None, max_retries=50, weights="metropolis", scale=1.0):
    """
    Ring plus floor(m/5) seeded random chords, connected and no slower than the ring

    A draw is kept only if rho(sparse) <= rho(ring) under the given weight rule.
    Chords can raise rho under lazy Metropolis weights (on five agents a single
    chord does), so after max_retries rejected draws one more chord is added.
    Under the laplacian rule the first connected draw is always kept.

    Args:
        m (int): agent count (>= 2)
        seed (int): chord sampling seed
        chords (int): chord count, default floor(m/5)
        pattern (str): "ring10_chords" returns the fixed ten-agent pattern
        weights (str): weight rule used for the rho comparison
        scale (float): laplacian scale

    Returns:
        list of (i, j) edges
    """
    if m < 2:
        raise InvalidTopologyParams("sparse topology needs m >= 2")
    ring = ring_edges(m)
    if pattern == "ring10_chords":
        if m != 10:
            raise InvalidTopologyParams("the fixed sparse pattern is defined for m = 10")
        return ring + list(RING10_CHORDS)
    if pattern is not None:
        raise InvalidTopologyParams(f"unknown sparse pattern: {pattern}")

    ring_set = {tuple(sorted(edge)) for edge in ring}
    spare = [pair for pair in complete_edges(m) if pair not in ring_set]
    count = m // 5 if chords is None else int(chords)
    if count < 0:
        raise InvalidTopologyParams("chord count must be nonnegative")
    if count == 0 or not spare:
        return ring
    rho_ring = dense_second_eigenvalue(weight_matrix(m, ring, weights, scale))
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(m,)))
    for extra in range(min(count, len(spare)), len(spare) + 1):
        for attempt in range(max_retries):
            picked = rng.choice(len(spare), size=extra, replace=False)
            edges = ring + [spare[index] for index in sorted(picked)]
            if not is_connected(m, edges):
                continue
            if dense_second_eigenvalue(weight_matrix(m, edges, weights, scale)) <= rho_ring + RHO_TOL:
                return edges
        logger.debug("sparse graph m=%d: no draw with %d chords beat the ring, adding one", m, extra)
    return complete_edges(m)


def load_edge_list(path, m):
    """Read 'i j' pairs (0-indexed, whitespace separated) into an edge list"""
    graph = nx.read_edgelist(path, nodetype=int, data=False)
    edges = [tuple(sorted((int(i), int(j)))) for i, j in graph.edges()]
    for i, j in edges:
        if not (0 <= i < m and 0 <= j < m):
            raise InvalidTopologyParams(f"edge ({i}, {j}) outside 0..{m - 1}")
    return sorted(set(edges))


def build_mixing(topology, m, params=None):
    """
    Build and validate the mixing matrix for a topology

    Args:
        topology (str): ring, sparse, complete or custom
        m (int): agent count
        params (dict): seed, chords, pattern (sparse); uniform (complete,
            default True gives W = (1/m) 1 1^T under Metropolis weights);
            edge_list (custom); weights ("metropolis" or "laplacian");
            laplacian_scale; eig_method

    Returns:
        MixingMatrix
    """
    params = dict(params or {})
    if m is None or int(m) < 1:
        raise InvalidTopologyParams(f"need m >= 1, got {m}")
    m = int(m)
    if topology not in TOPOLOGIES:
        raise InvalidTopologyParams(f"unknown topology: {topology}")
    rule = params.get("weights") or "metropolis"
    scale = params.get("laplacian_scale")
    scale = 1.0 if scale is None else float(scale)
    if rule not in WEIGHT_RULES:
        raise InvalidTopologyParams(f"unknown weight rule: {rule}")
    if m == 1:
        return MixingMatrix(W=np.ones((1, 1)), rho=0.0, topology=topology, edges=())

    if topology == "ring":
        edges = ring_edges(m)
    elif topology == "sparse":
        edges = sparse_topology(m, seed=params.get("seed", 0), chords=params.get("chords"),
                                pattern=params.get("pattern"), weights=rule, scale=scale)
    elif topology == "complete":
        edges = complete_edges(m)
    else:
        if not params.get("edge_list"):
            raise InvalidTopologyParams("custom topology needs an edge_list path")
        edges = load_edge_list(params["edge_list"], m)

    if not is_connected(m, edges):
        raise DisconnectedGraph(f"{topology} graph on {m} agents is disconnected")

    if rule == "metropolis" and topology == "complete" and params.get("uniform", True):
        W = np.full((m, m), 1.0 / m)
    else:
        W = weight_matrix(m, edges, rule, scale)

    method = params.get("eig_method", "power")
    try:
        rho = second_eigenvalue(W, method=method)
    except NoConvergence as error:
        logger.debug("%s; falling back to the dense eigensolver", error)
        rho = dense_second_eigenvalue(W)
    if not rho < 1.0:
        raise DisconnectedGraph(f"rho = {rho} is not below 1")
    _check_doubly_stochastic(W)
    return MixingMatrix(W=W, rho=rho, topology=topology, edges=tuple(edges))


def _check_doubly_stochastic(W):
    if not np.array_equal(W, W.T):
        raise InvalidTopologyParams("mixing matrix is not symmetric")
    if np.any(W < 0):
        raise InvalidTopologyParams("mixing matrix has negative entries")
    if np.max(np.abs(W.sum(axis=1) - 1.0)) > 1e-12:
        raise InvalidTopologyParams("mixing matrix rows do not sum to one")


if __name__ == "__main__":
    # rho per topology for a few network sizes
    print("Mixing rates (rho = ||W - J||_2):")
    print("=" * 60)
    for m in (5, 10, 100):
        line = []
        for topology in ("ring", "sparse", "complete"):
            mixing = build_mixing(topology, m)
            line.append(f"{topology} {mixing.rho:.6f} ({len(mixing.edges)} edges)")
        print(f"m={m:<4} " + "   ".join(line))

"""Task-similarity graphs: k-nearest-neighbour construction and edge weights.

Tasks are graph nodes; an edge (m, l) with weight r_{m,l} > 0 encodes prior
belief that tasks m and l have similar coefficient vectors. The fusion
penalty sum_e r_e ||u_m - u_l||_2 acts on these edges.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import sparse

from .errors import ConfigInvalidError, DegenerateKError, EmptyGraphError

DISTANCE_FLOOR = 1e-8


@dataclass(frozen=True)
class WeightGraph:
    """Undirected weighted graph over tasks.

    edges is an (E, 2) int array with each row (m, l), m < l, rows sorted
    lexicographically; weights is the matching (E,) positive array.
    """

    n_nodes: int
    edges: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        edges = np.array(self.edges, dtype=int).reshape(-1, 2)
        weights = np.array(self.weights, dtype=float).reshape(-1)
        if edges.shape[0] != weights.shape[0]:
            raise ConfigInvalidError("edges and weights must have equal length")
        if edges.shape[0] == 0:
            raise EmptyGraphError("graph has no edges")
        if edges.min() < 0 or edges.max() >= self.n_nodes:
            raise ConfigInvalidError("edge endpoint out of range")
        if (edges[:, 0] >= edges[:, 1]).any():
            raise ConfigInvalidError("each edge must satisfy m < l")
        order = np.lexsort((edges[:, 1], edges[:, 0]))
        edges = edges[order]
        weights = weights[order]
        dup = (np.diff(edges[:, 0]) == 0) & (np.diff(edges[:, 1]) == 0)
        if dup.any():
            raise ConfigInvalidError("duplicate edges")
        if (weights <= 0).any():
            raise ConfigInvalidError("edge weights must be positive")
        edges.setflags(write=False)
        weights.setflags(write=False)
        object.__setattr__(self, "edges", edges)
        object.__setattr__(self, "weights", weights)

    @property
    def n_edges(self) -> int:
        return self.edges.shape[0]

    def degrees(self) -> np.ndarray:
        """Unweighted node degrees."""
        deg = np.zeros(self.n_nodes, dtype=int)
        np.add.at(deg, self.edges[:, 0], 1)
        np.add.at(deg, self.edges[:, 1], 1)
        return deg

    def neighbor_lists(self) -> list[list[tuple[int, int]]]:
        """For each node, a list of (neighbor, edge_index) pairs."""
        out: list[list[tuple[int, int]]] = [[] for _ in range(self.n_nodes)]
        for e, (m, l) in enumerate(self.edges):
            out[m].append((int(l), e))
            out[l].append((int(m), e))
        return out


def build_knn_weights(points: np.ndarray, k: int = 5) -> WeightGraph:
    """k-nearest-neighbour graph with symmetrized 0.5 / 1.0 weights.

    Each node links to its k nearest neighbours in Euclidean distance
    (distance ties broken toward the smaller index). Writing S for the 0/1
    directed adjacency, the weight matrix is R = (S + S^T) / 2: mutual
    neighbours get weight 1, one-sided neighbours weight 0.5.
    """
    points = np.asarray(points, dtype=float)
    if points.ndim != 2:
        raise ConfigInvalidError("points must be a (T, p) array")
    T = points.shape[0]
    if k < 1 or k >= T:
        raise DegenerateKError(f"k must satisfy 1 <= k <= T-1, got k={k} for T={T}")
    sq = np.sum(points**2, axis=1)
    d2 = sq[:, None] + sq[None, :] - 2.0 * points @ points.T
    np.maximum(d2, 0.0, out=d2)
    np.fill_diagonal(d2, np.inf)
    S = np.zeros((T, T))
    for m in range(T):
        # Stable sort on (distance, index) implements the tie rule.
        nn = np.lexsort((np.arange(T), d2[m]))[:k]
        S[m, nn] = 1.0
    R = (S + S.T) / 2.0
    iu, ju = np.nonzero(np.triu(R, k=1))
    if iu.size == 0:
        raise EmptyGraphError("k-NN produced no edges")
    return WeightGraph(T, np.column_stack([iu, ju]), R[iu, ju])


def adaptive_weights(
    graph: WeightGraph, centroids: np.ndarray, rel_floor: float = 1e-2
) -> WeightGraph:
    """Reweight edges inversely to estimated centroid distances.

    New weights are r_e = nu / ||u_m - u_l||_2 with nu chosen so the total
    weight sum matches the input graph's. Distances are clamped from below
    at rel_floor times the mean edge distance (and at 1e-8 outright):
    centroids that fused exactly in a first-stage fit would otherwise
    receive infinite weight, and after the sum normalization every other
    edge would be driven to zero.
    """
    centroids = np.asarray(centroids, dtype=float)
    if centroids.shape[0] != graph.n_nodes:
        raise ConfigInvalidError("centroids must have one row per graph node")
    diffs = centroids[graph.edges[:, 0]] - centroids[graph.edges[:, 1]]
    dist = np.linalg.norm(diffs, axis=1)
    floor = max(DISTANCE_FLOOR, rel_floor * float(dist.mean()))
    inv = 1.0 / np.maximum(dist, floor)
    nu = float(graph.weights.sum()) / float(inv.sum())
    return WeightGraph(graph.n_nodes, graph.edges, nu * inv)


def build_incidence(graph: WeightGraph) -> sparse.csr_matrix:
    """Signed edge-node incidence matrix A of shape (E, T).

    Row e of A has +1 in column m and -1 in column l for edge e = (m, l),
    so (A @ U)[e] = u_m - u_l for stacked centroids U of shape (T, p).
    """
    E = graph.n_edges
    rows = np.repeat(np.arange(E), 2)
    cols = graph.edges.reshape(-1)
    vals = np.tile([1.0, -1.0], E)
    return sparse.csr_matrix((vals, (rows, cols)), shape=(E, graph.n_nodes))


def save_edges_csv(graph: WeightGraph, path) -> None:
    """Write the edge list as CSV with header `task_m,task_l,weight`."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("task_m,task_l,weight\n")
        for (m, l), w in zip(graph.edges, graph.weights):
            fh.write(f"{int(m)},{int(l)},{float(w)!r}\n")


def load_edges_csv(path, n_nodes: int) -> WeightGraph:
    """Read an edge list written by `save_edges_csv`."""
    edges, weights = [], []
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip()
        if header != "task_m,task_l,weight":
            raise ConfigInvalidError(f"{path}: unexpected edge-list header {header!r}")
        for line in fh:
            line = line.strip()
            if not line:
                continue
            m, l, w = line.split(",")
            edges.append((int(m), int(l)))
            weights.append(float(w))
    return WeightGraph(n_nodes, np.array(edges), np.array(weights))

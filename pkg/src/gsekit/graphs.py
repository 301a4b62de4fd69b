"""Shared interaction networks and per-sample interaction graphs.

A network fixes a universal edge set over named features. Each data sample
``x`` is lifted to an instance graph whose edge values are
``phi(A[i, j]) * x[i] * x[j]``, and pairs of instance graphs are compared by
the squared Frobenius distance of their edge-value vectors.
"""

import hashlib
from dataclasses import dataclass

import numpy as np

from .errors import DataError
from .validation import as_float_matrix, as_float_vector


@dataclass(frozen=True)
class EdgeWeightTransform:
    """Elementwise transform applied to interaction weights before the value product.

    Supported kinds: ``identity`` (no parameter), ``power`` (w ** param) and
    ``threshold`` (w if w >= param else 0).
    """

    kind: str = "identity"
    param: float | None = None

    def __post_init__(self):
        if self.kind not in ("identity", "power", "threshold"):
            raise DataError(f"unknown edge weight transform kind {self.kind!r}")
        if self.kind == "identity" and self.param is not None:
            raise DataError("identity transform takes no parameter")
        if self.kind in ("power", "threshold") and self.param is None:
            raise DataError(f"{self.kind} transform requires a parameter")

    def apply(self, weights):
        weights = np.asarray(weights, dtype=float)
        if self.kind == "identity":
            return weights
        if self.kind == "power":
            return weights ** self.param
        return np.where(weights >= self.param, weights, 0.0)

    @classmethod
    def identity(cls):
        return cls("identity")

    @classmethod
    def power(cls, p):
        return cls("power", float(p))

    @classmethod
    def threshold(cls, t):
        return cls("threshold", float(t))


IDENTITY = EdgeWeightTransform.identity()


@dataclass(frozen=True)
class InteractionNetwork:
    """Symmetric interaction weights over named features plus the fixed edge set.

    ``edges`` enumerates exactly the strictly-upper-triangle nonzero entries
    of ``adjacency`` in row-major order; its length is fixed for the lifetime
    of the network and every instance graph built from it has that many
    entries. Diagonal entries may be loaded but are never edges.
    """

    feature_names: tuple
    adjacency: np.ndarray
    edges: np.ndarray
    uid: str

    @property
    def n_features(self):
        return len(self.feature_names)

    @property
    def n_edges(self):
        return self.edges.shape[0]

    @property
    def edge_weights(self):
        """Adjacency entries at the edge positions, in edge order."""
        if self.n_edges == 0:
            return np.zeros(0)
        return self.adjacency[self.edges[:, 0], self.edges[:, 1]]

    def edge_names(self):
        """(name_i, name_j) pairs in edge order."""
        return [(self.feature_names[i], self.feature_names[j]) for i, j in self.edges]


def _network_uid(names, adjacency):
    h = hashlib.sha1()
    h.update("\x1f".join(names).encode("utf-8"))
    h.update(np.ascontiguousarray(adjacency).tobytes())
    return h.hexdigest()[:16]


def build_network(names, triples):
    """Assemble an InteractionNetwork from (i, j, weight) triples.

    Each triple is mirrored into a symmetric adjacency. Weights must lie in
    [0, 1]; duplicate pairs must agree on the weight. Diagonal triples are
    stored in the adjacency but never become edges.
    """
    names = list(names)
    if any(not isinstance(n, str) or not n for n in names):
        raise DataError("feature names must be non-empty strings")
    if len(set(names)) != len(names):
        raise DataError("duplicate feature name in network")
    n = len(names)
    adjacency = np.zeros((n, n))
    seen = {}
    for i, j, w in triples:
        i, j = int(i), int(j)
        w = float(w)
        if not (0 <= i < n and 0 <= j < n):
            raise DataError(f"edge index ({i}, {j}) out of range for {n} features")
        if not np.isfinite(w) or not 0.0 <= w <= 1.0:
            raise DataError(f"interaction weight {w} outside [0, 1] for pair ({i}, {j})")
        key = (min(i, j), max(i, j))
        if key in seen and seen[key] != w:
            raise DataError(f"conflicting weights {seen[key]} vs {w} for pair {key}")
        seen[key] = w
        adjacency[i, j] = w
        adjacency[j, i] = w
    edges = np.argwhere(np.triu(adjacency, k=1) > 0)
    return InteractionNetwork(
        feature_names=tuple(names),
        adjacency=adjacency,
        edges=edges.astype(np.intp),
        uid=_network_uid(names, adjacency),
    )


def complete_network(names):
    """All-ones network over the given features: every pair is an edge of weight 1."""
    n = len(names)
    triples = [(i, j, 1.0) for i in range(n) for j in range(i + 1, n)]
    return build_network(names, triples)


def subnetwork(net, feature_indices):
    """Induced network on a feature subset: edges with both endpoints kept survive.

    ``feature_indices`` must be sorted ascending so the induced edge order
    stays row-major with respect to the renumbered features.
    """
    idx = np.asarray(feature_indices, dtype=np.intp)
    if idx.size == 0:
        raise DataError("feature subset is empty")
    if np.any(idx < 0) or np.any(idx >= net.n_features):
        raise DataError("feature subset index out of range")
    if np.any(np.diff(idx) <= 0):
        raise DataError("feature subset must be sorted ascending and unique")
    names = [net.feature_names[i] for i in idx]
    sub_adj = net.adjacency[np.ix_(idx, idx)]
    triples = [(i, j, sub_adj[i, j]) for i, j in np.argwhere(np.triu(sub_adj, 1) > 0)]
    # diagonal entries survive too, if present
    triples += [(i, i, sub_adj[i, i]) for i in range(len(names)) if sub_adj[i, i] > 0]
    return build_network(names, triples)


@dataclass(frozen=True)
class InstanceGraph:
    """Edge-value vector of one sample over its network's fixed edge set."""

    network: InteractionNetwork
    values: np.ndarray

    @property
    def network_id(self):
        return self.network.uid

    def __post_init__(self):
        if self.values.shape != (self.network.n_edges,):
            raise DataError(
                f"instance graph has {self.values.shape[0]} values, "
                f"network has {self.network.n_edges} edges"
            )


def edge_value_matrix(net, X, phi=IDENTITY):
    """Edge values for every row of X, as an (n_samples, n_edges) matrix.

    Entry (s, e) is ``phi(A[i, j]) * X[s, i] * X[s, j]`` for edge e = (i, j).
    """
    X = as_float_matrix(X, "X")
    if X.shape[1] != net.n_features:
        raise DataError(
            f"X has {X.shape[1]} columns, network has {net.n_features} features"
        )
    if net.n_edges == 0:
        return np.zeros((X.shape[0], 0))
    wt = phi.apply(net.edge_weights)
    return wt[None, :] * X[:, net.edges[:, 0]] * X[:, net.edges[:, 1]]


def instance_graph(net, x, phi=IDENTITY):
    """Build the instance graph of a single sample. Deterministic in its inputs."""
    x = as_float_vector(x, "x")
    values = edge_value_matrix(net, x[None, :], phi)[0]
    return InstanceGraph(network=net, values=values)


def instance_graphs(net, X, phi=IDENTITY):
    """Instance graphs for every row of X."""
    V = edge_value_matrix(net, X, phi)
    return [InstanceGraph(network=net, values=V[s]) for s in range(V.shape[0])]


def _check_same_network(g, h):
    if g.network_id != h.network_id:
        raise DataError("instance graphs come from different networks")


def squared_frobenius_distance(g, h):
    """Sum of squared edge-value differences between two instance graphs.

    Equals the squared Frobenius norm of the dense-view difference divided by
    two (off-diagonal entries appear twice in the dense symmetric matrix).
    """
    _check_same_network(g, h)
    diff = g.values - h.values
    return float(np.dot(diff, diff))


def graphs_to_matrix(graphs):
    """Stack instance graphs sharing one network into an (m, n_edges) matrix."""
    if not graphs:
        raise DataError("empty graph list")
    first = graphs[0]
    for g in graphs[1:]:
        _check_same_network(first, g)
    return np.stack([g.values for g in graphs]), first.network


def pairwise_sq_distances(V):
    """All pairwise squared euclidean distances between rows of V.

    Symmetric with an exactly zero diagonal; tiny negative values from the
    Gram expansion are clipped at zero.
    """
    V = np.asarray(V, dtype=float)
    sq = np.sum(V * V, axis=1)
    D = sq[:, None] + sq[None, :] - 2.0 * (V @ V.T)
    np.maximum(D, 0.0, out=D)
    D = 0.5 * (D + D.T)
    np.fill_diagonal(D, 0.0)
    return D


def cross_sq_distances(A, B):
    """Squared euclidean distances between rows of A and rows of B."""
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    sq_a = np.sum(A * A, axis=1)
    sq_b = np.sum(B * B, axis=1)
    D = sq_a[:, None] + sq_b[None, :] - 2.0 * (A @ B.T)
    np.maximum(D, 0.0, out=D)
    return D


def dense_matrix_view(g):
    """Scatter an instance graph to its symmetric dense matrix.

    Values land at (i, j) and (j, i); everything else, including the
    diagonal, is zero. Gathering the upper triangle over the network's edges
    reproduces ``g.values``.
    """
    n = g.network.n_features
    M = np.zeros((n, n))
    if g.network.n_edges:
        e = g.network.edges
        M[e[:, 0], e[:, 1]] = g.values
        M[e[:, 1], e[:, 0]] = g.values
    return M

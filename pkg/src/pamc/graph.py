"""Sparse graphs, KNN construction and positive-pair influence weights."""
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from . import _kernels
from .numerics import ParameterError, as_matrix

DEFAULT_KNN_K = 5


@dataclass(frozen=True, eq=False)
class SparseGraph:
    """Edge list stored in both directions, sorted by (src, dst).

    Plain graphs built by :meth:`from_edges` are undirected and loop-free.
    Weighted operator graphs returned by :func:`normalize_adjacency` and
    :func:`influence_weights` reuse this container; their weights are row
    normalised and therefore not symmetric, and ``normalize_adjacency``
    keeps the self loops of ``A + I``.
    """

    num_nodes: int
    src: np.ndarray
    dst: np.ndarray
    weights: np.ndarray | None = None

    @classmethod
    def from_edges(cls, num_nodes, pairs, weights=None):
        """Undirected graph from ``(u, v)`` pairs.

        Reversed duplicates are merged and self loops dropped. With weights,
        a duplicate pair keeps the first weight seen.
        """
        pairs = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
        if pairs.size and (pairs.min() < 0 or pairs.max() >= num_nodes):
            raise ParameterError(f"edge endpoint outside [0, {num_nodes})")
        keep = pairs[:, 0] != pairs[:, 1]
        pairs = pairs[keep]
        lo = np.minimum(pairs[:, 0], pairs[:, 1])
        hi = np.maximum(pairs[:, 0], pairs[:, 1])
        keys, first = np.unique(lo * num_nodes + hi, return_index=True)
        lo, hi = keys // num_nodes, keys % num_nodes
        src = np.concatenate([lo, hi])
        dst = np.concatenate([hi, lo])
        w = None
        if weights is not None:
            w = np.asarray(weights, dtype=np.float64)[keep][first]
            if np.any(w <= 0):
                raise ParameterError("edge weights must be positive")
            w = np.concatenate([w, w])
        order = np.lexsort((dst, src))
        return cls(int(num_nodes), src[order], dst[order], None if w is None else w[order])

    @classmethod
    def from_csr(cls, m):
        m = sp.csr_matrix(m)
        m.sum_duplicates()
        m.eliminate_zeros()
        m.sort_indices()
        coo = m.tocoo()
        return cls(m.shape[0], coo.row.astype(np.int64), coo.col.astype(np.int64),
                   coo.data.astype(np.float64))

    @property
    def num_edges(self):
        """Number of stored directed entries (twice the undirected count for plain graphs)."""
        return int(self.src.size)

    def undirected_edges(self):
        """``(u, v)`` pairs with ``u < v``."""
        m = self.src < self.dst
        return np.stack([self.src[m], self.dst[m]], axis=1)

    def edge_weights(self):
        return np.ones(self.src.size) if self.weights is None else self.weights

    def to_csr(self):
        return sp.csr_matrix((self.edge_weights(), (self.src, self.dst)),
                             shape=(self.num_nodes, self.num_nodes))

    def csr_arrays(self):
        """``(indptr, indices, weights)`` for the kernels."""
        indptr = np.zeros(self.num_nodes + 1, dtype=np.int64)
        np.cumsum(np.bincount(self.src, minlength=self.num_nodes), out=indptr[1:])
        return indptr, np.ascontiguousarray(self.dst, dtype=np.int64), \
            np.ascontiguousarray(self.edge_weights(), dtype=np.float64)

    def degrees(self):
        return np.bincount(self.src, minlength=self.num_nodes)

    def is_symmetric(self):
        a = self.to_csr()
        return (abs(a - a.T) > 1e-15).nnz == 0

    def has_self_loops(self):
        return bool(np.any(self.src == self.dst))


def build_knn_graph(features, k=DEFAULT_KNN_K, metric="euclidean"):
    """Each node linked to its ``k`` nearest neighbours, symmetrised by union."""
    x = as_matrix(features, "features")
    n = x.shape[0]
    if k < 1 or k >= n:
        raise ParameterError(f"knn k must satisfy 1 <= k < {n}, got {k}")
    if metric == "cosine":
        norms = np.maximum(np.linalg.norm(x, axis=1, keepdims=True), 1e-12)
        x = x / norms
    elif metric != "euclidean":
        raise ParameterError(f"unknown knn metric {metric!r}")
    nbrs = _kernels.knn(x, int(k))
    src = np.repeat(np.arange(n), k)
    return SparseGraph.from_edges(n, np.stack([src, nbrs.reshape(-1)], axis=1))


def _normalized_csr(g):
    a = g.to_csr() + sp.identity(g.num_nodes, format="csr")
    inv = 1.0 / np.asarray(a.sum(axis=1)).ravel()
    return sp.diags(inv) @ a


def normalize_adjacency(g):
    """``(D + I)^-1 (A + I)``; every row sums to one."""
    return SparseGraph.from_csr(_normalized_csr(g))


def influence_weights(g, order_k=1):
    """Positive-pair weights from cumulative powers of the normalised adjacency.

    ``gamma = rownorm(offdiag(mean_{r=1..K} A_hat^r))``. Nodes without any
    neighbour keep an empty row.
    """
    if order_k < 1:
        raise ParameterError(f"influence order must be >= 1, got {order_k}")
    a_hat = _normalized_csr(g).tocsr()
    power = a_hat
    total = a_hat.copy()
    for _ in range(order_k - 1):
        power = power @ a_hat
        total = total + power
    total = (total / order_k).tolil()
    total.setdiag(0.0)
    total = total.tocsr()
    total.eliminate_zeros()
    rows = np.asarray(total.sum(axis=1)).ravel()
    inv = np.where(rows > 0, 1.0 / np.where(rows > 0, rows, 1.0), 0.0)
    return SparseGraph.from_csr(sp.diags(inv) @ total)

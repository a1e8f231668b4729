"""Cluster state: k-means centroids, soft assignments, targets and meta-nodes.

Functions taking embeddings accept either arrays or :class:`~pamc.autodiff.Tensor`
objects. Array in, array out; any tensor input makes the result a tensor
wired into the gradient tape.
"""
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from . import autodiff as ad
from .numerics import DegenerateClusterError, ParameterError, make_rng


def _any_tensor(*xs):
    return any(isinstance(x, ad.Tensor) for x in xs)


def _out(result, *inputs):
    return result if _any_tensor(*inputs) else result.value


def _sqdist(a, b):
    diff = a[:, None, :] - b[None, :, :]
    return np.einsum("iuk,iuk->iu", diff, diff)


def _kmeans_pp(z, c, rng):
    n = z.shape[0]
    chosen = [int(rng.integers(n))]
    d2 = _sqdist(z, z[chosen]).min(axis=1)
    for _ in range(1, c):
        total = d2.sum()
        if total > 0:
            nxt = int(rng.choice(n, p=d2 / total))
        else:
            # all remaining points coincide with a centre
            free = np.setdiff1d(np.arange(n), chosen)
            nxt = int(rng.choice(free))
        chosen.append(nxt)
        d2 = np.minimum(d2, _sqdist(z, z[[nxt]])[:, 0])
    return z[chosen].copy()


def kmeans_init(z, c, seed=0, max_iter=300):
    """Lloyd's algorithm from k-means++ seeds.

    An empty cluster is re-seeded with the point farthest from its current
    centroid. Stops when assignments no longer change.
    """
    z = np.asarray(ad.as_tensor(z).value, dtype=np.float64)
    n = z.shape[0]
    if c < 2:
        raise ParameterError("kmeans needs c >= 2")
    if c > n:
        raise ParameterError(f"cannot form {c} clusters from {n} points")
    rng = make_rng(seed)
    centers = _kmeans_pp(z, c, rng)
    assign = None
    for _ in range(max_iter):
        d2 = _sqdist(z, centers)
        new = d2.argmin(axis=1)
        counts = np.bincount(new, minlength=c)
        for u in np.flatnonzero(counts == 0):
            own = d2[np.arange(n), new]
            far = int(np.argmax(own))
            new[far] = u
            own[far] = -1.0
            counts = np.bincount(new, minlength=c)
        if assign is not None and np.array_equal(new, assign):
            break
        assign = new
        for u in range(c):
            centers[u] = z[assign == u].mean(axis=0)
    return centers


def soft_assign(z, centroids, eta=1.0):
    """Student-t kernel assignments, one row-stochastic row per node."""
    if eta <= 0:
        raise ParameterError("eta must be positive")
    d2 = ad.pairwise_sqdist(ad.as_tensor(z), ad.as_tensor(centroids))
    k = ad.power(ad.add(ad.mul(d2, 1.0 / eta), 1.0), -(eta + 1.0) / 2.0)
    q = ad.div(k, ad.sum(k, axis=1, keepdims=True))
    return _out(q, z, centroids)


def target_distribution(q):
    """Sharpened targets ``q^2 / f`` renormalised per row; constant w.r.t. the tape."""
    q = np.asarray(ad.as_tensor(q).value)
    f = q.sum(axis=0)
    if np.any(f <= 0):
        raise DegenerateClusterError(f"clusters {np.flatnonzero(f <= 0).tolist()} have zero soft frequency")
    w = q * q / f
    return w / w.sum(axis=1, keepdims=True)


def hard_labels(q):
    """Row argmax; ties go to the lower cluster index."""
    return np.asarray(ad.as_tensor(q).value).argmax(axis=1)


class MetaNodes(NamedTuple):
    centers: object
    empty: int


def meta_nodes(z, labels, c, centroids=None):
    """Per-cluster mean embedding.

    Gradients reach every member embedding. An empty cluster takes the
    matching row of ``centroids`` as a constant (no gradient) and is counted
    in ``MetaNodes.empty``.
    """
    zt = ad.as_tensor(z)
    labels = np.asarray(labels, dtype=np.int64)
    n = zt.shape[0]
    if labels.shape != (n,) or (n and (labels.min() < 0 or labels.max() >= c)):
        raise ParameterError(f"labels must be {n} ids in [0, {c})")
    counts = np.bincount(labels, minlength=c).astype(np.float64)
    empty = np.flatnonzero(counts == 0)
    if empty.size and centroids is None:
        raise ParameterError(f"clusters {empty.tolist()} are empty and no fallback centroids were given")

    member = np.zeros((c, n))
    member[labels, np.arange(n)] = 1.0
    scale = np.where(counts > 0, 1.0 / np.where(counts > 0, counts, 1.0), 0.0)
    mu_hat = ad.matmul(ad.Tensor(member * scale[:, None]), zt)
    if empty.size:
        fill = np.zeros((c, zt.shape[1]))
        fill[empty] = np.asarray(ad.as_tensor(centroids).value)[empty]
        mu_hat = ad.add(mu_hat, ad.Tensor(fill))
    return MetaNodes(_out(mu_hat, z), int(empty.size))


@dataclass(eq=False)
class ClusterState:
    """Learnable centroids plus the per-epoch Q, P and meta-node snapshot."""

    centroids: ad.Tensor
    eta: float = 1.0
    q: np.ndarray | None = None
    p: np.ndarray | None = None
    meta_nodes: np.ndarray | None = None
    labels: np.ndarray | None = None
    empty_count: int = 0

    @property
    def num_clusters(self):
        return self.centroids.shape[0]

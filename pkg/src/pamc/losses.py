"""Contrastive, proxy and clustering losses.

Similarity is cosine with the self-pair forced to zero, and the temperature
*multiplies* it: ``exp(sim * tau)``. Embedding arguments may be arrays or
tensors; scalar results come back as floats for array input and as
tensors otherwise.
"""
import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from . import _kernels
from . import autodiff as ad
from .clustering import hard_labels, meta_nodes, soft_assign, target_distribution
from .numerics import DimensionError, ParameterError


def _result(t, *inputs):
    if any(isinstance(x, ad.Tensor) for x in inputs):
        return t
    return float(t.value)


def cosine_sim(zi, zj, same_index=False):
    if same_index:
        return 0.0
    zi = np.asarray(zi, dtype=np.float64)
    zj = np.asarray(zj, dtype=np.float64)
    ni = max(np.linalg.norm(zi), 1e-12)
    nj = max(np.linalg.norm(zj), 1e-12)
    return float(zi @ zj / (ni * nj))


def similarity_matrix(z):
    """Cosine similarity between all rows with a zero diagonal."""
    zn = ad.row_normalize(ad.as_tensor(z))
    s = ad.matmul(zn, ad.transpose(zn))
    off = 1.0 - np.eye(zn.shape[0])
    return ad.mul(s, off)


# positive term ----------------------------------------------------------------

def _edge_logsumexp(zn, graph, tau):
    indptr, indices, weights = graph.csr_arrays()
    val = _kernels.edge_logsumexp(zn.value, indptr, indices, weights, float(tau))

    def backward(g):
        g = np.where(np.isnan(val), 0.0, g)
        return (_kernels.edge_logsumexp_grad(zn.value, indptr, indices, weights,
                                             float(tau), val, g),)

    return ad.make_op(val, (zn,), backward)


class PositiveTerm(NamedTuple):
    loss: object
    isolated: int


def positive_term(z, gamma, tau):
    """Positive part touching only stored edges; returns the loss and the
    number of nodes without positives (excluded from the mean)."""
    zt = ad.as_tensor(z)
    if gamma.num_nodes != zt.shape[0]:
        raise DimensionError(f"graph has {gamma.num_nodes} nodes, embeddings have {zt.shape[0]} rows")
    lse = _edge_logsumexp(ad.row_normalize(zt), gamma, tau)
    valid = ~np.isnan(lse.value)
    isolated = int((~valid).sum())
    if not valid.any():
        raise ParameterError("no node has a positive neighbour")
    w = np.where(valid, -1.0 / valid.sum(), 0.0)
    masked = ad.mul(ad.make_op(np.where(valid, lse.value, 0.0), (lse,), lambda g: (g,)), w)
    return PositiveTerm(_result(ad.sum(masked), z), isolated)


def positive_loss_sparse(z, gamma, tau):
    return positive_term(z, gamma, tau).loss


# proxy and bound losses -------------------------------------------------------

def proxy_loss(mu_hat, tau):
    """``log sum_{a != b} exp(sim(mu_a, mu_b) * tau)`` over ordered pairs."""
    m = ad.as_tensor(mu_hat)
    c = m.shape[0]
    if c < 2:
        raise ParameterError("proxy loss needs at least two meta-nodes")
    s = similarity_matrix(m)
    return _result(ad.logsumexp(ad.mul(s, float(tau)), mask=~np.eye(c, dtype=bool)), mu_hat)


def pcontrast_loss(z, gamma, mu_hat, tau, use_proxy=True):
    pos = positive_loss_sparse(z, gamma, tau)
    if not use_proxy:
        return pos
    return pos + proxy_loss(mu_hat, tau)


def _row_lse_mean(x, tau):
    s = similarity_matrix(x)
    return ad.mean(ad.logsumexp(ad.mul(s, float(tau)), axis=1))


def loss_nn(z, tau):
    """Mean over nodes of ``log sum_j exp(sim_ij tau)``; the self term adds ``e^0``."""
    if ad.as_tensor(z).shape[0] < 2:
        raise ParameterError("loss_nn needs at least two nodes")
    return _result(_row_lse_mean(z, tau), z)


def loss_cc(mu_hat, tau):
    """Cluster-level counterpart of :func:`loss_nn`."""
    if ad.as_tensor(mu_hat).shape[0] < 2:
        raise ParameterError("loss_cc needs at least two meta-nodes")
    return _result(_row_lse_mean(mu_hat, tau), mu_hat)


# dense reference --------------------------------------------------------------

class TraditionalLoss(NamedTuple):
    per_node: np.ndarray
    mean: float
    excluded: int


def loss_traditional(z, gamma, tau):
    """Dense O(N^2) contrastive loss with every other node as a negative.

    Nodes without positive neighbours get NaN, are left out of the mean and
    counted in ``excluded``.
    """
    zn = ad.row_normalize(ad.as_tensor(z)).value
    if gamma.num_nodes != zn.shape[0]:
        raise DimensionError(f"graph has {gamma.num_nodes} nodes, embeddings have {zn.shape[0]} rows")
    indptr, indices, weights = gamma.csr_arrays()
    per = _kernels.dense_contrastive(zn, indptr, indices, weights, float(tau))
    valid = ~np.isnan(per)
    mean = float(per[valid].mean()) if valid.any() else math.nan
    return TraditionalLoss(per, mean, int((~valid).sum()))


# clustering loss ----------------------------------------------------------------

def kl_cluster_loss(p, q):
    """``sum_i sum_u p log(p / q)``; ``0 log 0 = 0`` and ``q`` floored at 1e-12.

    ``p`` is a constant target; gradients flow into ``q`` only.
    """
    p = np.asarray(ad.as_tensor(p).value)
    qt = ad.as_tensor(q)
    if p.shape != qt.shape:
        raise DimensionError(f"P has shape {p.shape}, Q has shape {qt.shape}")
    pos = p > 0
    entropy_part = float(np.sum(p[pos] * np.log(p[pos])))
    cross = ad.sum(ad.mul(ad.log(ad.clamp_min(qt, 1e-12)), p))
    return _result(ad.sub(entropy_part, cross), q)


# combined objective ---------------------------------------------------------------

@dataclass
class LossBreakdown:
    positive_term: float
    proxy_term: float
    kl_term: float
    total: float
    tau: float
    alpha: float
    beta: float
    isolated: int = 0
    empty_clusters: int = 0
    tensor: object = field(default=None, repr=False, compare=False)


def total_loss(z, gamma, state, hp):
    """``alpha * (positive + proxy) + beta * KL(P || Q)``.

    Q comes from the state's centroids, meta-nodes from the argmax of Q.
    ``state.p`` is used as the target when set, otherwise it is derived from
    this Q. The state's q/p/labels/meta_nodes snapshot is refreshed.
    """
    zt = ad.as_tensor(z)
    c = state.num_clusters
    q = soft_assign(zt, state.centroids, state.eta)
    if not isinstance(q, ad.Tensor):
        q = ad.Tensor(q)
    p = state.p if state.p is not None else target_distribution(q.value)
    labels = hard_labels(q.value)
    mh = meta_nodes(zt, labels, c, state.centroids)
    mu_hat = mh.centers if isinstance(mh.centers, ad.Tensor) else ad.Tensor(mh.centers)

    pos = positive_term(zt, gamma, hp.tau)
    pos_t = ad.as_tensor(pos.loss)
    proxy_t = ad.as_tensor(proxy_loss(mu_hat, hp.tau))
    kl_t = ad.as_tensor(kl_cluster_loss(p, q))
    total = ad.add(ad.mul(ad.add(pos_t, proxy_t), hp.alpha), ad.mul(kl_t, hp.beta))

    state.q, state.p, state.labels = q.value, p, labels
    state.meta_nodes, state.empty_count = mu_hat.value, mh.empty
    return LossBreakdown(
        positive_term=float(pos_t.value), proxy_term=float(proxy_t.value),
        kl_term=float(kl_t.value), total=float(total.value),
        tau=hp.tau, alpha=hp.alpha, beta=hp.beta,
        isolated=pos.isolated, empty_clusters=mh.empty, tensor=total,
    )

"""Hot loops, each with a numba and a pure-numpy implementation.

The public names (``edge_logsumexp`` etc.) are bound at import time to the
numba versions unless ``PAMC_DISABLE_NUMBA=1`` is set or numba cannot be
imported. Both variants stay importable as ``<name>_numba`` /
``<name>_numpy`` so tests and benchmarks can compare them directly.

All kernels expect row-normalised embeddings where a similarity is involved
and a CSR triple ``(indptr, indices, weights)`` for sparse weights.
"""
import os

import numpy as np
import scipy.sparse as sp

try:
    from numba import njit
    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    HAVE_NUMBA = False

USE_NUMBA = HAVE_NUMBA and os.environ.get("PAMC_DISABLE_NUMBA", "0") not in ("1", "true", "yes")

_ROW_CHUNK = 512


# --- sparse weighted log-sum-exp over stored edges ---------------------------
#   out[i] = log sum_{p in row i} w_p * exp(tau * <zn_i, zn_{col_p}>)
#   rows without edges give NaN.

def edge_logsumexp_numpy(zn, indptr, indices, weights, tau):
    n = zn.shape[0]
    counts = np.diff(indptr)
    rows = np.repeat(np.arange(n), counts)
    s = tau * np.einsum("ij,ij->i", zn[rows], zn[indices]) + np.log(weights)
    m = np.full(n, -np.inf)
    np.maximum.at(m, rows, s)
    acc = np.bincount(rows, weights=np.exp(s - m[rows]), minlength=n)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(counts > 0, m + np.log(acc), np.nan)
    return out


def edge_logsumexp_grad_numpy(zn, indptr, indices, weights, tau, lse, gout):
    n = zn.shape[0]
    counts = np.diff(indptr)
    rows = np.repeat(np.arange(n), counts)
    s = tau * np.einsum("ij,ij->i", zn[rows], zn[indices]) + np.log(weights)
    coef = gout[rows] * np.exp(s - lse[rows]) * tau
    w = sp.csr_matrix((coef, indices, indptr), shape=(n, n))
    return np.asarray(w @ zn + w.T @ zn)


# --- dense contrastive loss with all node pairs as negatives ------------------
#   loss[i] = log sum_{k != i} exp(tau s_ik) - log sum_j g_ij exp(tau s_ij)

def dense_contrastive_numpy(zn, indptr, indices, weights, tau):
    n = zn.shape[0]
    shift = abs(tau)
    den = np.empty(n)
    for start in range(0, n, _ROW_CHUNK):
        stop = min(start + _ROW_CHUNK, n)
        e = np.exp(tau * (zn[start:stop] @ zn.T) - shift)
        e[np.arange(stop - start), np.arange(start, stop)] = 0.0
        den[start:stop] = np.log(e.sum(axis=1)) + shift
    return den - edge_logsumexp_numpy(zn, indptr, indices, weights, tau)


# --- exact k nearest neighbours (Euclidean, ties to lower index) --------------

def knn_numpy(x, k):
    n = x.shape[0]
    out = np.empty((n, k), dtype=np.int64)
    for start in range(0, n, _ROW_CHUNK):
        stop = min(start + _ROW_CHUNK, n)
        diff = x[start:stop, None, :] - x[None, :, :]
        d = np.einsum("ijk,ijk->ij", diff, diff)
        d[np.arange(stop - start), np.arange(start, stop)] = np.inf
        out[start:stop] = np.argsort(d, axis=1, kind="stable")[:, :k]
    return out


if HAVE_NUMBA:

    @njit(cache=True)
    def edge_logsumexp_numba(zn, indptr, indices, weights, tau):
        n, dim = zn.shape
        out = np.empty(n)
        for i in range(n):
            a, b = indptr[i], indptr[i + 1]
            if a == b:
                out[i] = np.nan
                continue
            m = -np.inf
            for p in range(a, b):
                j = indices[p]
                dot = 0.0
                for t in range(dim):
                    dot += zn[i, t] * zn[j, t]
                s = tau * dot + np.log(weights[p])
                if s > m:
                    m = s
            acc = 0.0
            for p in range(a, b):
                j = indices[p]
                dot = 0.0
                for t in range(dim):
                    dot += zn[i, t] * zn[j, t]
                acc += np.exp(tau * dot + np.log(weights[p]) - m)
            out[i] = m + np.log(acc)
        return out

    @njit(cache=True)
    def edge_logsumexp_grad_numba(zn, indptr, indices, weights, tau, lse, gout):
        n, dim = zn.shape
        grad = np.zeros((n, dim))
        for i in range(n):
            gi = gout[i]
            if gi == 0.0:
                continue
            for p in range(indptr[i], indptr[i + 1]):
                j = indices[p]
                dot = 0.0
                for t in range(dim):
                    dot += zn[i, t] * zn[j, t]
                c = gi * np.exp(tau * dot + np.log(weights[p]) - lse[i]) * tau
                for t in range(dim):
                    grad[i, t] += c * zn[j, t]
                    grad[j, t] += c * zn[i, t]
        return grad

    @njit(cache=True)
    def dense_contrastive_numba(zn, indptr, indices, weights, tau):
        n, dim = zn.shape
        shift = abs(tau)
        out = np.empty(n)
        for i in range(n):
            acc = 0.0
            for k in range(n):
                if k == i:
                    continue
                dot = 0.0
                for t in range(dim):
                    dot += zn[i, t] * zn[k, t]
                acc += np.exp(tau * dot - shift)
            out[i] = np.log(acc) + shift
        return out - edge_logsumexp_numba(zn, indptr, indices, weights, tau)

    @njit(cache=True)
    def knn_numba(x, k):
        n, dim = x.shape
        out = np.empty((n, k), dtype=np.int64)
        d = np.empty(n)
        for i in range(n):
            for j in range(n):
                if j == i:
                    d[j] = np.inf
                    continue
                acc = 0.0
                for t in range(dim):
                    diff = x[i, t] - x[j, t]
                    acc += diff * diff
                d[j] = acc
            order = np.argsort(d, kind="mergesort")
            for q in range(k):
                out[i, q] = order[q]
        return out

else:  # pragma: no cover
    edge_logsumexp_numba = edge_logsumexp_numpy
    edge_logsumexp_grad_numba = edge_logsumexp_grad_numpy
    dense_contrastive_numba = dense_contrastive_numpy
    knn_numba = knn_numpy


if USE_NUMBA:
    edge_logsumexp = edge_logsumexp_numba
    edge_logsumexp_grad = edge_logsumexp_grad_numba
    dense_contrastive = dense_contrastive_numba
    knn = knn_numba
else:
    edge_logsumexp = edge_logsumexp_numpy
    edge_logsumexp_grad = edge_logsumexp_grad_numpy
    dense_contrastive = dense_contrastive_numpy
    knn = knn_numpy


def backend():
    return "numba" if USE_NUMBA else "numpy"

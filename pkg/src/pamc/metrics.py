"""Clustering evaluation: Hungarian-matched accuracy, NMI, ARI and macro-F1.

Degenerate NMI conventions (natural logs, arithmetic-mean normalisation):

=====================  ==========================  ======
H(true)                H(pred)                      NMI
=====================  ==========================  ======
0                      0                            1.0 (both single-cluster, identical)
0 or > 0               one of them 0, other > 0    0.0 (no shared information)
> 0                    > 0                          I / ((H_t + H_p) / 2)
=====================  ==========================  ======
"""
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment


class MetricInputError(ValueError):
    pass


def hungarian(cost):
    """Minimum-cost assignment as ``row -> column`` indices.

    Rectangular inputs are padded to square with a constant larger than any
    entry; rows matched to a padding column map to ``-1``.
    """
    cost = np.asarray(cost, dtype=np.float64)
    if cost.ndim != 2:
        raise MetricInputError(f"cost must be 2-D, got shape {cost.shape}")
    if not np.all(np.isfinite(cost)):
        raise MetricInputError("cost matrix has non-finite entries")
    r, c = cost.shape
    size = max(r, c)
    if r != c:
        pad = (np.abs(cost).max() if cost.size else 0.0) * 2.0 + 1.0
        full = np.full((size, size), pad)
        full[:r, :c] = cost
    else:
        full = cost
    rows, cols = linear_sum_assignment(full)
    out = np.full(r, -1, dtype=np.int64)
    for i, j in zip(rows, cols):
        if i < r and j < c:
            out[i] = j
    return out


@dataclass(frozen=True)
class ContingencyTable:
    counts: np.ndarray  # true classes x predicted clusters
    true_ids: np.ndarray
    pred_ids: np.ndarray

    @property
    def n(self):
        return int(self.counts.sum())

    @property
    def row_sums(self):
        return self.counts.sum(axis=1)

    @property
    def col_sums(self):
        return self.counts.sum(axis=0)


def contingency(y_true, y_pred):
    y_true = np.asarray(y_true)
    y_pred = np.asarray(y_pred)
    if y_true.shape != y_pred.shape or y_true.ndim != 1:
        raise MetricInputError(f"label vectors differ: {y_true.shape} vs {y_pred.shape}")
    if y_true.size == 0:
        raise MetricInputError("empty label vectors")
    t_ids, t = np.unique(y_true, return_inverse=True)
    p_ids, p = np.unique(y_pred, return_inverse=True)
    counts = np.zeros((t_ids.size, p_ids.size), dtype=np.int64)
    np.add.at(counts, (t, p), 1)
    return ContingencyTable(counts, t_ids, p_ids)


def _cluster_to_class(table):
    """Predicted-cluster index -> true-class index (or -1) maximising matches.

    Ties between equally accurate mappings are broken by the larger summed
    per-class F1, which is linear in the matched pairs. The bonus is kept
    below 1 so it never outweighs a single extra hit, and it makes the
    choice independent of how clusters happen to be numbered.
    """
    counts = table.counts.astype(np.float64)
    f1 = 2.0 * counts / (table.row_sums[:, None] + table.col_sums[None, :])
    bonus = f1 / (min(counts.shape) + 1.0)
    return hungarian(-(counts + bonus).T)


def clustering_accuracy(y_true, y_pred):
    table = contingency(y_true, y_pred)
    mapping = _cluster_to_class(table)
    hits = sum(table.counts[k, j] for j, k in enumerate(mapping) if k >= 0)
    return hits / table.n


def _entropy(counts):
    p = counts[counts > 0] / counts.sum()
    return float(-np.sum(p * np.log(p)))


def nmi(y_true, y_pred):
    table = contingency(y_true, y_pred)
    h_t, h_p = _entropy(table.row_sums), _entropy(table.col_sums)
    if h_t == 0.0 and h_p == 0.0:
        return 1.0
    if h_t == 0.0 or h_p == 0.0:
        return 0.0
    n = table.n
    nz = table.counts > 0
    pij = table.counts[nz] / n
    outer = np.outer(table.row_sums, table.col_sums)[nz] / (n * n)
    mi = float(np.sum(pij * np.log(pij / outer)))
    return max(0.0, min(1.0, mi / ((h_t + h_p) / 2.0)))


def _pairs(counts):
    counts = np.asarray(counts, dtype=np.int64)
    return int((counts * (counts - 1) // 2).sum())


def ari(y_true, y_pred):
    """Adjusted Rand index from integer pair counts, so only the final division rounds."""
    table = contingency(y_true, y_pred)
    sum_ij = _pairs(table.counts)
    sum_a, sum_b = _pairs(table.row_sums), _pairs(table.col_sums)
    total = _pairs([table.n])
    # (index - expected) / (max - expected), scaled by 2 * total
    num = 2 * (sum_ij * total - sum_a * sum_b)
    den = (sum_a + sum_b) * total - 2 * sum_a * sum_b
    if den == 0:
        return 1.0
    return num / den


def macro_f1(y_true, y_pred):
    """Unweighted mean of per-class F1 after the accuracy-optimal relabelling."""
    table = contingency(y_true, y_pred)
    mapping = _cluster_to_class(table)
    n_cls = table.counts.shape[0]
    pred_size = np.zeros(n_cls)
    tp = np.zeros(n_cls)
    for j, k in enumerate(mapping):
        if k >= 0:
            pred_size[k] += table.col_sums[j]
            tp[k] += table.counts[k, j]
    true_size = table.row_sums
    f1 = np.zeros(n_cls)
    hit = tp > 0
    prec = tp[hit] / pred_size[hit]
    rec = tp[hit] / true_size[hit]
    f1[hit] = 2 * prec * rec / (prec + rec)
    return float(f1.mean())


def evaluate(y_true, y_pred):
    return dict(acc=clustering_accuracy(y_true, y_pred), nmi=nmi(y_true, y_pred),
                ari=ari(y_true, y_pred), f1=macro_f1(y_true, y_pred))

"""Closed-form loss bounds and an empirical audit of them.

For similarities in [0, 1] the node-level loss is at least ``log N`` and the
cluster-level loss at most ``log(1 + (C - 1) e^tau)``; whenever
``N > 1 + (C - 1) e^tau`` the first strictly exceeds the second.
"""
import csv
import itertools
import math
from dataclasses import dataclass

import numpy as np

from .clustering import meta_nodes
from .losses import loss_cc, loss_nn
from .numerics import ParameterError, derive_seed, make_rng

# (N, C, tau) per benchmark dataset
DATASET_POINTS = {
    "usps": (9298, 10, 0.5),
    "hhar": (10299, 6, 1.5),
    "reut": (10000, 4, 0.25),
    "acm": (3025, 3, 0.5),
    "cite": (3327, 6, 1.0),
    "dblp": (4057, 4, 0.5),
}


def cc_threshold(c, tau):
    return 1.0 + (c - 1) * math.exp(tau)


@dataclass(frozen=True)
class BoundReport:
    n: int
    c: int
    tau: float
    loss_nn_min: float
    loss_cc_max: float
    ratio_lower_bound: float
    condition_holds: bool


def bound_report(n, c, tau):
    if n < 2 or c < 2:
        raise ParameterError("need n >= 2 and c >= 2")
    thr = cc_threshold(c, tau)
    nn_min = math.log(n)
    cc_max = math.log(thr)
    return BoundReport(n, c, float(tau), nn_min, cc_max, nn_min / cc_max, n > thr)


def boundary_surface(n_range, c_range, tau_list):
    """Rows ``(n, c, tau, ratio)`` over the full Cartesian grid."""
    n_range, c_range, tau_list = list(n_range), list(c_range), list(tau_list)
    if not (n_range and c_range and tau_list):
        raise ParameterError("n, c and tau ranges must be non-empty")
    return [(n, c, tau, bound_report(n, c, tau).ratio_lower_bound)
            for tau, c, n in itertools.product(tau_list, c_range, n_range)]


def write_surface_csv(fh, rows):
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["n", "c", "tau", "ratio"])
    for n, c, tau, ratio in rows:
        w.writerow([n, c, repr(float(tau)), repr(float(ratio))])


@dataclass(frozen=True)
class AuditResult:
    passed: bool
    trials: int
    condition_holds: bool
    nn_margin: float  # min over trials of loss_nn - log n
    cc_margin: float  # min over trials of log(1+(c-1)e^tau) - loss_cc
    gap_margin: float  # min over trials of loss_nn - loss_cc
    counterexamples: int


def empirical_bound_audit(trials=1000, n=64, c=4, d_z=10, tau=0.5, seed=0):
    """Random non-negative embeddings with balanced random labels.

    Checks both extremal bounds every trial, and the strict ordering of the
    two losses only when the size condition holds.
    """
    if trials < 1:
        raise ParameterError("trials must be >= 1")
    report = bound_report(n, c, tau)
    nn_margin = cc_margin = gap_margin = math.inf
    bad = 0
    for t in range(trials):
        rng = make_rng(derive_seed(seed, t))
        z = np.abs(rng.standard_normal((n, d_z)))
        labels = rng.permutation(np.arange(n) % c)
        mu_hat = meta_nodes(z, labels, c).centers
        lnn = loss_nn(z, tau)
        lcc = loss_cc(mu_hat, tau)
        a = lnn - report.loss_nn_min
        b = report.loss_cc_max - lcc
        ok = a >= 0 and b >= 0
        nn_margin, cc_margin = min(nn_margin, a), min(cc_margin, b)
        if report.condition_holds:
            gap = lnn - lcc
            gap_margin = min(gap_margin, gap)
            ok = ok and gap > 0
        bad += not ok
    if not report.condition_holds:
        gap_margin = math.nan
    return AuditResult(bad == 0, trials, report.condition_holds,
                       nn_margin, cc_margin, gap_margin, bad)

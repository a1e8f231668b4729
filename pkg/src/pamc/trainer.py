"""End-to-end training loop and the loss-scaling benchmark."""
import csv
import logging
import math
import time
from dataclasses import dataclass, field, replace

import numpy as np

from . import autodiff as ad
from .clustering import ClusterState, kmeans_init, meta_nodes, soft_assign, target_distribution
from .graph import SparseGraph, influence_weights
from .losses import loss_traditional, positive_loss_sparse, proxy_loss, total_loss
from .metrics import evaluate
from .model import encode_tensor
from .numerics import NumericalError, ParameterError, derive_seed, make_rng

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class Hyperparams:
    alpha: float = 1.0
    beta: float = 1.0
    influence_k: int = 1
    tau: float = 0.5
    eta: float = 1.0
    lr: float = 1e-3
    epochs: int = 200
    seed: int = 0
    clusters_c: int = 2

    def __post_init__(self):
        if self.alpha < 0 or self.beta < 0:
            raise ParameterError("alpha and beta must be non-negative")
        if self.tau <= 0 or self.eta <= 0:
            raise ParameterError("tau and eta must be positive")
        if self.influence_k < 1 or self.epochs < 0:
            raise ParameterError("influence_k must be >= 1 and epochs >= 0")


# alpha, beta, K, tau, training LR and C per benchmark dataset
PRESETS = {
    "usps": Hyperparams(alpha=2, beta=2, influence_k=4, tau=0.5, lr=1e-3, clusters_c=10),
    "hhar": Hyperparams(alpha=0.5, beta=12.5, influence_k=2, tau=1.5, lr=1e-3, clusters_c=6),
    "reut": Hyperparams(alpha=1, beta=0.2, influence_k=1, tau=0.25, lr=1e-4, clusters_c=4),
    "acm": Hyperparams(alpha=0.5, beta=0.5, influence_k=1, tau=0.5, lr=1e-3, clusters_c=3),
    "cite": Hyperparams(alpha=2, beta=2, influence_k=1, tau=1.0, lr=1e-3, clusters_c=6),
    "dblp": Hyperparams(alpha=2, beta=2.5, influence_k=3, tau=0.5, lr=1e-3, clusters_c=4),
}

# autoencoder pretraining learning rate per dataset
PRETRAIN_LR = {"usps": 1e-3, "hhar": 1e-3, "acm": 1e-3, "dblp": 1e-3, "reut": 1e-4, "cite": 1e-4}


@dataclass
class TrainRecord:
    epoch: int
    total: float
    positive: float
    proxy: float
    kl: float
    acc: float | None = None
    nmi: float | None = None
    ari: float | None = None
    f1: float | None = None
    empty_clusters: int = 0
    wall_ms: float = 0.0


CURVE_HEADER = ["epoch", "total", "positive", "proxy", "kl", "acc", "nmi", "ari", "f1"]


def write_curve_csv(path, history):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CURVE_HEADER)
        for r in history:
            row = [r.epoch] + [repr(v) for v in (r.total, r.positive, r.proxy, r.kl)]
            row += ["" if v is None else repr(float(v)) for v in (r.acc, r.nmi, r.ari, r.f1)]
            w.writerow(row)


class TrainingDiverged(NumericalError):
    """Raised on a non-finite loss; carries the last finite snapshot."""

    def __init__(self, message, epoch, last_good, history):
        super().__init__(message)
        self.epoch = epoch
        self.last_good = last_good
        self.history = history


@dataclass(eq=False)
class TrainResult:
    embeddings: np.ndarray
    labels: np.ndarray
    history: list
    params: object
    state: ClusterState
    gamma: SparseGraph = field(repr=False, default=None)


def run_training(dataset, hp, pretrained):
    """Joint contrastive + self-supervised clustering on one dataset.

    Only encoder weights and centroids are optimised; the decoder stays at
    its pretrained values. Each epoch is one full-batch Adam step whose
    target distribution and meta-node labels come from that epoch's Q.
    """
    if dataset.graph is None:
        raise ParameterError("training needs a graph; load edges or build a KNN graph")
    if hp.clusters_c < 2:
        raise ParameterError("clusters_c must be >= 2")

    params = pretrained.copy()
    x = dataset.features
    gamma = influence_weights(dataset.graph, hp.influence_k)

    z0 = encode_tensor(params, x).value
    centroids = ad.parameter(kmeans_init(z0, hp.clusters_c, seed=derive_seed(hp.seed, 1)))
    state = ClusterState(centroids=centroids, eta=hp.eta)
    trainable = params.encoder_tensors() + [centroids]
    opt = ad.Adam(trainable, lr=hp.lr)

    def snapshot():
        return [t.value.copy() for t in trainable]

    last_good = snapshot()
    history = []
    for epoch in range(1, hp.epochs + 1):
        t0 = time.perf_counter()
        opt.zero_grad()
        z = encode_tensor(params, x)
        state.p = target_distribution(_soft(z, state))
        br = total_loss(z, gamma, state, hp)
        if not math.isfinite(br.total):
            raise TrainingDiverged(f"non-finite loss at epoch {epoch}", epoch, last_good, history)
        last_good = snapshot()
        rec = TrainRecord(epoch, br.total, br.positive_term, br.proxy_term, br.kl_term,
                          empty_clusters=br.empty_clusters)
        if dataset.labels is not None:
            m = evaluate(dataset.labels, state.labels)
            rec.acc, rec.nmi, rec.ari, rec.f1 = m["acc"], m["nmi"], m["ari"], m["f1"]
        br.tensor.backward()
        opt.step()
        rec.wall_ms = (time.perf_counter() - t0) * 1e3
        history.append(rec)
        if epoch == 1 or epoch % 20 == 0:
            log.info("epoch %d loss %.5f acc %s", epoch, br.total, rec.acc)

    z = encode_tensor(params, x).value
    q = _soft(z, state)
    state.q = q
    labels = q.argmax(axis=1)
    state.labels = labels
    return TrainResult(z, labels, history, params, state, gamma)


def _soft(z, state):
    return soft_assign(ad.as_tensor(z).value, state.centroids.value, state.eta)


# --- complexity benchmark ----------------------------------------------------------

def random_graph(n, avg_degree, rng):
    """Uniform random undirected graph with about ``n * avg_degree / 2`` edges."""
    m = int(round(n * avg_degree / 2))
    pairs = rng.integers(0, n, size=(m, 2))
    g = SparseGraph.from_edges(n, pairs)
    # isolated nodes would leave the positive term undefined for them
    lonely = np.flatnonzero(g.degrees() == 0)
    if lonely.size:
        extra = np.stack([lonely, (lonely + 1) % n], axis=1)
        g = SparseGraph.from_edges(n, np.concatenate([g.undirected_edges(), extra]))
    return g


def _median_ms(fn, repeats):
    fn()  # warm-up, also triggers JIT compilation
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        times.append((time.perf_counter() - t0) * 1e3)
    return float(np.median(times))


def benchmark_scaling(n_list=(1000, 2000, 4000), avg_degree=10, c=8, tau=0.5,
                      repeats=5, d_z=10, seed=0):
    """Median loss-evaluation time of the dense loss vs the proxy loss.

    Returns rows ``(n, dense_ms, pamc_ms)``.
    """
    n_list = list(n_list)
    if n_list != sorted(n_list):
        raise ParameterError("n_list must be ascending")
    if repeats < 3:
        raise ParameterError("repeats must be >= 3")
    rows = []
    for n in n_list:
        rng = make_rng(derive_seed(seed, n))
        z = rng.standard_normal((n, d_z))
        gamma = influence_weights(random_graph(n, avg_degree, rng), 1)
        labels = rng.permutation(np.arange(n) % c)

        def dense():
            return loss_traditional(z, gamma, tau).mean

        def pamc():
            mu_hat = meta_nodes(z, labels, c).centers
            return positive_loss_sparse(z, gamma, tau) + proxy_loss(mu_hat, tau)

        rows.append((n, _median_ms(dense, repeats), _median_ms(pamc, repeats)))
    return rows


def write_bench_csv(fh, rows):
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["n", "dense_ms", "pamc_ms"])
    for n, d, p in rows:
        w.writerow([n, f"{d:.4f}", f"{p:.4f}"])


def with_overrides(hp, **kw):
    return replace(hp, **{k: v for k, v in kw.items() if v is not None})

"""Dataset files and the synthetic stochastic block model.

File formats (UTF-8, no headers):

* features: comma separated floats, one row per node, ``.`` decimal point
* edges: two tab-separated 0-based node ids per line
* labels: one non-negative integer per line
"""
import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .graph import SparseGraph, build_knn_graph
from .numerics import ParameterError, make_rng


class DataFormatError(ValueError):
    """A data file could not be parsed; the message names file and line."""


@dataclass(eq=False)
class Dataset:
    features: np.ndarray
    graph: SparseGraph | None = None
    labels: np.ndarray | None = None
    name: str = "dataset"
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        n = self.features.shape[0]
        if self.graph is not None and self.graph.num_nodes != n:
            raise ParameterError(f"graph has {self.graph.num_nodes} nodes, features have {n} rows")
        if self.labels is not None:
            if self.labels.shape != (n,):
                raise ParameterError(f"expected {n} labels, got {self.labels.shape[0]}")
            if self.labels.min() < 0:
                raise ParameterError("labels must be non-negative")
            present = np.bincount(self.labels)
            if np.any(present == 0):
                raise ParameterError("label ids must be contiguous: some class in [0, C) is empty")

    @property
    def num_clusters(self):
        return None if self.labels is None else int(self.labels.max()) + 1


def read_features(path):
    rows, width = [], None
    with open(path, newline="", encoding="utf-8") as fh:
        for lineno, rec in enumerate(csv.reader(fh), start=1):
            if not rec or (len(rec) == 1 and not rec[0].strip()):
                continue
            if width is None:
                width = len(rec)
            elif len(rec) != width:
                raise DataFormatError(f"{path}:{lineno}: expected {width} columns, found {len(rec)}")
            try:
                rows.append([float(v) for v in rec])
            except ValueError as exc:
                raise DataFormatError(f"{path}:{lineno}: {exc}") from None
    if not rows:
        raise DataFormatError(f"{path}: no feature rows")
    x = np.array(rows, dtype=np.float64)
    if not np.all(np.isfinite(x)):
        raise DataFormatError(f"{path}: non-finite feature values")
    return x


def write_features(path, x):
    np.savetxt(path, np.asarray(x, dtype=np.float64), fmt="%.17g", delimiter=",")


def read_edges(path, num_nodes):
    pairs = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise DataFormatError(f"{path}:{lineno}: expected two tab-separated ids")
            try:
                u, v = int(parts[0]), int(parts[1])
            except ValueError:
                raise DataFormatError(f"{path}:{lineno}: node ids must be integers") from None
            if not (0 <= u < num_nodes and 0 <= v < num_nodes):
                raise DataFormatError(f"{path}:{lineno}: edge ({u}, {v}) references a node outside [0, {num_nodes})")
            pairs.append((u, v))
    return SparseGraph.from_edges(num_nodes, np.array(pairs, dtype=np.int64).reshape(-1, 2))


def write_edges(path, graph):
    with open(path, "w", encoding="utf-8") as fh:
        for u, v in graph.undirected_edges():
            fh.write(f"{u}\t{v}\n")


def read_labels(path):
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                v = int(line)
            except ValueError:
                raise DataFormatError(f"{path}:{lineno}: label must be an integer") from None
            if v < 0:
                raise DataFormatError(f"{path}:{lineno}: label must be non-negative")
            out.append(v)
    return np.array(out, dtype=np.int64)


def write_labels(path, labels):
    with open(path, "w", encoding="utf-8") as fh:
        for v in np.asarray(labels, dtype=np.int64):
            fh.write(f"{v}\n")


def load_dataset(features_path, edges_path=None, labels_path=None, knn_k=None, name=None):
    if edges_path is not None and knn_k is not None:
        raise ParameterError("give either an edge file or knn_k, not both")
    if edges_path is None and knn_k is None:
        raise ParameterError("an edge file or knn_k is required")
    x = read_features(features_path)
    if edges_path is not None:
        graph = read_edges(edges_path, x.shape[0])
    else:
        graph = build_knn_graph(x, int(knn_k))
    labels = None
    if labels_path is not None:
        labels = read_labels(labels_path)
        if labels.shape[0] != x.shape[0]:
            raise DataFormatError(f"{labels_path}: {labels.shape[0]} labels for {x.shape[0]} nodes")
    return Dataset(x, graph, labels, name or Path(features_path).stem)


def block_sizes(n, c):
    """Near-equal split; the ``n mod c`` extra nodes go to the lowest blocks."""
    base, extra = divmod(n, c)
    return np.array([base + (1 if b < extra else 0) for b in range(c)], dtype=np.int64)


def generate_sbm(n, c, p_in, p_out, feature_dim=20, center_separation=6.0,
                 noise_sigma=1.0, seed=0):
    """Stochastic block model graph with Gaussian block features.

    Block centres are ``center_separation / sqrt(2)`` times distinct standard
    basis vectors, so every pair of centres is ``center_separation`` apart.
    """
    if c < 2:
        raise ParameterError("need at least two blocks")
    if n < c:
        raise ParameterError("need at least one node per block")
    if not (0.0 <= p_out <= 1.0 and 0.0 <= p_in <= 1.0):
        raise ParameterError("edge probabilities must lie in [0, 1]")
    if p_in < p_out:
        raise ParameterError(f"p_in={p_in} < p_out={p_out}: anti-assortative blocks are not supported")
    if feature_dim < c:
        raise ParameterError(f"feature_dim must be >= c ({c}) to place equidistant centres")
    if noise_sigma < 0:
        raise ParameterError("noise_sigma must be non-negative")

    rng = make_rng(seed)
    labels = np.repeat(np.arange(c), block_sizes(n, c))

    iu, ju = np.triu_indices(n, k=1)
    prob = np.where(labels[iu] == labels[ju], p_in, p_out)
    hit = rng.random(iu.size) < prob
    graph = SparseGraph.from_edges(n, np.stack([iu[hit], ju[hit]], axis=1))

    centers = np.zeros((c, feature_dim))
    centers[np.arange(c), np.arange(c)] = center_separation / np.sqrt(2.0)
    x = centers[labels] + noise_sigma * rng.standard_normal((n, feature_dim))

    meta = dict(n=n, c=c, p_in=p_in, p_out=p_out, feature_dim=feature_dim,
                center_separation=center_separation, noise_sigma=noise_sigma, seed=seed)
    return Dataset(x, graph, labels, name="sbm", meta=meta)


# used by the CLI preset and the acceptance suite
SBM_ACCEPT = dict(n=300, c=3, p_in=0.2, p_out=0.01, feature_dim=20,
                  center_separation=6.0, noise_sigma=1.0, seed=0)

"""Graph clustering with a meta-node proxy contrastive loss."""
from ._kernels import backend
from .clustering import hard_labels, kmeans_init, meta_nodes, soft_assign, target_distribution
from .data import Dataset, generate_sbm, load_dataset
from .graph import SparseGraph, build_knn_graph, influence_weights, normalize_adjacency
from .losses import (
    kl_cluster_loss, loss_cc, loss_nn, loss_traditional, pcontrast_loss,
    positive_loss_sparse, proxy_loss, total_loss,
)
from .metrics import ari, clustering_accuracy, macro_f1, nmi
from .model import encode, init_autoencoder, pretrain
from .theory import bound_report, boundary_surface, empirical_bound_audit
from .trainer import Hyperparams, benchmark_scaling, run_training

__version__ = "0.1.0"

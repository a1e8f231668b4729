import os
import subprocess
import sys

import numpy as np
import pytest

from pamc import _kernels as K
from pamc.graph import influence_weights
from pamc.trainer import random_graph

pytestmark = pytest.mark.skipif(not K.HAVE_NUMBA, reason="numba not installed")


@pytest.fixture
def instance():
    rng = np.random.default_rng(3)
    n = 60
    z = rng.standard_normal((n, 5))
    zn = z / np.linalg.norm(z, axis=1, keepdims=True)
    gamma = influence_weights(random_graph(n, 4, rng), 2)
    return zn, gamma.csr_arrays(), rng


def test_edge_logsumexp_backends_agree(instance):
    zn, (indptr, indices, w), _ = instance
    a = K.edge_logsumexp_numba(zn, indptr, indices, w, 0.7)
    b = K.edge_logsumexp_numpy(zn, indptr, indices, w, 0.7)
    np.testing.assert_allclose(a, b, rtol=1e-12, atol=1e-13)


def test_edge_logsumexp_grad_backends_agree(instance):
    zn, (indptr, indices, w), rng = instance
    lse = K.edge_logsumexp_numpy(zn, indptr, indices, w, 0.7)
    g = rng.standard_normal(zn.shape[0])
    a = K.edge_logsumexp_grad_numba(zn, indptr, indices, w, 0.7, lse, g)
    b = K.edge_logsumexp_grad_numpy(zn, indptr, indices, w, 0.7, lse, g)
    np.testing.assert_allclose(a, b, rtol=1e-10, atol=1e-12)


def test_dense_contrastive_backends_agree(instance):
    zn, (indptr, indices, w), _ = instance
    a = K.dense_contrastive_numba(zn, indptr, indices, w, 1.3)
    b = K.dense_contrastive_numpy(zn, indptr, indices, w, 1.3)
    np.testing.assert_allclose(a, b, rtol=1e-11, atol=1e-12)


def test_knn_backends_agree():
    x = np.random.default_rng(0).standard_normal((700, 4))
    np.testing.assert_array_equal(K.knn_numba(x, 6), K.knn_numpy(x, 6))


def test_knn_ties_go_to_lower_index():
    x = np.array([[0.0], [1.0], [-1.0], [1.0]])
    for impl in (K.knn_numba, K.knn_numpy):
        assert impl(x, 1)[0, 0] == 1
        assert impl(x, 1)[1, 0] == 3


def test_empty_rows_are_nan():
    zn = np.eye(3)
    indptr = np.array([0, 1, 1, 2])
    indices = np.array([2, 0])
    w = np.ones(2)
    for impl in (K.edge_logsumexp_numba, K.edge_logsumexp_numpy):
        out = impl(zn, indptr, indices, w, 1.0)
        assert np.isnan(out[1]) and np.isfinite(out[[0, 2]]).all()


@pytest.mark.parametrize("flag, expected", [("1", "numpy"), ("0", "numba")])
def test_env_flag_selects_backend(flag, expected):
    env = dict(os.environ, PAMC_DISABLE_NUMBA=flag)
    out = subprocess.run([sys.executable, "-c", "import pamc; print(pamc.backend())"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == expected

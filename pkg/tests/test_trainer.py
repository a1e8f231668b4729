import io
import math

import numpy as np
import pytest

from pamc import autodiff as ad
from pamc import data, model, trainer
from pamc.clustering import meta_nodes
from pamc.losses import pcontrast_loss
from pamc.numerics import ParameterError
from pamc.trainer import Hyperparams, PRESETS, TrainingDiverged, benchmark_scaling, run_training


@pytest.fixture(scope="module")
def small():
    ds = data.generate_sbm(60, 3, 0.3, 0.02, feature_dim=8, seed=4)
    params = model.init_autoencoder(8, seed=1, hidden=(16, 16, 32), embed_dim=4)
    params, _ = model.pretrain(params, ds.features, epochs=5, lr=1e-3, batch_size=32, seed=1)
    return ds, params


def _hp(**kw):
    base = dict(epochs=5, clusters_c=3, lr=1e-3)
    base.update(kw)
    return Hyperparams(**base)


def test_preset_rows():
    expect = {
        "usps": (2, 2, 4, 0.5, 1e-3, 10), "hhar": (0.5, 12.5, 2, 1.5, 1e-3, 6),
        "reut": (1, 0.2, 1, 0.25, 1e-4, 4), "acm": (0.5, 0.5, 1, 0.5, 1e-3, 3),
        "cite": (2, 2, 1, 1.0, 1e-3, 6), "dblp": (2, 2.5, 3, 0.5, 1e-3, 4),
    }
    for name, row in expect.items():
        hp = PRESETS[name]
        assert (hp.alpha, hp.beta, hp.influence_k, hp.tau, hp.lr, hp.clusters_c) == row, name
        assert hp.eta == 1.0 and hp.epochs == 200


def test_hyperparam_validation():
    with pytest.raises(ParameterError):
        Hyperparams(alpha=-1)
    with pytest.raises(ParameterError):
        Hyperparams(tau=0)
    with pytest.raises(ParameterError):
        Hyperparams(influence_k=0)


def test_zero_weights_leave_parameters_unchanged(small):
    ds, params = small
    res = run_training(ds, _hp(alpha=0.0, beta=0.0, epochs=4), params)
    for (name, before), (_, after) in zip(params.named_tensors(), res.params.named_tensors()):
        np.testing.assert_array_equal(before.value, after.value, err_msg=name)


def test_history_shape_and_reproducibility(small):
    ds, params = small
    a = run_training(ds, _hp(), params)
    b = run_training(ds, _hp(), params)
    assert [r.epoch for r in a.history] == [1, 2, 3, 4, 5]
    strip = lambda h: [(r.epoch, r.total, r.positive, r.proxy, r.kl, r.acc, r.nmi, r.ari, r.f1) for r in h]
    assert strip(a.history) == strip(b.history)
    np.testing.assert_array_equal(a.embeddings, b.embeddings)
    assert all(r.acc is not None for r in a.history)


def test_decoder_frozen(small):
    ds, params = small
    res = run_training(ds, _hp(epochs=3), params)
    for before, after in zip(params.decoder, res.params.decoder):
        np.testing.assert_array_equal(before[0].value, after[0].value)
    changed = [not np.array_equal(b[0].value, a[0].value) for b, a in zip(params.encoder, res.params.encoder)]
    assert all(changed)
    # the caller's parameters are never mutated
    assert res.params is not params


def test_proxy_gradient_reaches_every_assigned_node(small):
    ds, params = small
    res = run_training(ds, _hp(epochs=1), params)
    z = ad.parameter(model.encode(params, ds.features))
    labels = res.state.labels
    gamma = res.gamma
    pcontrast_loss(z, gamma, meta_nodes(z, labels, 3, centroids=res.state.centroids.value).centers, 0.5).backward()
    assert np.all(np.linalg.norm(z.grad, axis=1) > 0)
    z0 = model.encode(params, ds.features)
    z1 = run_training(ds, _hp(epochs=1, beta=0.0), params).embeddings
    assert np.all(np.any(z0 != z1, axis=1))


def test_no_labels_gives_no_metrics(small):
    ds, params = small
    bare = data.Dataset(ds.features, ds.graph)
    res = run_training(bare, _hp(epochs=2), params)
    assert all(r.acc is None and r.f1 is None for r in res.history)


def test_requires_graph_and_clusters(small):
    ds, params = small
    with pytest.raises(ParameterError):
        run_training(data.Dataset(ds.features), _hp(), params)
    with pytest.raises(ParameterError):
        run_training(ds, _hp(clusters_c=1), params)


def test_divergence_reports_last_good(small, monkeypatch):
    ds, params = small
    real = trainer.total_loss
    calls = {"n": 0}

    def flaky(*a, **kw):
        br = real(*a, **kw)
        calls["n"] += 1
        if calls["n"] == 3:
            br.total = math.nan
        return br

    monkeypatch.setattr(trainer, "total_loss", flaky)
    with pytest.raises(TrainingDiverged) as info:
        run_training(ds, _hp(), params)
    assert info.value.epoch == 3
    assert len(info.value.history) == 2
    assert all(np.all(np.isfinite(v)) for v in info.value.last_good)


def test_curve_csv(tmp_path, small):
    ds, params = small
    res = run_training(ds, _hp(epochs=2), params)
    path = tmp_path / "curve.csv"
    trainer.write_curve_csv(path, res.history)
    lines = path.read_text().splitlines()
    assert lines[0] == "epoch,total,positive,proxy,kl,acc,nmi,ari,f1"
    assert len(lines) == 3
    assert float(lines[1].split(",")[1]) == res.history[0].total


def test_benchmark_schema():
    rows = benchmark_scaling([50, 100], avg_degree=4, c=3, repeats=3)
    assert [r[0] for r in rows] == [50, 100]
    assert all(r[1] > 0 and r[2] > 0 for r in rows)
    fh = io.StringIO()
    trainer.write_bench_csv(fh, rows)
    lines = fh.getvalue().splitlines()
    assert lines[0] == "n,dense_ms,pamc_ms" and len(lines) == 3


def test_benchmark_preconditions():
    with pytest.raises(ParameterError):
        benchmark_scaling([100, 50])
    with pytest.raises(ParameterError):
        benchmark_scaling([50], repeats=2)


def test_random_graph_has_no_isolated_nodes():
    g = trainer.random_graph(200, 2, np.random.default_rng(0))
    assert g.degrees().min() >= 1
    assert g.is_symmetric() and not g.has_self_loops()

import json
import math
import subprocess
import sys

import numpy as np
import pytest

from pamc import data, model
from pamc.cli import main


def gen(tmp_path, name="ds", *extra):
    out = tmp_path / name
    argv = ["gen-data", "--n", "45", "--c", "3", "--p_in", "0.3", "--p_out", "0.02",
            "--feature_dim", "6", "--seed", "2", "--out_dir", str(out), *extra]
    assert main(argv) == 0
    return out


def test_gen_data_files_and_manifest_round_trip(tmp_path):
    a = gen(tmp_path, "a")
    for f in ("features.csv", "edges.tsv", "labels.txt", "manifest.txt"):
        assert (a / f).is_file()
    manifest = (a / "manifest.txt").read_text()
    assert "seed=2" in manifest and "n=45" in manifest
    b = tmp_path / "b"
    assert main(["gen-data", "--config", str(a / "manifest.txt"), "--out_dir", str(b)]) == 0
    for f in ("features.csv", "edges.tsv", "labels.txt"):
        assert (a / f).read_bytes() == (b / f).read_bytes()


def test_gen_data_intra_block_only(tmp_path):
    out = tmp_path / "p"
    assert main(["gen-data", "--n", "20", "--c", "2", "--p_in", "1", "--p_out", "0",
                 "--feature_dim", "4", "--out_dir", str(out)]) == 0
    labels = data.read_labels(out / "labels.txt")
    g = data.read_edges(out / "edges.tsv", 20)
    u, v = g.undirected_edges().T
    assert np.all(labels[u] == labels[v])
    assert len(u) == 2 * 45


def test_gen_data_preset(tmp_path, capsys):
    out = tmp_path / "acc"
    assert main(["gen-data", "--preset", "sbm-accept", "--out_dir", str(out)]) == 0
    assert data.read_features(out / "features.csv").shape == (300, 20)
    assert set(data.read_labels(out / "labels.txt").tolist()) == {0, 1, 2}
    assert "# config:" in capsys.readouterr().err


def test_gen_data_unwritable_out_dir(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    assert main(["gen-data", "--preset", "sbm-accept", "--out_dir", str(blocker / "sub")]) == 2


def test_pretrain_byte_identical(tmp_path):
    ds = gen(tmp_path)
    for run in ("r1", "r2"):
        assert main(["pretrain", "--features", str(ds / "features.csv"), "--pretrain_epochs", "2",
                     "--out_dir", str(tmp_path / run)]) == 0
    a = (tmp_path / "r1" / "autoencoder.ckpt").read_bytes()
    assert a == (tmp_path / "r2" / "autoencoder.ckpt").read_bytes()
    params = model.load_checkpoint(tmp_path / "r1" / "autoencoder.ckpt")
    assert params.input_dim == 6 and params.embed_dim == 10
    assert (tmp_path / "r1" / "pretrain_loss.csv").read_text().splitlines()[0] == "epoch,loss"


def test_pretrain_missing_features(tmp_path, capsys):
    assert main(["pretrain", "--features", str(tmp_path / "nope.csv")]) == 2
    assert "nope.csv" in capsys.readouterr().err


def test_config_unknown_key(tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("alpha = 1\nwarmup = 3\n")
    assert main(["train", "--config", str(cfg), "--features", "x.csv"]) == 2
    assert "warmup" in capsys.readouterr().err


def test_flags_override_config(tmp_path, capsys):
    ds = gen(tmp_path)
    cfg = tmp_path / "run.cfg"
    cfg.write_text(f"features={ds / 'features.csv'}\npretrain_epochs=5\n")
    out = tmp_path / "o"
    assert main(["pretrain", "--config", str(cfg), "--pretrain_epochs", "1", "--out_dir", str(out)]) == 0
    assert len((out / "pretrain_loss.csv").read_text().splitlines()) == 2
    assert "pretrain_epochs=1" in capsys.readouterr().err


def _train_argv(ds, out, *extra):
    return ["train", "--features", str(ds / "features.csv"), "--edges", str(ds / "edges.tsv"),
            "--pretrain_epochs", "2", "--epochs", "3", "--out_dir", str(out), *extra]


def test_train_outputs(tmp_path, capsys):
    ds = gen(tmp_path)
    out = tmp_path / "t"
    assert main(_train_argv(ds, out, "--labels", str(ds / "labels.txt"))) == 0
    res = json.loads(capsys.readouterr().out.strip().splitlines()[-1])
    assert set(res) == {"acc", "nmi", "ari", "f1", "epochs", "seconds"}
    assert res["epochs"] == 3 and 0 <= res["acc"] <= 1
    curve = (out / "curve.csv").read_text().splitlines()
    assert curve[0] == "epoch,total,positive,proxy,kl,acc,nmi,ari,f1" and len(curve) == 4
    assert np.loadtxt(out / "embeddings.csv", delimiter=",").shape == (45, 10)
    assert data.read_labels(out / "pred_labels.txt").shape == (45,)


def test_train_without_labels(tmp_path, capsys):
    ds = gen(tmp_path)
    assert main(_train_argv(ds, tmp_path / "t", "--clusters", "3")) == 0
    res = json.loads(capsys.readouterr().out.strip().splitlines()[-1])
    assert res["acc"] is None and res["f1"] is None


def test_train_needs_clusters_without_labels(tmp_path):
    ds = gen(tmp_path)
    assert main(_train_argv(ds, tmp_path / "t")) == 2


def test_train_checkpoint_dimension_mismatch(tmp_path, capsys):
    ds = gen(tmp_path)
    ckpt = tmp_path / "bad.ckpt"
    model.save_checkpoint(ckpt, model.init_autoencoder(7, hidden=(4, 4, 4), embed_dim=2))
    assert main(_train_argv(ds, tmp_path / "t", "--labels", str(ds / "labels.txt"),
                            "--checkpoint", str(ckpt))) == 2
    assert "7" in capsys.readouterr().err


def test_train_with_checkpoint(tmp_path, capsys):
    ds = gen(tmp_path)
    assert main(["pretrain", "--features", str(ds / "features.csv"), "--pretrain_epochs", "2",
                 "--out_dir", str(tmp_path / "p")]) == 0
    assert main(_train_argv(ds, tmp_path / "t", "--labels", str(ds / "labels.txt"),
                            "--checkpoint", str(tmp_path / "p" / "autoencoder.ckpt"))) == 0


def test_train_knn_graph(tmp_path):
    ds = gen(tmp_path)
    argv = ["train", "--features", str(ds / "features.csv"), "--labels", str(ds / "labels.txt"),
            "--knn_k", "4", "--pretrain_epochs", "1", "--epochs", "2", "--out_dir", str(tmp_path / "k")]
    assert main(argv) == 0


def test_eval(tmp_path, capsys):
    (tmp_path / "y.txt").write_text("0\n0\n1\n1\n")
    (tmp_path / "p.txt").write_text("0\n1\n1\n1\n")
    assert main(["eval", "--labels", str(tmp_path / "y.txt"), "--pred", str(tmp_path / "p.txt")]) == 0
    assert json.loads(capsys.readouterr().out)["acc"] == 0.75
    (tmp_path / "short.txt").write_text("0\n1\n")
    assert main(["eval", "--labels", str(tmp_path / "y.txt"), "--pred", str(tmp_path / "short.txt")]) == 2


def test_bench(tmp_path, capsys):
    assert main(["bench", "--n_list", "40,80", "--avg_degree", "4", "--clusters", "3",
                 "--repeats", "3", "--out_dir", str(tmp_path)]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == "n,dense_ms,pamc_ms"
    assert [l.split(",")[0] for l in lines[1:]] == ["40", "80"]
    assert (tmp_path / "bench.csv").read_text().splitlines()[0] == "n,dense_ms,pamc_ms"


def test_theory_surface(capsys):
    assert main(["theory-surface", "--n-range", "10:30:10", "--c-range", "2:3:1", "--tau-list", "0.5"]) == 0
    first = capsys.readouterr().out
    lines = first.splitlines()
    assert lines[0] == "n,c,tau,ratio"
    assert len(lines) == 1 + 3 * 2 + 6
    cite = [l for l in lines if l.startswith("3327,6,1.0,")]
    assert cite and float(cite[0].split(",")[3]) > 1
    for l in lines[-6:]:
        assert float(l.split(",")[3]) > 1
    assert main(["theory-surface", "--n-range", "10:30:10", "--c-range", "2:3:1", "--tau-list", "0.5"]) == 0
    assert capsys.readouterr().out == first


def test_theory_surface_empty_range(capsys):
    assert main(["theory-surface", "--tau-list", ""]) == 2


def test_theory_surface_to_file(tmp_path):
    out = tmp_path / "s.csv"
    assert main(["theory-surface", "--n-range", "5,6", "--c-range", "2", "--tau-list", "1",
                 "--no-datasets", "--output", str(out)]) == 0
    assert out.read_text().splitlines() == ["n,c,tau,ratio",
                                            f"5,2,1.0,{math.log(5) / math.log(1 + math.e)!r}",
                                            f"6,2,1.0,{math.log(6) / math.log(1 + math.e)!r}"]


def test_module_entry_point():
    r = subprocess.run([sys.executable, "-m", "pamc", "--help"], capture_output=True, text=True)
    assert r.returncode == 0 and "theory-surface" in r.stdout
    r = subprocess.run([sys.executable, "-m", "pamc", "bogus"], capture_output=True, text=True)
    assert r.returncode == 2

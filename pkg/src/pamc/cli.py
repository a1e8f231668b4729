"""Command-line entry point.

Subcommands: gen-data, pretrain, train, eval, bench, theory-surface.
Configuration comes from an optional ``key=value`` file (``--config``)
overridden by ``--key value`` flags. Exit codes: 0 success, 1 numeric
failure, 2 usage or IO error.
"""
import argparse
import json
import logging
import sys
import time
from pathlib import Path

import numpy as np

from . import data, model, theory, trainer
from .data import DataFormatError
from .metrics import evaluate
from .numerics import DimensionError, NumericalError, ParameterError

EXIT_OK, EXIT_NUMERIC, EXIT_USAGE = 0, 1, 2

TRAIN_KEYS = {
    "features": str, "edges": str, "labels": str, "knn_k": int, "clusters": int,
    "alpha": float, "beta": float, "influence_k": int, "tau": float, "eta": float,
    "lr": float, "epochs": int, "pretrain_epochs": int, "pretrain_lr": float,
    "batch_size": int, "seed": int, "out_dir": str,
}
GEN_KEYS = {
    "n": int, "c": int, "p_in": float, "p_out": float, "feature_dim": int,
    "center_separation": float, "noise_sigma": float, "seed": int, "out_dir": str,
}
BENCH_KEYS = {
    "n_list": str, "avg_degree": int, "clusters": int, "tau": float, "repeats": int,
    "seed": int, "out_dir": str,
}

DEFAULTS = {
    "knn_k": None, "clusters": None, "alpha": 1.0, "beta": 1.0, "influence_k": 1,
    "tau": 0.5, "eta": 1.0, "lr": 1e-3, "epochs": 200, "pretrain_epochs": 30,
    "pretrain_lr": 1e-3, "batch_size": 256, "seed": 0, "out_dir": ".",
}


class UsageError(Exception):
    pass


def read_config(path, keys):
    cfg = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise UsageError(f"{path}:{lineno}: expected key=value")
            key, val = (s.strip() for s in line.split("=", 1))
            if key not in keys:
                raise UsageError(f"{path}:{lineno}: unknown config key {key!r}")
            cfg[key] = _coerce(key, val, keys)
    return cfg


def _coerce(key, val, keys):
    try:
        return keys[key](val)
    except ValueError:
        raise UsageError(f"bad value for {key}: {val!r}") from None


def _add_keys(p, keys):
    for key, typ in keys.items():
        p.add_argument(f"--{key}", type=typ, default=None)


def effective_config(args, keys, defaults=None):
    cfg = dict(defaults or {})
    if getattr(args, "config", None):
        cfg.update(read_config(args.config, keys))
    for key in keys:
        v = getattr(args, key, None)
        if v is not None:
            cfg[key] = v
    return cfg


def _echo(cfg):
    body = " ".join(f"{k}={v}" for k, v in sorted(cfg.items()) if v is not None)
    print(f"# config: {body}", file=sys.stderr)


def _out_dir(cfg):
    out = Path(cfg.get("out_dir") or ".")
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise UsageError(f"cannot create output directory {out}: {exc}") from None
    return out


def _load(cfg):
    if not cfg.get("features"):
        raise UsageError("--features is required")
    if not Path(cfg["features"]).is_file():
        raise UsageError(f"features file not found: {cfg['features']}")
    knn_k = cfg.get("knn_k")
    if cfg.get("edges") is None and knn_k is None:
        knn_k = 5
    return data.load_dataset(cfg["features"], cfg.get("edges"), cfg.get("labels"), knn_k)


# --- commands -----------------------------------------------------------------

def cmd_gen_data(args):
    base = dict(data.SBM_ACCEPT) if args.preset == "sbm-accept" else {}
    cfg = effective_config(args, GEN_KEYS, base)
    missing = [k for k in ("n", "c", "p_in", "p_out") if k not in cfg]
    if missing:
        raise UsageError(f"missing parameters: {', '.join(missing)}")
    out = _out_dir(cfg)
    params = {k: cfg[k] for k in GEN_KEYS if k in cfg and k != "out_dir"}
    ds = data.generate_sbm(**params)
    _echo(cfg)
    try:
        data.write_features(out / "features.csv", ds.features)
        data.write_edges(out / "edges.tsv", ds.graph)
        data.write_labels(out / "labels.txt", ds.labels)
        with open(out / "manifest.txt", "w", encoding="utf-8") as fh:
            for k, v in ds.meta.items():
                fh.write(f"{k}={v}\n")
    except OSError as exc:
        raise UsageError(f"cannot write to {out}: {exc}") from None
    return EXIT_OK


def cmd_pretrain(args):
    cfg = effective_config(args, TRAIN_KEYS, DEFAULTS)
    _apply_preset(args, cfg)
    _echo(cfg)
    x = data.read_features(_require_file(cfg, "features"))
    out = _out_dir(cfg)
    params = model.init_autoencoder(x.shape[1], seed=cfg["seed"])
    params, hist = model.pretrain(params, x, cfg["pretrain_epochs"], cfg["pretrain_lr"],
                                  cfg["batch_size"], seed=cfg["seed"])
    model.save_checkpoint(out / "autoencoder.ckpt", params)
    with open(out / "pretrain_loss.csv", "w", encoding="utf-8") as fh:
        fh.write("epoch,loss\n")
        for i, v in enumerate(hist, start=1):
            fh.write(f"{i},{v!r}\n")
    return EXIT_OK


def cmd_train(args):
    cfg = effective_config(args, TRAIN_KEYS, DEFAULTS)
    _apply_preset(args, cfg)
    _echo(cfg)
    ds = _load(cfg)
    out = _out_dir(cfg)
    clusters = cfg.get("clusters") or ds.num_clusters
    if clusters is None:
        raise UsageError("--clusters is required when no labels are given")

    t0 = time.perf_counter()
    if args.checkpoint:
        params = model.load_checkpoint(args.checkpoint)
        if params.input_dim != ds.features.shape[1]:
            raise DimensionError(f"checkpoint expects {params.input_dim} features, data has {ds.features.shape[1]}")
    else:
        params = model.init_autoencoder(ds.features.shape[1], seed=cfg["seed"])
        params, _ = model.pretrain(params, ds.features, cfg["pretrain_epochs"], cfg["pretrain_lr"],
                                   cfg["batch_size"], seed=cfg["seed"])
    hp = trainer.Hyperparams(alpha=cfg["alpha"], beta=cfg["beta"], influence_k=cfg["influence_k"],
                             tau=cfg["tau"], eta=cfg["eta"], lr=cfg["lr"], epochs=cfg["epochs"],
                             seed=cfg["seed"], clusters_c=clusters)
    try:
        res = trainer.run_training(ds, hp, params)
    except trainer.TrainingDiverged as exc:
        trainer.write_curve_csv(out / "curve.csv", exc.history)
        raise
    seconds = time.perf_counter() - t0

    trainer.write_curve_csv(out / "curve.csv", res.history)
    np.savetxt(out / "embeddings.csv", res.embeddings, fmt="%.17g", delimiter=",")
    data.write_labels(out / "pred_labels.txt", res.labels)
    metrics = dict(acc=None, nmi=None, ari=None, f1=None)
    if ds.labels is not None:
        metrics = {k: float(v) for k, v in evaluate(ds.labels, res.labels).items()}
    print(json.dumps({**metrics, "epochs": hp.epochs, "seconds": round(seconds, 3)}))
    return EXIT_OK


def cmd_eval(args):
    y_true = data.read_labels(args.labels)
    y_pred = data.read_labels(args.pred)
    if y_true.shape != y_pred.shape:
        raise UsageError(f"{args.labels} has {y_true.size} labels, {args.pred} has {y_pred.size}")
    print(json.dumps({k: float(v) for k, v in evaluate(y_true, y_pred).items()}))
    return EXIT_OK


def cmd_bench(args):
    defaults = {"n_list": "1000,2000,4000", "avg_degree": 10, "clusters": 8, "tau": 0.5,
                "repeats": 5, "seed": 0}
    cfg = effective_config(args, BENCH_KEYS, defaults)
    _echo(cfg)
    n_list = _int_list(cfg["n_list"])
    rows = trainer.benchmark_scaling(n_list, cfg["avg_degree"], cfg["clusters"], cfg["tau"],
                                     cfg["repeats"], seed=cfg["seed"])
    trainer.write_bench_csv(sys.stdout, rows)
    if cfg.get("out_dir"):
        with open(_out_dir(cfg) / "bench.csv", "w", encoding="utf-8") as fh:
            trainer.write_bench_csv(fh, rows)
    return EXIT_OK


def cmd_theory_surface(args):
    n_vals = _parse_range(args.n_range, int)
    c_vals = _parse_range(args.c_range, int)
    taus = _parse_range(args.tau_list, float)
    if not (n_vals and c_vals and taus):
        raise ParameterError("n, c and tau ranges must be non-empty")
    rows = theory.boundary_surface(n_vals, c_vals, taus)
    if not args.no_datasets:
        rows += [(n, c, tau, theory.bound_report(n, c, tau).ratio_lower_bound)
                 for n, c, tau in theory.DATASET_POINTS.values()]
    if args.output:
        with open(args.output, "w", encoding="utf-8") as fh:
            theory.write_surface_csv(fh, rows)
    else:
        theory.write_surface_csv(sys.stdout, rows)
    return EXIT_OK


# --- helpers --------------------------------------------------------------------

def _require_file(cfg, key):
    path = cfg.get(key)
    if not path:
        raise UsageError(f"--{key} is required")
    if not Path(path).is_file():
        raise UsageError(f"{key} file not found: {path}")
    return path


def _apply_preset(args, cfg):
    name = getattr(args, "preset", None)
    if not name:
        return
    hp = trainer.PRESETS[name]
    explicit = {k for k in TRAIN_KEYS if getattr(args, k, None) is not None}
    if getattr(args, "config", None):
        explicit |= set(read_config(args.config, TRAIN_KEYS))
    preset = dict(alpha=hp.alpha, beta=hp.beta, influence_k=hp.influence_k, tau=hp.tau,
                  lr=hp.lr, clusters=hp.clusters_c, pretrain_lr=trainer.PRETRAIN_LR[name])
    for k, v in preset.items():
        if k not in explicit:
            cfg[k] = v


def _int_list(text):
    return [int(v) for v in str(text).split(",") if v.strip()]


def _parse_range(text, typ):
    """``a,b,c`` or ``start:stop:step`` (stop inclusive)."""
    text = text.strip()
    if not text:
        return []
    if ":" in text:
        start, stop, step = (typ(v) for v in text.split(":"))
        if step <= 0:
            raise ParameterError(f"range step must be positive: {text}")
        out, v = [], start
        while v <= stop + (1e-9 if typ is float else 0):
            out.append(round(v, 10) if typ is float else v)
            v += step
        return out
    return [typ(v) for v in text.split(",") if v.strip()]


def build_parser():
    parser = argparse.ArgumentParser(prog="pamc", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="write a synthetic SBM dataset")
    p.add_argument("--config", help="key=value file, e.g. a previous manifest.txt")
    p.add_argument("--preset", choices=["sbm-accept"])
    _add_keys(p, GEN_KEYS)
    p.set_defaults(func=cmd_gen_data)

    presets = sorted(trainer.PRESETS)
    for name, func, help_ in (("pretrain", cmd_pretrain, "pretrain the autoencoder"),
                              ("train", cmd_train, "run the full clustering pipeline")):
        p = sub.add_parser(name, help=help_)
        p.add_argument("--config")
        p.add_argument("--preset", choices=presets, help="benchmark hyperparameter defaults")
        _add_keys(p, TRAIN_KEYS)
        if name == "train":
            p.add_argument("--checkpoint", help="pretrained autoencoder; pretrains in-process if omitted")
        p.set_defaults(func=func)

    p = sub.add_parser("eval", help="score predicted labels against ground truth")
    p.add_argument("--labels", required=True)
    p.add_argument("--pred", required=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("bench", help="dense vs proxy loss scaling benchmark")
    p.add_argument("--config")
    _add_keys(p, BENCH_KEYS)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("theory-surface", help="emit the bound ratio grid as CSV")
    p.add_argument("--n-range", default="10:10000:10")
    p.add_argument("--c-range", default="2:20:1")
    p.add_argument("--tau-list", default="0.25,0.5,1.0,1.5,2.0")
    p.add_argument("--no-datasets", action="store_true", help="omit the benchmark dataset points")
    p.add_argument("--output")
    p.set_defaults(func=cmd_theory_surface)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except NumericalError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (UsageError, DataFormatError, ParameterError, DimensionError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())

"""MLP autoencoder: pretraining on reconstruction, encoder-only inference."""
import logging
from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .numerics import DimensionError, NumericalError, make_rng

log = logging.getLogger(__name__)

HIDDEN_DIMS = (500, 500, 2000)
EMBED_DIM = 10


@dataclass(eq=False)
class AutoEncoderParams:
    """Encoder ``d -> 500 -> 500 -> 2000 -> 10`` and its mirrored decoder.

    Each layer is a ``(weight, bias)`` pair of tensors; weights are
    ``in x out`` so a layer computes ``h @ W + b``.
    """

    encoder: list
    decoder: list

    @property
    def input_dim(self):
        return self.encoder[0][0].shape[0]

    @property
    def embed_dim(self):
        return self.encoder[-1][0].shape[1]

    def encoder_tensors(self):
        return [t for layer in self.encoder for t in layer]

    def tensors(self):
        return self.encoder_tensors() + [t for layer in self.decoder for t in layer]

    def named_tensors(self):
        out = []
        for part, layers in (("enc", self.encoder), ("dec", self.decoder)):
            for i, (w, b) in enumerate(layers):
                out.append((f"{part}.{i}.weight", w))
                out.append((f"{part}.{i}.bias", b))
        return out

    def copy(self):
        def clone(layers):
            return [(ad.parameter(w.value), ad.parameter(b.value)) for w, b in layers]
        return AutoEncoderParams(clone(self.encoder), clone(self.decoder))


def _layer_dims(input_dim, hidden=HIDDEN_DIMS, embed_dim=EMBED_DIM):
    enc = [input_dim, *hidden, embed_dim]
    return enc, enc[::-1]


def init_autoencoder(input_dim, seed=0, hidden=HIDDEN_DIMS, embed_dim=EMBED_DIM):
    """Glorot-uniform weights, zero biases."""
    if input_dim < 1:
        raise ValueError("input_dim must be >= 1")
    rng = make_rng(seed)
    enc_dims, dec_dims = _layer_dims(input_dim, hidden, embed_dim)

    def build(dims):
        layers = []
        for fan_in, fan_out in zip(dims[:-1], dims[1:]):
            limit = np.sqrt(6.0 / (fan_in + fan_out))
            w = rng.uniform(-limit, limit, size=(fan_in, fan_out))
            layers.append((ad.parameter(w), ad.parameter(np.zeros((1, fan_out)))))
        return layers

    encoder = build(enc_dims)
    decoder = build(dec_dims)
    return AutoEncoderParams(encoder, decoder)


def _forward(layers, h):
    last = len(layers) - 1
    for i, (w, b) in enumerate(layers):
        h = ad.add(ad.matmul(h, w), b)
        if i < last:
            h = ad.relu(h)
    return h


def encode_tensor(params, x):
    """Differentiable encoder pass."""
    x = ad.as_tensor(x)
    if x.value.ndim != 2 or x.shape[1] != params.input_dim:
        raise DimensionError(f"features have shape {x.shape}, encoder expects {params.input_dim} columns")
    return _forward(params.encoder, x)


def encode(params, features):
    return encode_tensor(params, np.asarray(features, dtype=np.float64)).value


def reconstruct_tensor(params, x):
    return _forward(params.decoder, encode_tensor(params, x))


def reconstruction_loss(params, x):
    """``||X - X_hat||_F^2 / N`` as a scalar tensor."""
    x = ad.as_tensor(x)
    err = ad.sub(reconstruct_tensor(params, x), x)
    return ad.mul(ad.sum(ad.square(err)), 1.0 / x.shape[0])


def pretrain(params, features, epochs=30, lr=1e-3, batch_size=256, seed=0):
    """Adam on shuffled mini-batches; returns trained params and per-epoch loss.

    The epoch loss is the size-weighted mean of the batch losses.
    """
    if epochs < 1:
        raise ValueError("epochs must be >= 1")
    x = np.asarray(features, dtype=np.float64)
    n = x.shape[0]
    params = params.copy()
    opt = ad.Adam(params.tensors(), lr=lr)
    rng = make_rng(seed)
    history = []
    for epoch in range(1, epochs + 1):
        order = rng.permutation(n)
        total = 0.0
        for b, start in enumerate(range(0, n, batch_size)):
            idx = order[start:start + batch_size]
            opt.zero_grad()
            loss = reconstruction_loss(params, x[idx])
            value = float(loss.value)
            if not np.isfinite(value):
                raise NumericalError(f"non-finite reconstruction loss at epoch {epoch}, batch {b}")
            loss.backward()
            opt.step()
            total += value * idx.size
        history.append(total / n)
        log.debug("pretrain epoch %d loss %.6g", epoch, history[-1])
    return params, history


# checkpoint format: one line per tensor, "name shape values..." with the
# shape written as dims joined by "x" and values in row-major order.

def save_checkpoint(path, params):
    with open(path, "w", encoding="utf-8") as fh:
        for name, t in params.named_tensors():
            shape = "x".join(str(s) for s in t.value.shape)
            vals = " ".join(format(v, ".17g") for v in t.value.ravel())
            fh.write(f"{name} {shape} {vals}\n")


def load_checkpoint(path):
    tensors = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            parts = line.split()
            if not parts:
                continue
            if len(parts) < 2:
                raise ValueError(f"{path}:{lineno}: truncated tensor record")
            name, shape = parts[0], tuple(int(s) for s in parts[1].split("x"))
            vals = np.array([float(v) for v in parts[2:]])
            if vals.size != int(np.prod(shape)):
                raise ValueError(f"{path}:{lineno}: {name} expects {np.prod(shape)} values, found {vals.size}")
            tensors[name] = vals.reshape(shape)

    def collect(part):
        layers, i = [], 0
        while f"{part}.{i}.weight" in tensors:
            layers.append((ad.parameter(tensors[f"{part}.{i}.weight"]),
                           ad.parameter(tensors[f"{part}.{i}.bias"])))
            i += 1
        return layers

    params = AutoEncoderParams(collect("enc"), collect("dec"))
    if not params.encoder or not params.decoder:
        raise ValueError(f"{path}: missing encoder or decoder tensors")
    dims = [w.shape for w, _ in params.encoder + params.decoder]
    for (_, out_a), (in_b, _) in zip(dims[:-1], dims[1:]):
        if out_a != in_b:
            raise ValueError(f"{path}: layer shapes do not chain: {dims}")
    return params

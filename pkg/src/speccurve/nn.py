"""A small fully-connected network kernel sized for the sensitivity autoencoder.

Layer stack (N = 3n)::

    N -> 4N  ReLU  dropout(0.2)
    4N -> 2N ReLU  dropout(0.5)
    2N -> 6        (code)
    6 -> 2N  ReLU
    2N -> 4N ReLU  dropout(0.5)
    4N -> N        (reconstruction)

Dropout numbers are retention probabilities by default (inverted dropout,
kept units are scaled by 1/p); ``dropout="drop"`` reads them as drop
probabilities instead.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import BadMagic, StaleCache, Truncated, VersionMismatch

AE_DROPOUT = (0.2, 0.5, None, None, 0.5, None)
AE_RELU = (True, True, False, True, True, False)
CODE_WIDTH = 6

MAGIC = b"SSAE"
FORMAT_VERSION = 1


def ae_dims(n: int) -> list[tuple[int, int]]:
    """``(in, out)`` per layer for a grid of ``n`` wavelengths."""
    N = 3 * n
    widths = [N, 4 * N, 2 * N, CODE_WIDTH, 2 * N, 4 * N, N]
    return list(zip(widths[:-1], widths[1:]))


def layer_views(flat: np.ndarray, dims) -> list[tuple[np.ndarray, np.ndarray]]:
    """Split a flat parameter vector into ``(W, b)`` views, weights first."""
    views, pos = [], 0
    for din, dout in dims:
        W = flat[pos:pos + din * dout].reshape(dout, din)
        pos += din * dout
        b = flat[pos:pos + dout]
        pos += dout
        views.append((W, b))
    if pos != flat.size:
        raise ValueError("flat parameter vector has the wrong length")
    return views


@dataclass
class AutoencoderWeights:
    """Per-layer ``(weight, bias)``; weights are ``out x in``."""

    layers: list[tuple[np.ndarray, np.ndarray]]
    n: int = 31

    def __post_init__(self):
        dims = ae_dims(self.n)
        if len(self.layers) != len(dims):
            raise ValueError(f"expected {len(dims)} layers, got {len(self.layers)}")
        for (W, b), (din, dout) in zip(self.layers, dims):
            if W.shape != (dout, din) or b.shape != (dout,):
                raise ValueError(f"layer shape {W.shape}/{b.shape}, expected ({dout}, {din})")
            if not (np.all(np.isfinite(W)) and np.all(np.isfinite(b))):
                raise ValueError("non-finite weights")
        # all parameters live in one contiguous vector; layers are views into it
        self.flat = np.concatenate([p.reshape(-1) for layer in self.layers for p in layer])
        self.layers = layer_views(self.flat, dims)

    @classmethod
    def initialize(cls, n: int = 31, rng: np.random.Generator | None = None):
        """Uniform fan-in initialization in ``[-1/sqrt(in), 1/sqrt(in)]``."""
        rng = rng if rng is not None else np.random.default_rng(0)
        layers = []
        for din, dout in ae_dims(n):
            bound = 1.0 / np.sqrt(din)
            W = rng.uniform(-bound, bound, size=(dout, din))
            b = rng.uniform(-bound, bound, size=dout)
            layers.append((W, b))
        return cls(layers, n)

    @classmethod
    def zeros(cls, n: int = 31):
        return cls([(np.zeros((o, i)), np.zeros(o)) for i, o in ae_dims(n)], n)

    def copy(self) -> "AutoencoderWeights":
        return AutoencoderWeights([(W.copy(), b.copy()) for W, b in self.layers], self.n)

    def params(self) -> list[np.ndarray]:
        return [p for layer in self.layers for p in layer]

    def grad_buffer(self) -> tuple[np.ndarray, list[tuple[np.ndarray, np.ndarray]]]:
        """A zeroed flat gradient vector plus per-layer views shaped like the weights."""
        flat = np.zeros_like(self.flat)
        return flat, layer_views(flat, ae_dims(self.n))


@dataclass
class ForwardCache:
    inputs: list[np.ndarray]
    pre: list[np.ndarray]
    masks: list[np.ndarray | None]
    layers: list[tuple[np.ndarray, np.ndarray]]
    single: bool


def keep_probabilities(dropout: str = "retain") -> tuple:
    if dropout == "retain":
        return AE_DROPOUT
    if dropout == "drop":
        return tuple(None if p is None else 1.0 - p for p in AE_DROPOUT)
    raise ValueError(f"dropout must be 'retain' or 'drop', got {dropout!r}")


def mlp_forward(layers, x, relu, keep, rng=None):
    """Generic forward pass; dropout is applied only when ``rng`` is given.

    ``x`` may be a vector or a batch of row vectors.
    """
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    h = x[None, :] if single else x
    inputs, pres, masks = [], [], []
    for (W, b), act, p in zip(layers, relu, keep):
        inputs.append(h)
        z = h @ W.T + b
        pres.append(z)
        h = np.maximum(z, 0.0) if act else z
        if rng is not None and p is not None:
            mask = (rng.random(h.shape) < p) / p
            h = h * mask
        else:
            mask = None
        masks.append(mask)
    cache = ForwardCache(inputs, pres, masks, list(layers), single)
    return (h[0] if single else h), cache


def mlp_backward(cache: ForwardCache, upstream, relu, out=None):
    """Reverse-mode gradients for the pass recorded in ``cache``.

    Returns ``(grads, grad_input)`` where ``grads`` is a list of
    ``(dW, db)`` summed over the batch. When ``out`` holds preallocated
    ``(dW, db)`` arrays the gradients are written into them.
    """
    dy = np.asarray(upstream, dtype=np.float64)
    if cache.single:
        dy = dy[None, :]
    last = cache.pre[-1]
    if dy.shape != last.shape:
        raise StaleCache(f"upstream gradient {dy.shape} does not match output {last.shape}")
    grads = [None] * len(cache.layers)
    for i in range(len(cache.layers) - 1, -1, -1):
        W, _ = cache.layers[i]
        if cache.masks[i] is not None:
            dy = dy * cache.masks[i]
        if relu[i]:
            dy = dy * (cache.pre[i] > 0.0)
        if out is None:
            grads[i] = (dy.T @ cache.inputs[i], dy.sum(axis=0))
        else:
            dW, db = out[i]
            np.matmul(dy.T, cache.inputs[i], out=dW)
            np.sum(dy, axis=0, out=db)
            grads[i] = out[i]
        dy = dy @ W
    return grads, (dy[0] if cache.single else dy)


def ae_forward(w: AutoencoderWeights, x, mode: str = "eval", rng=None, dropout: str = "retain"):
    """Run the autoencoder. ``mode="train"`` needs an ``rng`` for dropout."""
    if mode == "train":
        if rng is None:
            raise ValueError("train mode needs an rng")
    elif mode == "eval":
        rng = None
    else:
        raise ValueError(f"mode must be 'train' or 'eval', got {mode!r}")
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != 3 * w.n:
        raise ValueError(f"input width {x.shape[-1]} != {3 * w.n}")
    return mlp_forward(w.layers, x, AE_RELU, keep_probabilities(dropout), rng)


def ae_backward(cache: ForwardCache, upstream_grad, out=None):
    return mlp_backward(cache, upstream_grad, AE_RELU, out)


# -- optimisation ---------------------------------------------------------------

@dataclass
class TrainState:
    weights: AutoencoderWeights
    lr: float
    momentum_buffer: np.ndarray | None = None
    best_loss: float = float("inf")
    patience_counter: int = 0

    def __post_init__(self):
        if self.lr <= 0:
            raise ValueError("learning rate must be positive")
        if self.momentum_buffer is None:
            self.momentum_buffer = np.zeros_like(self.weights.flat)
        self._scratch = np.empty_like(self.weights.flat)


def _flat_grads(grads) -> np.ndarray:
    if isinstance(grads, np.ndarray):
        return grads
    return np.concatenate([g.reshape(-1) for pair in grads for g in pair])


def sgd_step(state: TrainState, grads, momentum: float = 0.5,
             weight_decay: float = 1e-4) -> TrainState:
    """One SGD step with heavy-ball momentum and L2 weight decay, in place.

    ``g = grad + wd * w``; ``buf = momentum * buf + g``; ``w -= lr * buf``.
    ``grads`` is either a flat vector or a list of ``(dW, db)`` pairs.
    """
    w = state.weights.flat
    buf = state.momentum_buffer
    tmp = state._scratch
    buf *= momentum
    buf += _flat_grads(grads)
    if weight_decay:
        np.multiply(w, weight_decay, out=tmp)
        buf += tmp
    np.multiply(buf, state.lr, out=tmp)
    w -= tmp
    return state


def scheduler_update(state, loss: float, decay: float = 0.5, patience: int = 2000,
                     threshold: float = 1e-4):
    """Reduce-on-plateau: decay ``lr`` once the loss stalls for > ``patience`` updates.

    Works on any object with ``lr``, ``best_loss`` and ``patience_counter``.
    """
    if loss < state.best_loss * (1.0 - threshold):
        state.best_loss = float(loss)
        state.patience_counter = 0
    else:
        state.patience_counter += 1
    if state.patience_counter > patience:
        state.lr *= decay
        state.patience_counter = 0
    return state


# -- checkpoints ----------------------------------------------------------------

def checkpoint_bytes(w: AutoencoderWeights) -> bytes:
    out = [MAGIC, struct.pack("<III", FORMAT_VERSION, w.n, len(w.layers))]
    for W, b in w.layers:
        out.append(struct.pack("<II", *W.shape))
        out.append(np.ascontiguousarray(W, dtype="<f8").tobytes())
        out.append(np.ascontiguousarray(b, dtype="<f8").tobytes())
    return b"".join(out)


def checkpoint_from_bytes(buf: bytes) -> AutoencoderWeights:
    if buf[:4] != MAGIC:
        raise BadMagic(f"expected {MAGIC!r}, got {bytes(buf[:4])!r}")
    pos = 4

    def take(size):
        nonlocal pos
        if pos + size > len(buf):
            raise Truncated(f"checkpoint ends at byte {len(buf)}, needed {pos + size}")
        chunk = buf[pos:pos + size]
        pos += size
        return chunk

    version, n, count = struct.unpack("<III", take(12))
    if version != FORMAT_VERSION:
        raise VersionMismatch(f"checkpoint version {version}, expected {FORMAT_VERSION}")
    layers = []
    for _ in range(count):
        dout, din = struct.unpack("<II", take(8))
        W = np.frombuffer(take(8 * dout * din), dtype="<f8").reshape(dout, din).astype(np.float64)
        b = np.frombuffer(take(8 * dout), dtype="<f8").astype(np.float64)
        layers.append((W, b))
    return AutoencoderWeights(layers, n)


def save_checkpoint(w: AutoencoderWeights, path) -> None:
    Path(path).write_bytes(checkpoint_bytes(w))


def load_checkpoint(path) -> AutoencoderWeights:
    return checkpoint_from_bytes(Path(path).read_bytes())

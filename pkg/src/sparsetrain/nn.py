"""Masked linear layers with reverse-mode gradients, losses, and SGD.

Activations are 2-D arrays of shape (batch, features); weights are
(out_dim, in_dim).  Every layer carries a binary participation mask congruent
to its weights; forward and backward use the effective weights p = w * mask,
while weight gradients are *dense* — defined entrywise for p, masked entries
included — so the optimizer can update all weights (straight-through).

Dot products accumulate in float64 regardless of the storage dtype and are
cast back, which keeps runs bit-reproducible on a given build and makes
finite-difference checks meaningful.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ShapeError
from .schedules import LrSchedule, lr_at

ACTIVATIONS = ("relu", "tanh")


def _f64(a: np.ndarray) -> np.ndarray:
    return np.asarray(a, dtype=np.float64)


def _matmul(a: np.ndarray, b: np.ndarray, out_dtype) -> np.ndarray:
    return (_f64(a) @ _f64(b)).astype(out_dtype, copy=False)


@dataclass
class LinearLayer:
    """A linear layer y = x @ (w * mask)^T + bias.

    ``sparsify`` marks whether a sparsity policy applies to this layer; the
    mask of a non-sparsified layer stays all-ones.  Biases are never masked.
    """

    weights: np.ndarray
    mask: np.ndarray
    bias: np.ndarray | None = None
    sparsify: bool = True
    name: str = ""

    def __post_init__(self):
        if self.weights.ndim != 2:
            raise ShapeError(f"weights must be 2-D, got shape {self.weights.shape}")
        if self.mask.shape != self.weights.shape:
            raise ShapeError(
                f"mask shape {self.mask.shape} != weights shape {self.weights.shape}"
            )
        if self.bias is not None and self.bias.shape != (self.weights.shape[0],):
            raise ShapeError(f"bias shape {self.bias.shape} != ({self.weights.shape[0]},)")

    @property
    def out_dim(self) -> int:
        return self.weights.shape[0]

    @property
    def in_dim(self) -> int:
        return self.weights.shape[1]

    @property
    def effective_weights(self) -> np.ndarray:
        return self.weights * self.mask

    @property
    def density(self) -> float:
        return float(np.count_nonzero(self.mask)) / self.mask.size

    @classmethod
    def create(cls, out_dim, in_dim, rng, dtype=np.float32, bias=True, name=""):
        """Scaled-normal init (std = sqrt(2/in_dim)), zero bias, all-ones mask."""
        w = (rng.standard_normal((out_dim, in_dim)) * np.sqrt(2.0 / in_dim)).astype(dtype)
        b = np.zeros(out_dim, dtype=dtype) if bias else None
        return cls(weights=w, mask=np.ones((out_dim, in_dim), dtype=dtype), bias=b, name=name)


def linear_forward(layer: LinearLayer, x: np.ndarray) -> np.ndarray:
    """out = x @ (w * mask)^T (+ bias); masked entries contribute nothing."""
    x = np.asarray(x)
    if x.ndim != 2 or x.shape[1] != layer.in_dim:
        raise ShapeError(f"input shape {x.shape} incompatible with in_dim {layer.in_dim}")
    out = _matmul(x, layer.effective_weights.T, x.dtype)
    if layer.bias is not None:
        out = out + layer.bias
    return out


def linear_backward(layer: LinearLayer, x: np.ndarray, grad_out: np.ndarray):
    """Gradients for one layer.

    Returns (grad_input, grad_weights, grad_bias).  grad_input flows through
    the masked weights; grad_weights is dense — the derivative of the loss
    with respect to the effective entry p[i, j], defined for every entry
    including masked ones.
    """
    x = np.asarray(x)
    grad_out = np.asarray(grad_out)
    if x.ndim != 2 or x.shape[1] != layer.in_dim:
        raise ShapeError(f"input shape {x.shape} incompatible with in_dim {layer.in_dim}")
    if grad_out.shape != (x.shape[0], layer.out_dim):
        raise ShapeError(
            f"grad_out shape {grad_out.shape} != ({x.shape[0]}, {layer.out_dim})"
        )
    grad_input = _matmul(grad_out, layer.effective_weights, x.dtype)
    grad_weights = _matmul(grad_out.T, x, layer.weights.dtype)
    grad_bias = None if layer.bias is None else grad_out.sum(axis=0, dtype=np.float64).astype(
        layer.bias.dtype
    )
    return grad_input, grad_weights, grad_bias


# ---------------------------------------------------------------------------
# Losses.  Conventions: mse is the mean of squared errors over *all* entries;
# cross_entropy is the mean over the batch of -log softmax(logits)[label].
# Both return (value, grad wrt predictions).

def mse_loss(predictions: np.ndarray, targets: np.ndarray):
    predictions = np.asarray(predictions)
    targets = np.asarray(targets)
    if predictions.shape != targets.shape:
        raise ShapeError(f"shape mismatch {predictions.shape} vs {targets.shape}")
    if predictions.size == 0:
        raise ValueError("empty batch")
    diff = _f64(predictions) - _f64(targets)
    value = float(np.mean(diff * diff))
    grad = (2.0 * diff / diff.size).astype(predictions.dtype, copy=False)
    return value, grad


def cross_entropy_loss(logits: np.ndarray, labels: np.ndarray):
    logits = np.asarray(logits)
    labels = np.asarray(labels)
    if logits.ndim != 2:
        raise ShapeError(f"logits must be 2-D, got {logits.shape}")
    if labels.shape != (logits.shape[0],):
        raise ShapeError(f"labels shape {labels.shape} != ({logits.shape[0]},)")
    if logits.shape[0] == 0:
        raise ValueError("empty batch")
    z = _f64(logits)
    z = z - z.max(axis=1, keepdims=True)
    expz = np.exp(z)
    probs = expz / expz.sum(axis=1, keepdims=True)
    batch = logits.shape[0]
    picked = probs[np.arange(batch), labels]
    value = float(-np.mean(np.log(picked)))
    grad = probs
    grad[np.arange(batch), labels] -= 1.0
    grad /= batch
    return value, grad.astype(logits.dtype, copy=False)


def loss(kind: str, predictions: np.ndarray, targets: np.ndarray):
    """Dispatch on kind in {"mse", "cross_entropy"}."""
    if kind == "mse":
        return mse_loss(predictions, targets)
    if kind == "cross_entropy":
        return cross_entropy_loss(predictions, targets)
    raise ValueError(f"unknown loss kind {kind!r}")


# ---------------------------------------------------------------------------
# Activations.

def _activate(kind: str, pre: np.ndarray) -> np.ndarray:
    if kind == "relu":
        return np.maximum(pre, 0)
    if kind == "tanh":
        return np.tanh(pre)
    raise ValueError(f"unknown activation {kind!r}")


def _activate_grad(kind: str, pre: np.ndarray, grad: np.ndarray) -> np.ndarray:
    if kind == "relu":
        return grad * (pre > 0)
    if kind == "tanh":
        t = np.tanh(pre)
        return grad * (1.0 - t * t)
    raise ValueError(f"unknown activation {kind!r}")


class MLP:
    """A stack of masked linear layers with an activation between them."""

    def __init__(self, layers: list[LinearLayer], activation: str = "relu"):
        if activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {activation!r}")
        self.layers = layers
        self.activation = activation

    @classmethod
    def build(cls, dims, rng, dtype=np.float32, activation="relu", bias=True):
        """Build from a dim chain [in, hidden..., out]."""
        if len(dims) < 2:
            raise ValueError("need at least input and output dims")
        layers = [
            LinearLayer.create(dims[i + 1], dims[i], rng, dtype=dtype, bias=bias, name=f"fc{i}")
            for i in range(len(dims) - 1)
        ]
        return cls(layers, activation=activation)

    def forward(self, x: np.ndarray):
        """Returns (output, cache) where cache holds per-layer inputs and preactivations."""
        cache = []
        h = np.asarray(x)
        for i, layer in enumerate(self.layers):
            pre = linear_forward(layer, h)
            cache.append((h, pre))
            h = _activate(self.activation, pre) if i < len(self.layers) - 1 else pre
        return h, cache

    def backward(self, cache, grad_out: np.ndarray):
        """Returns (weight grads, bias grads), both dense, in layer order."""
        grads_w = [None] * len(self.layers)
        grads_b = [None] * len(self.layers)
        g = grad_out
        for i in reversed(range(len(self.layers))):
            x_in, pre = cache[i]
            if i < len(self.layers) - 1:
                g = _activate_grad(self.activation, pre, g)
            g, grads_w[i], grads_b[i] = linear_backward(self.layers[i], x_in, g)
        return grads_w, grads_b

    def predict(self, x: np.ndarray) -> np.ndarray:
        out, _ = self.forward(x)
        return out


def network_loss_and_grads(net: MLP, x: np.ndarray, targets: np.ndarray, loss_kind: str):
    """One forward/backward pass; returns (loss value, output, weight grads, bias grads)."""
    out, cache = net.forward(x)
    value, grad_out = loss(loss_kind, out, targets)
    grads_w, grads_b = net.backward(cache, grad_out)
    return value, out, grads_w, grads_b


class SgdMomentum:
    """SGD with classical momentum: v <- mu*v + g; w <- w - lr*v.

    Updates are dense — applied to every weight, participating or not.
    Velocity buffers are keyed by caller-chosen names and live in the storage
    dtype of the tensors they track.
    """

    def __init__(self, schedule: LrSchedule, momentum: float = 0.0):
        if not 0.0 <= momentum < 1.0:
            raise ValueError(f"momentum must be in [0, 1), got {momentum}")
        self.schedule = schedule
        self.momentum = momentum
        self.velocities: dict[str, np.ndarray] = {}

    def update(self, key: str, weights: np.ndarray, grads: np.ndarray, step: int) -> np.ndarray:
        if grads.shape != weights.shape:
            raise ShapeError(f"grads shape {grads.shape} != weights shape {weights.shape}")
        v = self.velocities.get(key)
        if v is None:
            v = np.zeros_like(weights)
            self.velocities[key] = v
        v *= self.momentum
        v += grads
        weights -= lr_at(self.schedule, step) * v
        return weights

"""Dense layers, initialization and the Adam optimizer.

Layers operate on column-major batches: an input of shape (in_dim, B) maps
to (out_dim, B) via act(W x + b). Biases are stored as (out_dim, 1) so they
broadcast over the batch axis.
"""

from __future__ import annotations

from collections import OrderedDict

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor

ACTIVATIONS = {
    "linear": lambda x: x,
    "relu": ad.relu,
    "clip_tx": ad.clip_tx,
    "sigmoid": ad.sigmoid,
    "softmax": ad.softmax_cols,
}


def glorot_uniform(rng: np.random.Generator, out_dim: int, in_dim: int) -> np.ndarray:
    """Symmetric uniform init in +-sqrt(6 / (fan_in + fan_out))."""
    a = np.sqrt(6.0 / (in_dim + out_dim))
    return rng.uniform(-a, a, size=(out_dim, in_dim))


class DenseLayer:
    """Affine map with a named activation; weights are graph leaves."""

    def __init__(self, out_dim: int, in_dim: int, activation: str,
                 rng: np.random.Generator, name: str = "dense"):
        if activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {activation!r}")
        self.out_dim = out_dim
        self.in_dim = in_dim
        self.activation = activation
        self.name = name
        self.W = Tensor(glorot_uniform(rng, out_dim, in_dim), requires_grad=True)
        self.b = Tensor(np.zeros((out_dim, 1)), requires_grad=True)

    def __call__(self, x: Tensor) -> Tensor:
        return ACTIVATIONS[self.activation](ad.matmul(self.W, x) + self.b)

    def forward_np(self, x: np.ndarray) -> np.ndarray:
        return apply_activation_np(self.activation, self.W.values @ x + self.b.values)

    def parameters(self) -> OrderedDict:
        return OrderedDict([(f"{self.name}.W", self.W), (f"{self.name}.b", self.b)])


def apply_activation_np(kind: str, x: np.ndarray) -> np.ndarray:
    """Plain-numpy activations mirroring the graph ops (inference path)."""
    if kind == "linear":
        return x
    if kind == "relu":
        return np.maximum(x, 0.0)
    if kind == "clip_tx":
        return np.clip(x, 0.0, ad.TX_CLIP_MAX)
    if kind == "sigmoid":
        out = np.empty_like(x)
        pos = x >= 0
        out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
        ex = np.exp(x[~pos])
        out[~pos] = ex / (1.0 + ex)
        return out
    if kind == "softmax":
        z = x - x.max(axis=0, keepdims=True)
        e = np.exp(z)
        return e / e.sum(axis=0, keepdims=True)
    raise ValueError(f"unknown activation {kind!r}")


class Adam:
    """Bias-corrected Adam over an ordered parameter dict."""

    def __init__(self, params: OrderedDict, lr: float = 1e-3,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.params = params
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = {k: np.zeros_like(p.values) for k, p in params.items()}
        self.v = {k: np.zeros_like(p.values) for k, p in params.items()}

    def step(self):
        self.t += 1
        c1 = 1.0 - self.beta1 ** self.t
        c2 = 1.0 - self.beta2 ** self.t
        for k, p in self.params.items():
            g = p.grad if p.grad is not None else np.zeros_like(p.values)
            if g.shape != p.values.shape:
                raise ValueError(f"gradient shape mismatch for {k}")
            m = self.m[k]
            v = self.v[k]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            p.values -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)

    def zero_grad(self):
        for p in self.params.values():
            p.zero_grad()

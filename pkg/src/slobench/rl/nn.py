"""A small feed-forward network with hand-written reverse mode and Adam.

Parameters live in one flat float64 vector; per-layer weights and biases are
views into it, so copying, hashing and checkpointing a network is copying one
array. The trunk uses ReLU and every head is linear.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class NetSpec:
    in_dim: int
    hidden: tuple
    heads: tuple                  # output width of each head
    head_gains: tuple | None = None  # weight scale per head

    def layer_shapes(self):
        shapes, prev = [], self.in_dim
        for h in self.hidden:
            shapes.append((prev, h))
            prev = h
        for out in self.heads:
            shapes.append((prev, out))
        return shapes

    def n_params(self) -> int:
        return sum(i * o + o for i, o in self.layer_shapes())


class MLP:
    def __init__(self, spec: NetSpec, rng: np.random.Generator | None = None):
        self.spec = spec
        self.params = np.zeros(spec.n_params())
        self._slices = []
        pos = 0
        for i, o in spec.layer_shapes():
            w = slice(pos, pos + i * o)
            b = slice(pos + i * o, pos + i * o + o)
            self._slices.append((w, b, (i, o)))
            pos += i * o + o
        if rng is not None:
            self.init(rng)

    def init(self, rng: np.random.Generator):
        gains = self.spec.head_gains or (1.0,) * len(self.spec.heads)
        n_hidden = len(self.spec.hidden)
        for li, (w, b, (i, o)) in enumerate(self._slices):
            bound = 1.0 / np.sqrt(i)
            scale = gains[li - n_hidden] if li >= n_hidden else 1.0
            self.params[w] = scale * rng.uniform(-bound, bound, size=i * o)
            self.params[b] = 0.0

    def layers(self, params=None):
        p = self.params if params is None else params
        return [(p[w].reshape(shape), p[b]) for w, b, shape in self._slices]

    def forward(self, x, params=None):
        """Outputs of every head plus the cache needed by ``backward``."""
        x = np.asarray(x, dtype=float)
        layers = self.layers(params)
        n_hidden = len(self.spec.hidden)
        acts = [x]
        h = x
        for W, b in layers[:n_hidden]:
            h = np.maximum(h @ W + b, 0.0)
            acts.append(h)
        outs = [h @ W + b for W, b in layers[n_hidden:]]
        return outs, (acts, layers)

    def __call__(self, x, params=None):
        return self.forward(x, params)[0]

    def backward(self, cache, d_outs) -> np.ndarray:
        """Gradient of sum(d_out * out) with respect to the flat parameters."""
        acts, layers = cache
        grad = np.zeros_like(self.params)
        n_hidden = len(self.spec.hidden)
        top = acts[-1]
        d_top = np.zeros_like(top)
        for k, d in enumerate(d_outs):
            if d is None:
                continue
            li = n_hidden + k
            W, _ = layers[li]
            w, b, _ = self._slices[li]
            grad[w] = (top.T @ d).reshape(-1)
            grad[b] = d.sum(axis=0)
            d_top += d @ W.T
        d_h = d_top
        for li in range(n_hidden - 1, -1, -1):
            W, _ = layers[li]
            w, b, _ = self._slices[li]
            d_pre = d_h * (acts[li + 1] > 0)
            grad[w] = (acts[li].T @ d_pre).reshape(-1)
            grad[b] = d_pre.sum(axis=0)
            d_h = d_pre @ W.T
        return grad


class Adam:
    def __init__(self, n: int, lr: float = 1e-4, beta1: float = 0.9, beta2: float = 0.999,
                 eps: float = 1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = np.zeros(n)
        self.v = np.zeros(n)
        self.t = 0

    def step(self, params: np.ndarray, grad: np.ndarray):
        """In-place update of ``params``."""
        self.t += 1
        self.m = self.beta1 * self.m + (1 - self.beta1) * grad
        self.v = self.beta2 * self.v + (1 - self.beta2) * grad * grad
        m_hat = self.m / (1 - self.beta1 ** self.t)
        v_hat = self.v / (1 - self.beta2 ** self.t)
        params -= self.lr * m_hat / (np.sqrt(v_hat) + self.eps)

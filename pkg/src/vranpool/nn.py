"""Small numpy MLP with layer normalisation, manual backprop and Adam."""
from __future__ import annotations

import numpy as np

LN_EPS = 1e-5


class ShapeError(ValueError):
    pass


class Mlp:
    """``Linear -> LayerNorm -> ReLU`` per hidden layer, linear output.

    Parameters live in ``self.params`` (name -> array); weights are stored
    ``(fan_in, fan_out)`` so a forward pass is ``x @ W + b``.
    """

    def __init__(self, n_in: int, hidden: list[int], n_out: int, rng=None, layer_norm: bool = True):
        self.sizes = [n_in, *hidden, n_out]
        self.layer_norm = layer_norm
        self.params: dict[str, np.ndarray] = {}
        rng = np.random.default_rng(rng)
        for i, (fan_in, fan_out) in enumerate(zip(self.sizes, self.sizes[1:])):
            bound = 1.0 / np.sqrt(fan_in)
            self.params[f"l{i}.W"] = rng.uniform(-bound, bound, (fan_in, fan_out))
            self.params[f"l{i}.b"] = rng.uniform(-bound, bound, fan_out)
            if layer_norm and i < len(hidden):
                self.params[f"ln{i}.g"] = np.ones(fan_out)
                self.params[f"ln{i}.b"] = np.zeros(fan_out)

    @property
    def n_in(self) -> int:
        return self.sizes[0]

    @property
    def n_out(self) -> int:
        return self.sizes[-1]

    @property
    def n_layers(self) -> int:
        return len(self.sizes) - 1

    def shapes(self) -> dict[str, tuple[int, ...]]:
        return {k: v.shape for k, v in self.params.items()}

    def copy_from(self, other: "Mlp") -> None:
        if other.shapes() != self.shapes():
            raise ShapeError("cannot copy between networks of different shapes")
        for k, v in other.params.items():
            np.copyto(self.params[k], v)

    def forward_hidden(self, x: np.ndarray):
        """Run every layer but the output one; return ``(h, cache)``."""
        x = np.asarray(x, dtype=np.float64)
        if x.ndim != 2 or x.shape[1] != self.n_in:
            raise ShapeError(f"expected input (B, {self.n_in}), got {x.shape}")
        p = self.params
        cache = []
        h = x
        for i in range(self.n_layers - 1):
            z = h @ p[f"l{i}.W"] + p[f"l{i}.b"]
            ln = None
            if self.layer_norm:
                mu = z.mean(axis=1, keepdims=True)
                zc = z - mu
                inv = 1.0 / np.sqrt((zc * zc).mean(axis=1, keepdims=True) + LN_EPS)
                zhat = zc * inv
                ln = (zhat, inv)
                z = zhat * p[f"ln{i}.g"] + p[f"ln{i}.b"]
            act = z > 0
            cache.append((h, ln, act))
            h = z * act
        return h, cache

    def backward_hidden(self, cache, dh: np.ndarray, grads: dict) -> np.ndarray:
        """Backprop ``dh`` through the hidden layers, filling ``grads``; return ``dx``."""
        p = self.params
        d = dh
        for i in reversed(range(self.n_layers - 1)):
            h, ln, act = cache[i]
            d = d * act
            if ln is not None:
                zhat, inv = ln
                grads[f"ln{i}.g"] = (d * zhat).sum(axis=0)
                grads[f"ln{i}.b"] = d.sum(axis=0)
                dz = d * p[f"ln{i}.g"]
                d = inv * (dz - dz.mean(axis=1, keepdims=True)
                           - zhat * (dz * zhat).mean(axis=1, keepdims=True))
            grads[f"l{i}.W"] = h.T @ d
            grads[f"l{i}.b"] = d.sum(axis=0)
            d = d @ p[f"l{i}.W"].T
        return d

    def forward(self, x: np.ndarray):
        """Return ``(y, cache)`` for a batch ``x`` of shape ``(B, n_in)``."""
        h, cache = self.forward_hidden(x)
        last = self.n_layers - 1
        y = h @ self.params[f"l{last}.W"] + self.params[f"l{last}.b"]
        return y, (h, cache)

    def backward(self, cache, dy: np.ndarray):
        """Return ``(dx, grads)`` given upstream gradient ``dy``."""
        h, hidden_cache = cache
        last = self.n_layers - 1
        grads = {f"l{last}.W": h.T @ dy, f"l{last}.b": dy.sum(axis=0)}
        dh = dy @ self.params[f"l{last}.W"].T
        dx = self.backward_hidden(hidden_cache, dh, grads)
        return dx, grads


class Adam:
    def __init__(self, params: dict[str, np.ndarray], lr=1e-4, beta1=0.9, beta2=0.999, eps=1e-8):
        self.params = params
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.t = 0
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}

    def step(self, grads: dict[str, np.ndarray]) -> None:
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        c1 = 1.0 - b1 ** self.t
        c2 = 1.0 - b2 ** self.t
        for k, g in grads.items():
            m, v = self.m[k], self.v[k]
            m *= b1
            m += (1.0 - b1) * g
            v *= b2
            v += (1.0 - b2) * (g * g)
            self.params[k] -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)

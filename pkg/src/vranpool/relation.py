"""Permutation-invariant encoding of a vBS set into a fixed-size state.

Every unordered pair of instances is fed to a shared pair MLP in both
orders and the outputs are summed.  A single instance is encoded through its
self pair, counted once so that one vBS and two identical vBSs differ.
Contexts are put in a canonical (lexicographic) order first, which makes the
floating-point summation order, and hence the result, bitwise independent of
the input order.
"""
from __future__ import annotations

from functools import lru_cache

import numpy as np

from .nn import Mlp, ShapeError

N_FEATURES = 4


def canonical_order(features: np.ndarray) -> np.ndarray:
    features = np.asarray(features, dtype=np.float64)
    if features.ndim != 2 or features.shape[1] != N_FEATURES or len(features) == 0:
        raise ShapeError(f"expected non-empty (n, {N_FEATURES}) features, got {features.shape}")
    return features[np.lexsort(features.T[::-1])]


@lru_cache(maxsize=None)
def pair_index(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Left/right instance indices of the pair rows for ``n`` instances."""
    if n < 1:
        raise ValueError("need at least one instance")
    if n == 1:
        return np.array([0]), np.array([0])
    left, right = [], []
    for i in range(n):
        for j in range(i + 1, n):
            left += [i, j]
            right += [j, i]
    return np.array(left), np.array(right)


def n_pair_rows(n: int) -> int:
    return 1 if n == 1 else n * (n - 1)


def pair_inputs(features: np.ndarray) -> np.ndarray:
    """Rows ``x_i ++ x_j`` for an already canonical ``(n, 4)`` feature matrix."""
    left, right = pair_index(len(features))
    return np.concatenate([features[left], features[right]], axis=1)


class RelationNet:
    def __init__(self, d_state: int = 128, hidden: int = 128, rng=None):
        self.mlp = Mlp(2 * N_FEATURES, [hidden], d_state, rng=rng)

    @property
    def d_state(self) -> int:
        return self.mlp.n_out

    @property
    def params(self) -> dict[str, np.ndarray]:
        return self.mlp.params

    def forward_batch(self, feats: np.ndarray, counts: np.ndarray):
        """Encode a padded batch.

        ``feats`` is ``(B, M, 4)`` with each sample's first ``counts[b]`` rows
        canonical; returns ``(S, cache)`` with ``S`` of shape ``(B, D)``.
        The output layer is linear, so hidden activations are summed per
        sample before it: ``sum_p (h_p W + b) = (sum_p h_p) W + P b``.
        """
        counts = np.asarray(counts)
        groups = []
        blocks = []
        for n in np.unique(counts):
            sel = np.flatnonzero(counts == n)
            left, right = pair_index(int(n))
            f = feats[sel, :n]
            blocks.append(np.concatenate([f[:, left], f[:, right]], axis=2).reshape(-1, 2 * N_FEATURES))
            groups.append((sel, len(left)))
        h, hidden_cache = self.mlp.forward_hidden(np.concatenate(blocks))
        pooled = np.empty((len(counts), h.shape[1]))
        n_rows = np.empty(len(counts))
        row = 0
        for sel, k_rows in groups:
            k = len(sel) * k_rows
            pooled[sel] = h[row:row + k].reshape(len(sel), k_rows, -1).sum(axis=1)
            n_rows[sel] = k_rows
            row += k
        last = self.mlp.n_layers - 1
        s = pooled @ self.params[f"l{last}.W"] + n_rows[:, None] * self.params[f"l{last}.b"]
        return s, (groups, hidden_cache, pooled, n_rows)

    def backward_batch(self, cache, ds: np.ndarray) -> dict[str, np.ndarray]:
        groups, hidden_cache, pooled, n_rows = cache
        last = self.mlp.n_layers - 1
        grads = {f"l{last}.W": pooled.T @ ds, f"l{last}.b": n_rows @ ds}
        dpooled = ds @ self.params[f"l{last}.W"].T
        dh = np.concatenate([np.repeat(dpooled[sel], k_rows, axis=0) for sel, k_rows in groups])
        self.mlp.backward_hidden(hidden_cache, dh, grads)
        return grads

    def encode(self, features: np.ndarray) -> np.ndarray:
        f = canonical_order(features)
        s, _ = self.forward_batch(f[None], np.array([len(f)]))
        return s[0]


def encode(features: np.ndarray, rn: RelationNet) -> np.ndarray:
    return rn.encode(features)


def encode_backward(features: np.ndarray, rn: RelationNet, ds: np.ndarray) -> dict[str, np.ndarray]:
    f = canonical_order(features)
    ds = np.asarray(ds, dtype=np.float64)
    if ds.shape != (rn.d_state,):
        raise ShapeError(f"ds must have shape ({rn.d_state},), got {ds.shape}")
    _, cache = rn.forward_batch(f[None], np.array([len(f)]))
    return rn.backward_batch(cache, ds[None])

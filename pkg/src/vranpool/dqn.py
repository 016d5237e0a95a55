"""Q-learning pieces: loss, targets, exploration schedule, replay, update."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .nn import Adam, Mlp, ShapeError
from .relation import N_FEATURES, RelationNet


def smooth_l1(x):
    ax = np.abs(x)
    return np.where(ax < 1.0, 0.5 * x * x, ax - 0.5)


def smooth_l1_grad(x):
    return np.where(np.abs(x) < 1.0, x, np.sign(x))


def td_target(r, next_q_max, gamma):
    return r + gamma * next_q_max


def epsilon(step: int, eps_min: float, decay: float) -> float:
    if step < 0:
        raise ValueError("step must be >= 0")
    return eps_min + (1.0 - eps_min) * math.exp(-step / decay)


@dataclass(frozen=True)
class Transition:
    s: np.ndarray          # encoded state at decision time
    a: int                 # action, 1..2N
    r: float
    features: np.ndarray   # (n, 4) canonical context features


class ReplayBuffer:
    """FIFO ring buffer of transitions, contexts zero-padded to ``max_vbs``."""

    def __init__(self, capacity: int, max_vbs: int, d_state: int):
        if capacity < 1:
            raise ValueError("capacity must be >= 1")
        self.capacity = capacity
        self.max_vbs = max_vbs
        self.feats = np.zeros((capacity, max_vbs, N_FEATURES))
        self.counts = np.zeros(capacity, dtype=np.int64)
        self.actions = np.zeros(capacity, dtype=np.int64)
        self.rewards = np.zeros(capacity)
        self.states = np.zeros((capacity, d_state))
        self.cursor = 0
        self.size = 0

    def __len__(self) -> int:
        return self.size

    def push(self, tr: Transition) -> None:
        n = len(tr.features)
        if not 1 <= n <= self.max_vbs:
            raise ShapeError(f"transition holds {n} contexts, buffer allows 1..{self.max_vbs}")
        k = self.cursor
        self.feats[k] = 0.0
        self.feats[k, :n] = tr.features
        self.counts[k] = n
        self.actions[k] = tr.a
        self.rewards[k] = tr.r
        self.states[k] = tr.s
        self.cursor = (k + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def _slot(self, i: int) -> int:
        if not 0 <= i < self.size:
            raise IndexError(i)
        # oldest surviving item is index 0
        start = self.cursor if self.size == self.capacity else 0
        return (start + i) % self.capacity

    def __getitem__(self, i: int) -> Transition:
        k = self._slot(i)
        n = self.counts[k]
        return Transition(self.states[k].copy(), int(self.actions[k]), float(self.rewards[k]),
                          self.feats[k, :n].copy())

    def sample(self, batch_size: int, rng: np.random.Generator) -> np.ndarray:
        """Slot indices of a uniform batch drawn without replacement."""
        return rng.choice(self.size, size=batch_size, replace=False)


def sync_target(primary: Mlp, target: Mlp) -> None:
    target.copy_from(primary)


def train_step(rn: RelationNet, dqn: Mlp, target: Mlp, feats: np.ndarray, counts: np.ndarray,
               actions: np.ndarray, rewards: np.ndarray, optimizer: Adam, gamma: float = 0.0,
               prefix: tuple[str, str] = ("rn.", "dqn.")) -> float:
    """One gradient step on the mean smooth-L1 TD error of a batch.

    ``actions`` are external indices ``1..2N``.  Optimizer parameter names
    are the network parameter names with ``prefix`` prepended.
    """
    batch = len(counts)
    if batch == 0:
        raise ValueError("empty batch")
    s, rn_cache = rn.forward_batch(feats, counts)
    q, q_cache = dqn.forward(s)
    idx = np.asarray(actions) - 1
    if idx.min() < 0 or idx.max() >= q.shape[1]:
        raise ValueError("action index outside the Q output layer")
    rows = np.arange(batch)
    next_q, _ = target.forward(s)
    y = td_target(np.asarray(rewards, dtype=np.float64), next_q.max(axis=1), gamma)
    x = y - q[rows, idx]
    loss = float(smooth_l1(x).mean())

    dq = np.zeros_like(q)
    dq[rows, idx] = -smooth_l1_grad(x) / batch
    ds, g_dqn = dqn.backward(q_cache, dq)
    g_rn = rn.backward_batch(rn_cache, ds)

    grads = {prefix[0] + k: v for k, v in g_rn.items()}
    grads.update({prefix[1] + k: v for k, v in g_dqn.items()})
    bad = [k for k, g in grads.items() if not np.all(np.isfinite(g))]
    if bad or not math.isfinite(loss):
        raise FloatingPointError(f"non-finite gradient in {bad or 'loss'} (loss={loss})")
    optimizer.step(grads)
    return loss

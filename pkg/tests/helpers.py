"""Shared test utilities: finite differences and gradient capture."""
import numpy as np

from vranpool import dqn


class GradCapture:
    """Stands in for the optimizer so a train step only records gradients."""

    def __init__(self):
        self.grads = None

    def step(self, grads):
        self.grads = grads


def batch_loss(rn, net, target, feats, counts, actions, rewards, gamma=0.0):
    s, _ = rn.forward_batch(feats, counts)
    q, _ = net.forward(s)
    nq, _ = target.forward(s)
    y = rewards + gamma * nq.max(axis=1)
    return float(dqn.smooth_l1(y - q[np.arange(len(counts)), actions - 1]).mean())


def analytic_grads(rn, net, target, feats, counts, actions, rewards, gamma=0.0):
    cap = GradCapture()
    loss = dqn.train_step(rn, net, target, feats, counts, actions, rewards, cap, gamma)
    return loss, cap.grads


def fd(f, arr, idx, h=1e-6):
    """Central difference of the scalar ``f()`` with respect to ``arr[idx]``."""
    old = arr[idx]
    arr[idx] = old + h
    up = f()
    arr[idx] = old - h
    down = f()
    arr[idx] = old
    return (up - down) / (2 * h)


def rel_err(a, b, floor=1e-8):
    return abs(a - b) / max(abs(a), abs(b), floor)


def random_batch(rng, batch, max_vbs, n_actions, counts=None):
    if counts is None:
        counts = rng.integers(1, max_vbs + 1, batch)
    feats = np.zeros((batch, max_vbs, 4))
    for b, n in enumerate(counts):
        f = rng.random((n, 4))
        feats[b, :n] = f[np.lexsort(f.T[::-1])]
    actions = rng.integers(1, n_actions + 1, batch)
    rewards = -rng.random(batch)
    return feats, np.asarray(counts), actions, rewards

"""Reference allocators: isolation-assuming SIRA and exhaustive oracles."""
from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from .env import VbsContext, VranEnv
from .topology import ActivationVector


class SiraModel:
    """Allocates for the sum of isolated per-vBS demands.

    One predictor per vBS-count scenario, each fitted only on single-instance
    behaviour; by default every scenario uses the simulator's exact isolated
    demand, which makes this an upper bound for isolation-assuming methods.
    """

    def __init__(self, env: VranEnv, predictors: dict[int, Callable[[VbsContext], float]] | None = None):
        self.env = env
        self.predictors = predictors or {n: env.base_demand for n in range(1, env.params.max_vbs + 1)}
        topo = env.topology
        self._capacity = np.array([env.capacity(topo.rho(a)) for a in topo.actions])

    def predicted_demand(self, contexts: Sequence[VbsContext]) -> float:
        predict = self.predictors[len(contexts)]
        return sum(predict(x) for x in contexts)

    def allocate(self, contexts: Sequence[VbsContext]) -> tuple[int, ActivationVector]:
        """Fewest cores whose ``rho`` capacity covers the isolated demand."""
        need = self.predicted_demand(contexts)
        fits = np.flatnonzero(self._capacity >= need)
        a = int(fits[0]) + 1 if len(fits) else self.env.topology.n_virtual
        return a, self.env.topology.rho(a)


def sira_allocate(contexts: Sequence[VbsContext], env: VranEnv) -> tuple[int, ActivationVector]:
    return SiraModel(env).allocate(contexts)


def oracle_rewards(contexts: Sequence[VbsContext], env: VranEnv, seed) -> np.ndarray:
    """Reward of every action ``a`` (index ``a - 1``) under shared noise."""
    return env.evaluate_actions(contexts, seed).reward


def best_action(rewards: np.ndarray) -> int:
    """Highest reward, ties to the smaller core count."""
    return int(np.argmax(rewards)) + 1


def oracle_allocate(contexts: Sequence[VbsContext], env: VranEnv, seed) -> tuple[int, ActivationVector, float]:
    r = oracle_rewards(contexts, env, seed)
    a = best_action(r)
    return a, env.topology.rho(a), float(r[a - 1])


def full_oracle(contexts: Sequence[VbsContext], env: VranEnv, seed) -> tuple[ActivationVector, float]:
    """Best vector over all ``2^(2N) - 1`` activation vectors (small N only)."""
    topo = env.topology
    if topo.n_physical > 3:
        raise ValueError("full enumeration is limited to N <= 3")
    vectors = [v for a in topo.actions for v in topo.enumerate_activation_vectors(a)]
    masks = np.stack([topo.mask(v) for v in vectors])
    r = env.evaluate(contexts, masks, seed).reward
    k = int(np.argmax(r))
    return vectors[k], float(r[k])

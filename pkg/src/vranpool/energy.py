"""Per-core energy cost and the service-gated interval reward."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .topology import GppTopology


@dataclass(frozen=True)
class EnergyParams:
    alpha1: float = 0.4   # core active
    alpha2: float = 0.2   # core idle, sibling active
    alpha3: float = 0.05  # whole physical CPU idle
    beta: float = 0.6

    def __post_init__(self):
        if not self.alpha1 > self.alpha2 > self.alpha3 >= 0:
            raise ValueError("need alpha1 > alpha2 > alpha3 >= 0")
        if self.beta < 0 or self.alpha1 + self.beta > 1:
            raise ValueError("need beta >= 0 and alpha1 + beta <= 1")

    def as_args(self) -> tuple[float, float, float, float]:
        return self.alpha1, self.alpha2, self.alpha3, self.beta


def core_cost(c_j: float, c_sibling: float, params: EnergyParams) -> float:
    if c_j > 0:
        return params.alpha1 + params.beta * c_j
    if c_sibling > 0:
        return params.alpha2
    return params.alpha3


def core_costs(usage: np.ndarray, topology: GppTopology, params: EnergyParams) -> np.ndarray:
    usage = np.ascontiguousarray(usage, dtype=np.float64)
    if usage.shape != (topology.n_virtual,):
        raise ValueError(f"usage must have shape ({topology.n_virtual},), got {usage.shape}")
    return kernels.core_costs(usage, topology.n_physical, *params.as_args())


def energy_cost(usage: np.ndarray, topology: GppTopology, params: EnergyParams) -> float:
    """Mean core cost over all 2N virtual cores."""
    # sequential sum, same order as the interval kernel
    return sum(core_costs(usage, topology, params).tolist()) / topology.n_virtual


def reward(outcome, contexts, topology: GppTopology, params: EnergyParams) -> float:
    """-1 if any vBS misses DL or UL demand, else minus the mean core cost."""
    if len(outcome.tput_dl) != len(contexts) or len(outcome.tput_ul) != len(contexts):
        raise ValueError("outcome throughputs do not match the context list")
    if not outcome.all_demand_met:
        return -1.0
    return -energy_cost(outcome.core_usage, topology, params)

"""One decision interval of a shared CPU pool hosting several vBS instances.

The contention model inflates the isolated per-vBS CPU demand by a slowdown
built from measured IPC degradation plus seccomp and context-switch taxes.
Capacity of an activation vector counts a lone virtual core as one core and
each virtual core whose SMT sibling is also active as ``smt_share`` of one.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import kernels, radio
from .energy import EnergyParams
from .topology import ActivationVector, GppTopology


class InvalidEpisodeError(ValueError):
    """Raised for an empty or oversized vBS set."""


@dataclass(frozen=True)
class VbsContext:
    p_dl: float
    d_dl: float
    p_ul: float
    d_ul: float
    sigma_dl: int    # DL CQI
    sigma_ul: float  # UL SNR, dB

    @classmethod
    def from_demand(cls, d_dl, d_ul, cqi_dl, snr_ul, prb_total=radio.PRB_TOTAL_10MHZ):
        return cls(
            p_dl=radio.estimate_rbs(d_dl, cqi_dl, "dl", prb_total),
            d_dl=float(d_dl),
            p_ul=radio.estimate_rbs(d_ul, snr_ul, "ul", prb_total),
            d_ul=float(d_ul),
            sigma_dl=int(cqi_dl),
            sigma_ul=float(snr_ul),
        )

    def features(self, d_max_dl: float, d_max_ul: float, prb_total: int) -> np.ndarray:
        """``(p_dl, d_dl, p_ul, d_ul)`` scaled to [0, 1]."""
        return np.array([
            self.p_dl / prb_total,
            self.d_dl / d_max_dl,
            self.p_ul / prb_total,
            self.d_ul / d_max_ul,
        ])


@dataclass(frozen=True)
class ContentionParams:
    ipc_anchor_counts: tuple[tuple[int, float], ...] = ((1, 1.25), (2, 1.0), (5, 0.6))
    seccomp_tax: float = 0.014
    ctxswitch_tax_at_full: float = 0.08
    collapse_sharpness: float = 2.5

    def __post_init__(self):
        counts = [n for n, _ in self.ipc_anchor_counts]
        ipcs = [v for _, v in self.ipc_anchor_counts]
        if counts != sorted(set(counts)) or counts[0] != 1:
            raise ValueError("IPC anchors need strictly increasing vBS counts starting at 1")
        if any(b >= a for a, b in zip(ipcs, ipcs[1:])) or min(ipcs) <= 0:
            raise ValueError("IPC anchors must be positive and strictly decreasing")
        if self.seccomp_tax < 0 or self.ctxswitch_tax_at_full < 0:
            raise ValueError("taxes must be >= 0")
        if self.collapse_sharpness <= 0:
            raise ValueError("collapse_sharpness must be positive")

    def ipc(self, n_vbs: int) -> float:
        counts, ipcs = zip(*self.ipc_anchor_counts)
        # np.interp extrapolates flat on both sides
        return float(np.interp(n_vbs, counts, ipcs))


@dataclass(frozen=True)
class DemandParams:
    """Isolated CPU demand of one vBS, in cores (CPU-seconds per second)."""

    base_idle: float = 0.06
    w_dl: float = 0.25
    w_ul: float = 0.40
    rb_weight: float = 0.5
    mcs_weight: float = 0.5
    max_demand: float = 0.32

    def __post_init__(self):
        if self.base_idle <= 0:
            raise ValueError("base_idle must be positive")
        if not 0 <= self.w_dl < self.w_ul:
            raise ValueError("need 0 <= w_dl < w_ul")
        if self.rb_weight <= 0 or self.mcs_weight <= 0:
            raise ValueError("rb_weight and mcs_weight must be positive")
        if self.max_demand < self.base_idle:
            raise ValueError("max_demand below base_idle")


@dataclass(frozen=True)
class EnvParams:
    max_vbs: int = 4
    prb_total: int = radio.PRB_TOTAL_10MHZ
    d_max_dl: float = 10.0
    d_max_ul: float = 6.0
    cqi_range: tuple[int, int] = (8, 15)
    snr_range: tuple[float, float] = (12.0, 30.0)
    smt_share: float = 0.625
    noise_sigma: float = 0.02
    met_rtol: float = 1e-3
    contention: ContentionParams = field(default_factory=ContentionParams)
    demand: DemandParams = field(default_factory=DemandParams)

    def __post_init__(self):
        if self.max_vbs < 1:
            raise ValueError("max_vbs must be >= 1")
        if not 0.5 <= self.smt_share <= 1.0:
            raise ValueError("smt_share must lie in [0.5, 1]")
        if self.noise_sigma < 0 or self.met_rtol < 0:
            raise ValueError("noise_sigma and met_rtol must be >= 0")
        lo, hi = self.cqi_range
        if not 1 <= lo <= hi <= 15:
            raise ValueError("cqi_range must lie within 1..15")
        if self.snr_range[0] > self.snr_range[1]:
            raise ValueError("snr_range is reversed")
        radio.snr_to_cqi(self.snr_range[0])
        if self.d_max_dl <= 0 or self.d_max_ul <= 0:
            raise ValueError("d_max must be positive")


@dataclass(frozen=True)
class EnvOutcome:
    core_usage: np.ndarray   # (2N,)
    tput_dl: np.ndarray      # (n,)
    tput_ul: np.ndarray      # (n,)
    demand_met: np.ndarray   # (n, 2) bool, columns DL/UL

    @property
    def all_demand_met(self) -> bool:
        return bool(self.demand_met.all())


@dataclass(frozen=True)
class IntervalEval:
    """Kernel output for one context set under K activation masks."""

    usage: np.ndarray    # (K, 2N)
    served: np.ndarray   # (K, n, 2)
    met: np.ndarray      # (K,) bool
    energy: np.ndarray   # (K,)
    reward: np.ndarray   # (K,)
    demand: np.ndarray   # (n, 2)

    def throughput_ratio(self) -> np.ndarray:
        """Aggregate served / demanded throughput per mask."""
        total = self.demand.sum()
        if total <= 0:
            return np.ones(len(self.reward))
        return self.served.sum(axis=(1, 2)) / total


def base_cpu_demand(x: VbsContext, params: DemandParams, prb_total: int = radio.PRB_TOTAL_10MHZ) -> float:
    """Isolated CPU demand; grows with RBs and MCS, UL costlier than DL."""
    norm = params.rb_weight + params.mcs_weight

    def load(p, mcs):
        return (p / prb_total) * (params.rb_weight + params.mcs_weight * mcs / radio.MAX_MCS) / norm

    dl = load(x.p_dl, radio.mcs_index(x.sigma_dl, "dl"))
    ul = load(x.p_ul, radio.mcs_index(x.sigma_ul, "ul"))
    demand = params.base_idle + params.w_dl * dl + params.w_ul * ul
    return min(demand, params.max_demand)


def contention_slowdown(n_vbs: int, shared_cores: int, params: ContentionParams) -> float:
    """CPU-time inflation for ``n_vbs`` instances sharing ``shared_cores`` cores."""
    if n_vbs < 1:
        raise ValueError("n_vbs must be >= 1")
    if shared_cores < 1:
        raise ValueError("shared_cores must be >= 1")
    ipc_slow = params.ipc(1) / params.ipc(n_vbs)
    seccomp = 1.0 + params.seccomp_tax * (n_vbs - 1)
    # switch tax saturates at 5 instances and scales with instances per core
    crowding = min(1.0, (n_vbs - 1) / 4.0) * min(1.0, n_vbs / shared_cores)
    ctx = 1.0 + params.ctxswitch_tax_at_full * crowding
    return ipc_slow * seccomp * ctx


class VranEnv:
    def __init__(self, topology: GppTopology, params: EnvParams | None = None,
                 energy: EnergyParams | None = None):
        self.topology = topology
        self.params = params or EnvParams()
        self.energy = energy or EnergyParams()
        self._rho_masks = topology.rho_masks()

    # -- contexts ---------------------------------------------------------
    def make_context(self, d_dl, d_ul, cqi_dl, snr_ul) -> VbsContext:
        return VbsContext.from_demand(d_dl, d_ul, cqi_dl, snr_ul, self.params.prb_total)

    def gen_random_context(self, n_vbs: int, rng_seed) -> list[VbsContext]:
        if not 1 <= n_vbs <= self.params.max_vbs:
            raise InvalidEpisodeError(f"n_vbs {n_vbs} outside 1..{self.params.max_vbs}")
        p = self.params
        rng = np.random.default_rng(rng_seed)
        d_dl = rng.uniform(0.0, p.d_max_dl, n_vbs)
        d_ul = rng.uniform(0.0, p.d_max_ul, n_vbs)
        cqi = rng.integers(p.cqi_range[0], p.cqi_range[1] + 1, n_vbs)
        snr = rng.uniform(p.snr_range[0], p.snr_range[1], n_vbs)
        return [self.make_context(*args) for args in zip(d_dl, d_ul, cqi, snr)]

    def features(self, contexts: Sequence[VbsContext]) -> np.ndarray:
        p = self.params
        return np.stack([x.features(p.d_max_dl, p.d_max_ul, p.prb_total) for x in contexts])

    # -- interval ---------------------------------------------------------
    def base_demand(self, x: VbsContext) -> float:
        return base_cpu_demand(x, self.params.demand, self.params.prb_total)

    def slowdown(self, n_vbs: int, shared_cores: int) -> float:
        return contention_slowdown(n_vbs, shared_cores, self.params.contention)

    def noise(self, rng_seed) -> np.ndarray:
        return np.random.default_rng(rng_seed).standard_normal(self.topology.n_virtual)

    def _check(self, contexts):
        if len(contexts) == 0:
            raise InvalidEpisodeError("empty context list")
        if len(contexts) > self.params.max_vbs:
            raise InvalidEpisodeError(f"{len(contexts)} contexts exceed max_vbs={self.params.max_vbs}")

    def evaluate(self, contexts: Sequence[VbsContext], masks: np.ndarray, rng_seed) -> IntervalEval:
        """Evaluate the interval under every row of ``masks`` with shared noise."""
        self._check(contexts)
        masks = np.ascontiguousarray(np.atleast_2d(masks), dtype=np.uint8)
        n = len(contexts)
        base = sum(self.base_demand(x) for x in contexts)
        eff = np.array([base * self.slowdown(n, int(m.sum())) for m in masks])
        demand = np.array([[x.d_dl, x.d_ul] for x in contexts], dtype=np.float64)
        link = np.array([
            [radio.link_capacity_mbps(x.sigma_dl, "dl", self.params.prb_total),
             radio.link_capacity_mbps(x.sigma_ul, "ul", self.params.prb_total)]
            for x in contexts
        ])
        p = self.params
        usage, served, met, energy, reward = kernels.evaluate_vectors(
            masks, eff, demand, link, self.noise(rng_seed),
            p.smt_share, p.noise_sigma, p.contention.collapse_sharpness, p.met_rtol,
            *self.energy.as_args(),
        )
        return IntervalEval(usage, served, met.astype(bool), energy, reward, demand)

    def step(self, contexts: Sequence[VbsContext], v: ActivationVector, rng_seed) -> EnvOutcome:
        self.topology.check_vector(v)
        ev = self.evaluate(contexts, self.topology.mask(v), rng_seed)
        served = ev.served[0]
        met = served >= ev.demand * (1.0 - self.params.met_rtol)
        return EnvOutcome(ev.usage[0], served[:, 0].copy(), served[:, 1].copy(), met)

    def evaluate_actions(self, contexts: Sequence[VbsContext], rng_seed) -> IntervalEval:
        """Row ``a - 1`` evaluates ``rho(a)``."""
        return self.evaluate(contexts, self._rho_masks, rng_seed)

    def capacity(self, v: ActivationVector) -> float:
        s = self.params.smt_share
        return sum(s if self.topology.sibling(j) in v else 1.0 for j in v)

"""Core-activation agent: relation-net state encoder + DQN over core counts."""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from . import dqn
from .env import EnvParams, VbsContext
from .nn import Adam, Mlp
from .relation import RelationNet, canonical_order
from .topology import ActivationVector, GppTopology

CHECKPOINT_VERSION = 1


class CheckpointError(ValueError):
    pass


@dataclass(frozen=True)
class AgentConfig:
    d_state: int = 128
    rn_hidden: int = 128
    dqn_hidden: int = 256
    lr: float = 1e-4
    lr_final: float = 1e-5
    lr_anneal_at: int = 15000    # iteration where lr steps down to lr_final
    batch_size: int = 128
    buffer_capacity: int = 20000
    eps_min: float = 0.05
    eps_decay: float = 12000.0   # 0.6 x training-set size
    target_sync: int = 500
    gamma: float = 0.0
    seed: int = 0

    def __post_init__(self):
        for name in ("d_state", "rn_hidden", "dqn_hidden", "batch_size", "buffer_capacity", "target_sync"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.batch_size > self.buffer_capacity:
            raise ValueError("batch_size exceeds buffer_capacity")
        if not 0 <= self.eps_min <= 1:
            raise ValueError("eps_min must lie in [0, 1]")
        if self.eps_decay <= 0 or self.lr <= 0 or self.lr_final <= 0:
            raise ValueError("eps_decay, lr and lr_final must be positive")
        if self.lr_anneal_at < 0:
            raise ValueError("lr_anneal_at must be >= 0")
        if not 0 <= self.gamma <= 1:
            raise ValueError("gamma must lie in [0, 1]")


class CoreActivationAgent:
    def __init__(self, topology: GppTopology, env_params: EnvParams, config: AgentConfig | None = None):
        self.topology = topology
        self.config = cfg = config or AgentConfig()
        self.max_vbs = env_params.max_vbs
        self.norm = (env_params.d_max_dl, env_params.d_max_ul, env_params.prb_total)
        self.rng = np.random.default_rng(cfg.seed)
        self.rn = RelationNet(cfg.d_state, cfg.rn_hidden, rng=self.rng)
        self.dqn = Mlp(cfg.d_state, [cfg.dqn_hidden], topology.n_virtual, rng=self.rng)
        self.target = Mlp(cfg.d_state, [cfg.dqn_hidden], topology.n_virtual, rng=0)
        dqn.sync_target(self.dqn, self.target)
        self.optimizer = Adam(self._named_params(), lr=cfg.lr)
        self.buffer = dqn.ReplayBuffer(cfg.buffer_capacity, self.max_vbs, cfg.d_state)
        self.iteration = 0
        self.learn_steps = 0

    def _named_params(self) -> dict[str, np.ndarray]:
        named = {f"rn.{k}": v for k, v in self.rn.params.items()}
        named.update({f"dqn.{k}": v for k, v in self.dqn.params.items()})
        return named

    @property
    def n_actions(self) -> int:
        return self.topology.n_virtual

    @property
    def lr(self) -> float:
        cfg = self.config
        return cfg.lr if self.iteration < cfg.lr_anneal_at else cfg.lr_final

    @property
    def epsilon(self) -> float:
        return dqn.epsilon(self.iteration, self.config.eps_min, self.config.eps_decay)

    # -- acting -------------------------------------------------------------
    def features(self, contexts: Sequence[VbsContext]) -> np.ndarray:
        if len(contexts) == 0:
            raise ValueError("empty context list")
        if len(contexts) > self.max_vbs:
            raise ValueError(f"{len(contexts)} contexts exceed max_vbs={self.max_vbs}")
        d_dl, d_ul, prb = self.norm
        return canonical_order(np.stack([x.features(d_dl, d_ul, prb) for x in contexts]))

    def encode(self, contexts: Sequence[VbsContext]) -> np.ndarray:
        f = self.features(contexts)
        s, _ = self.rn.forward_batch(f[None], np.array([len(f)]))
        return s[0]

    def q_values(self, contexts: Sequence[VbsContext]) -> np.ndarray:
        q, _ = self.dqn.forward(self.encode(contexts)[None])
        return q[0]

    def choose(self, q: np.ndarray, explore: bool) -> int:
        """External action index; greedy ties go to the smaller core count."""
        if explore and self.rng.random() < self.epsilon:
            return int(self.rng.integers(1, self.n_actions + 1))
        return int(np.argmax(q)) + 1

    def select_action(self, contexts: Sequence[VbsContext], explore: bool = False) -> tuple[int, ActivationVector]:
        a = self.choose(self.q_values(contexts), explore)
        return a, self.topology.rho(a)

    # -- learning -----------------------------------------------------------
    def observe(self, contexts: Sequence[VbsContext], a: int, r: float) -> None:
        self.topology.check_action(a)
        f = self.features(contexts)
        s, _ = self.rn.forward_batch(f[None], np.array([len(f)]))
        self.buffer.push(dqn.Transition(s[0], a, float(r), f))
        self.iteration += 1

    def learn(self) -> float | None:
        cfg = self.config
        if len(self.buffer) < cfg.batch_size:
            return None
        idx = self.buffer.sample(cfg.batch_size, self.rng)
        b = self.buffer
        self.optimizer.lr = self.lr
        loss = dqn.train_step(self.rn, self.dqn, self.target, b.feats[idx], b.counts[idx],
                              b.actions[idx], b.rewards[idx], self.optimizer, cfg.gamma)
        self.learn_steps += 1
        if self.learn_steps % cfg.target_sync == 0:
            dqn.sync_target(self.dqn, self.target)
        return loss

    # -- persistence --------------------------------------------------------
    def save(self, path: Path) -> None:
        arrays = {}
        for prefix, net in (("rn", self.rn.mlp), ("dqn", self.dqn), ("target", self.target)):
            for k, v in net.params.items():
                arrays[f"{prefix}.{k}"] = v
        for k in self.optimizer.m:
            arrays[f"adam.m.{k}"] = self.optimizer.m[k]
            arrays[f"adam.v.{k}"] = self.optimizer.v[k]
        b = self.buffer
        for name in ("feats", "counts", "actions", "rewards", "states"):
            arrays[f"buffer.{name}"] = getattr(b, name)
        meta = {
            "version": CHECKPOINT_VERSION,
            "n_physical": self.topology.n_physical,
            "max_vbs": self.max_vbs,
            "norm": list(self.norm),
            "config": asdict(self.config),
            "shapes": {k: list(v.shape) for k, v in arrays.items()},
            "iteration": self.iteration,
            "learn_steps": self.learn_steps,
            "adam_t": self.optimizer.t,
            "buffer_cursor": b.cursor,
            "buffer_size": b.size,
            "rng_state": self.rng.bit_generator.state,
        }
        arrays["meta"] = np.array(json.dumps(meta, sort_keys=True, default=int))
        with Path(path).open("wb") as fh:
            np.savez(fh, **arrays)

    @classmethod
    def load(cls, path: Path, topology: GppTopology | None = None) -> "CoreActivationAgent":
        with np.load(Path(path), allow_pickle=False) as data:
            arrays = {k: data[k] for k in data.files}
        if "meta" not in arrays:
            raise CheckpointError(f"{path}: not a checkpoint")
        meta = json.loads(str(arrays.pop("meta")))
        if meta.get("version") != CHECKPOINT_VERSION:
            raise CheckpointError(f"{path}: unsupported checkpoint version {meta.get('version')}")
        if topology is not None and topology.n_physical != meta["n_physical"]:
            raise CheckpointError(
                f"checkpoint built for N={meta['n_physical']}, topology has N={topology.n_physical}")
        topo = topology or GppTopology(meta["n_physical"])
        d_dl, d_ul, prb = meta["norm"]
        env_params = EnvParams(max_vbs=meta["max_vbs"], d_max_dl=d_dl, d_max_ul=d_ul, prb_total=prb)
        agent = cls(topo, env_params, AgentConfig(**meta["config"]))
        for prefix, net in (("rn", agent.rn.mlp), ("dqn", agent.dqn), ("target", agent.target)):
            for k in net.params:
                src = arrays[f"{prefix}.{k}"]
                if src.shape != net.params[k].shape:
                    raise CheckpointError(f"shape mismatch for {prefix}.{k}")
                np.copyto(net.params[k], src)
        for k in agent.optimizer.m:
            np.copyto(agent.optimizer.m[k], arrays[f"adam.m.{k}"])
            np.copyto(agent.optimizer.v[k], arrays[f"adam.v.{k}"])
        agent.optimizer.t = meta["adam_t"]
        b = agent.buffer
        for name in ("feats", "counts", "actions", "rewards", "states"):
            np.copyto(getattr(b, name), arrays[f"buffer.{name}"])
        b.cursor = meta["buffer_cursor"]
        b.size = meta["buffer_size"]
        agent.iteration = meta["iteration"]
        agent.learn_steps = meta["learn_steps"]
        agent.rng.bit_generator.state = meta["rng_state"]
        return agent

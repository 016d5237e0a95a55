"""Study drivers shared by the CLI and the acceptance suite."""
from __future__ import annotations

import time
from typing import Iterator, Sequence

import numpy as np

from .agent import CoreActivationAgent
from .baselines import SiraModel, best_action
from .env import IntervalEval, VbsContext, VranEnv
from .traces import SliceTraces

STREAM_SCHEDULE = 1
STREAM_INTERVAL = 2
STREAM_EPISODE = 3
STREAM_TRACE = 4
STREAM_BENCH = 5
STREAM_LATENCY = 6


def derive_seeds(seed: int, stream: int, index, n: int = 2) -> list[int]:
    """``n`` independent 64-bit seeds for item ``index`` (an int or a tuple) of a stream."""
    idx = tuple(index) if isinstance(index, tuple) else (index,)
    state = np.random.SeedSequence([seed, stream, *idx]).generate_state(n, dtype=np.uint64)
    return [int(s) for s in state]


def normalized_reward(r: float, r_oracle: float) -> float:
    """Oracle reward over achieved reward; both are negative, result in (0, 1]."""
    return r_oracle / r


def random_schedule(iterations: int, n_min: int, n_max: int, seed: int, index: int = 0) -> np.ndarray:
    """vBS counts evenly split over ``n_min..n_max`` in shuffled order."""
    rng = np.random.default_rng(derive_seeds(seed, STREAM_SCHEDULE, index, 1)[0])
    counts = np.resize(np.arange(n_min, n_max + 1), iterations)
    return rng.permutation(counts)


def arrival_schedule(iterations: int, arrivals: Sequence[tuple[int, int]]) -> np.ndarray:
    """Piecewise-constant vBS count from ``(start_iteration, n_vbs)`` epochs."""
    arrivals = sorted(arrivals)
    if not arrivals or arrivals[0][0] != 0:
        raise ValueError("arrival schedule must start at iteration 0")
    out = np.empty(iterations, dtype=np.int64)
    for (start, n), nxt in zip(arrivals, [*arrivals[1:], (iterations, None)]):
        out[start:nxt[0]] = n
    return out


def train_iter(env: VranEnv, agent: CoreActivationAgent, schedule: np.ndarray, seed: int,
               start: int = 0) -> Iterator[dict]:
    """Generate -> select -> step -> reward -> observe -> learn, one row per interval."""
    for it in range(start, len(schedule)):
        n = int(schedule[it])
        ctx_seed, noise_seed = derive_seeds(seed, STREAM_INTERVAL, it)
        contexts = env.gen_random_context(n, ctx_seed)
        eps = agent.epsilon
        q = agent.q_values(contexts)
        a = agent.choose(q, explore=True)
        greedy = int(np.argmax(q)) + 1
        rewards = env.evaluate_actions(contexts, noise_seed).reward
        a_star = best_action(rewards)
        r, r_star = float(rewards[a - 1]), float(rewards[a_star - 1])
        agent.observe(contexts, a, r)
        loss = agent.learn()
        yield {
            "iter": it,
            "n_vbs": n,
            "action": a,
            "greedy_action": greedy,
            "oracle_action": a_star,
            "reward": r,
            "oracle_reward": r_star,
            "norm_reward": normalized_reward(r, r_star),
            "greedy_norm_reward": normalized_reward(float(rewards[greedy - 1]), r_star),
            "loss": float("nan") if loss is None else loss,
            "epsilon": eps,
        }


def moving_average(x: np.ndarray, window: int) -> np.ndarray:
    """Trailing mean; entry ``k`` averages ``x[k-window+1 : k+1]`` (shorter at the start)."""
    x = np.asarray(x, dtype=np.float64)
    c = np.concatenate([[0.0], np.cumsum(x)])
    k = np.arange(1, len(x) + 1)
    lo = np.maximum(0, k - window)
    return (c[k] - c[lo]) / (k - lo)


def throughput_ratios(ev: IntervalEval, a: int) -> np.ndarray:
    """Served / demanded per vBS and direction under action ``a``; 1 where nothing was asked."""
    d = ev.demand
    served = ev.served[a - 1]
    return np.divide(served, d, out=np.ones_like(d), where=d > 0)


def interval_row(env: VranEnv, agent: CoreActivationAgent, sira: SiraModel, contexts: Sequence[VbsContext],
                 noise_seed, explore: bool = False, learn: bool = False) -> dict:
    """Agent, SIRA and oracle on one interval, all under the same noise draw."""
    ev = env.evaluate_actions(contexts, noise_seed)
    a = agent.choose(agent.q_values(contexts), explore)
    a_sira, _ = sira.allocate(contexts)
    a_star = best_action(ev.reward)
    r = float(ev.reward[a - 1])
    if learn:
        agent.observe(contexts, a, r)
        agent.learn()
    topo = env.topology
    ratios = throughput_ratios(ev, a)
    row = {
        "n_vbs": len(contexts),
        "action": a,
        "k_cpus": topo.physical_cpus_used(topo.rho(a)),
        "reward": r,
        "energy": float(ev.energy[a - 1]),
        "met": int(ev.met[a - 1]),
        "tput_ratio": float(ev.throughput_ratio()[a - 1]),
        "oracle_action": a_star,
        "oracle_reward": float(ev.reward[a_star - 1]),
        "oracle_energy": float(ev.energy[a_star - 1]),
        "sira_action": a_sira,
        "sira_reward": float(ev.reward[a_sira - 1]),
        "sira_met": int(ev.met[a_sira - 1]),
        "allon_energy": float(ev.energy[-1]),
        "norm_reward": normalized_reward(r, float(ev.reward[a_star - 1])),
    }
    for i in range(env.params.max_vbs):
        have = i < len(contexts)
        row[f"dl_ratio_{i + 1}"] = float(ratios[i, 0]) if have else float("nan")
        row[f"ul_ratio_{i + 1}"] = float(ratios[i, 1]) if have else float("nan")
    return row


def eval_random(env: VranEnv, agent: CoreActivationAgent, episodes: int, n_min: int, n_max: int,
                seed: int) -> Iterator[dict]:
    """Greedy agent on held-out random contexts (a seed stream disjoint from training)."""
    sira = SiraModel(env)
    counts = random_schedule(episodes, n_min, n_max, seed, index=1)
    for e, n in enumerate(counts):
        ctx_seed, noise_seed = derive_seeds(seed, STREAM_EPISODE, e)
        contexts = env.gen_random_context(int(n), ctx_seed)
        yield {"episode": e, **interval_row(env, agent, sira, contexts, noise_seed)}


def eval_sequential(env: VranEnv, agent: CoreActivationAgent, schedule: np.ndarray, seed: int,
                    learn: bool = True) -> Iterator[dict]:
    """Arrival schedule replayed greedily, optionally adapting online."""
    sira = SiraModel(env)
    for it, n in enumerate(schedule):
        ctx_seed, noise_seed = derive_seeds(seed, STREAM_EPISODE, (1, it))
        contexts = env.gen_random_context(int(n), ctx_seed)
        yield {"iter": it, **interval_row(env, agent, sira, contexts, noise_seed, learn=learn)}


def replay_traces(env: VranEnv, agent: CoreActivationAgent, traces: SliceTraces, seed: int,
                  warmup_steps: int, learn: bool = True) -> Iterator[dict]:
    """Trace replay; exploration only during warmup, online learning throughout if ``learn``."""
    sira = SiraModel(env)
    for k in range(len(traces)):
        contexts = traces.contexts_at(k, env)
        if not contexts:
            continue
        noise_seed = derive_seeds(seed, STREAM_TRACE, k, 1)[0]
        warm = k < warmup_steps
        row = interval_row(env, agent, sira, contexts, noise_seed, explore=warm and learn, learn=learn)
        yield {"step": k, "t": float(traces.t[k]), "warmup": int(warm), **row}


def trace_summary(rows: Sequence[dict]) -> dict:
    post = [r for r in rows if not r["warmup"]]
    energy = sum(r["energy"] for r in post)
    allon = sum(r["allon_energy"] for r in post)
    return {
        "intervals": len(post),
        "savings": 1.0 - energy / allon if allon > 0 else float("nan"),
        "violations": sum(1 - r["met"] for r in post),
        "service_rate": float(np.mean([r["met"] for r in post])) if post else float("nan"),
        "oracle_savings": 1.0 - sum(r["oracle_energy"] for r in post) / allon if allon > 0 else float("nan"),
    }


BENCH_METHODS = ("agent", "sira", "oracle")


def bench_episode(env: VranEnv, agent: CoreActivationAgent, sira: SiraModel, n_vbs: int, episode: int,
                  seed: int) -> list[dict]:
    """One paired episode: the three methods see identical contexts and noise."""
    ctx_seed, noise_seed = derive_seeds(seed, STREAM_BENCH, (n_vbs, episode))
    contexts = env.gen_random_context(n_vbs, ctx_seed)
    ev = env.evaluate_actions(contexts, noise_seed)
    a_star = best_action(ev.reward)
    actions = {
        "agent": agent.choose(agent.q_values(contexts), explore=False),
        "sira": sira.allocate(contexts)[0],
        "oracle": a_star,
    }
    allon = float(ev.energy[-1])
    tput = ev.throughput_ratio()
    topo = env.topology
    rows = []
    for method in BENCH_METHODS:
        a = actions[method]
        rows.append({
            "n_vbs": n_vbs,
            "episode": episode,
            "method": method,
            "action": a,
            "k_cpus": topo.physical_cpus_used(topo.rho(a)),
            "reward": float(ev.reward[a - 1]),
            "norm_reward": normalized_reward(float(ev.reward[a - 1]), float(ev.reward[a_star - 1])),
            "tput_ratio": float(tput[a - 1]),
            "met": int(ev.met[a - 1]),
            "energy": float(ev.energy[a - 1]),
            "savings": 1.0 - float(ev.energy[a - 1]) / allon,
        })
    return rows


BENCH_METRICS = ("tput_ratio", "action", "reward", "norm_reward", "savings")
QUANTILES = (5, 25, 50, 75, 95)


def bench_quantiles(rows: Sequence[dict]) -> list[dict]:
    out = []
    for n in sorted({r["n_vbs"] for r in rows}):
        for method in BENCH_METHODS:
            sel = [r for r in rows if r["n_vbs"] == n and r["method"] == method]
            for metric in BENCH_METRICS:
                x = np.array([r[metric] for r in sel], dtype=np.float64)
                q = np.percentile(x, QUANTILES)
                row = {"n_vbs": n, "method": method, "metric": metric}
                row.update({f"q{p:02d}": float(v) for p, v in zip(QUANTILES, q)})
                row["mean"] = float(x.mean())
                out.append(row)
    return out


def bench_summary(rows: Sequence[dict]) -> list[dict]:
    out = []
    for n in sorted({r["n_vbs"] for r in rows}):
        for method in BENCH_METHODS:
            sel = [r for r in rows if r["n_vbs"] == n and r["method"] == method]
            out.append({
                "n_vbs": n,
                "method": method,
                "episodes": len(sel),
                "service_rate": float(np.mean([r["met"] for r in sel])),
                "mean_action": float(np.mean([r["action"] for r in sel])),
                "mean_reward": float(np.mean([r["reward"] for r in sel])),
                "mean_savings": float(np.mean([r["savings"] for r in sel])),
            })
    return out


def inference_latency(env: VranEnv, agent: CoreActivationAgent, repetitions: int, seed: int,
                      warmup: int = 50, clock=time.perf_counter) -> dict[int, np.ndarray]:
    """Greedy ``select_action`` wall time per vBS count; counts are interleaved per repetition."""
    m = env.params.max_vbs
    contexts = {n: [env.gen_random_context(n, derive_seeds(seed, STREAM_LATENCY, (n, r), 1)[0])
                    for r in range(repetitions)] for n in range(1, m + 1)}
    for r in range(min(warmup, repetitions)):
        for n in range(1, m + 1):
            agent.select_action(contexts[n][r])
    out = {n: np.empty(repetitions) for n in range(1, m + 1)}
    for r in range(repetitions):
        for n in range(1, m + 1):
            t0 = clock()
            agent.select_action(contexts[n][r])
            out[n][r] = clock() - t0
    return out

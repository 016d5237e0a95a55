"""``vranpool`` command line: train, eval, bench, traces, oracle, inference-bench.

Exit codes: 0 success, 2 configuration error, 3 runtime error.
"""
from __future__ import annotations

import argparse
import dataclasses
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__, kernels
from . import experiments as ex
from .agent import CheckpointError, CoreActivationAgent
from .baselines import SiraModel, best_action, full_oracle
from .config import ConfigError, ExperimentConfig, dump_config, load_config
from .env import VranEnv
from .report import plot_bars, plot_lines, plot_quantile_boxes, write_csv
from .topology import GppTopology
from .traces import DAY, gen_slice_traces, read_traces_csv, write_traces_csv

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 2, 3

TRAIN_COLUMNS = ["iter", "n_vbs", "action", "greedy_action", "oracle_action", "reward", "oracle_reward",
                 "norm_reward", "greedy_norm_reward", "loss", "epsilon"]


class CliError(RuntimeError):
    def __init__(self, msg: str, code: int = EXIT_RUNTIME):
        super().__init__(msg)
        self.code = code


def _header(cfg: ExperimentConfig, command: str, **extra) -> dict:
    return {"config_hash": cfg.hash(), "seed": cfg.seed, "command": command, "version": __version__, **extra}


def _env(cfg: ExperimentConfig) -> VranEnv:
    return VranEnv(GppTopology(cfg.n_physical), cfg.env, cfg.energy)


def _out(cfg: ExperimentConfig, sub: str) -> Path:
    d = cfg.resolved_output_dir() / sub
    d.mkdir(parents=True, exist_ok=True)
    return d


def _say(args, msg: str) -> None:
    if not args.quiet:
        print(msg)


def _load_agent(cfg: ExperimentConfig, env: VranEnv, path: str | None) -> CoreActivationAgent:
    ckpt = Path(path) if path else cfg.resolved_output_dir() / "train" / "agent.npz"
    if not ckpt.exists():
        raise CliError(f"checkpoint not found: {ckpt}")
    try:
        agent = CoreActivationAgent.load(ckpt, env.topology)
    except CheckpointError as exc:
        raise CliError(str(exc), EXIT_CONFIG) from exc
    p = env.params
    if agent.max_vbs != p.max_vbs or tuple(agent.norm) != (p.d_max_dl, p.d_max_ul, p.prb_total):
        raise CliError(f"{ckpt}: checkpoint max_vbs/normalisation differ from the config", EXIT_CONFIG)
    return agent


def _training_schedule(cfg: ExperimentConfig) -> np.ndarray:
    t = cfg.train
    if t.schedule == "sequential":
        return ex.arrival_schedule(t.iterations, t.arrivals)
    return ex.random_schedule(t.iterations, t.n_min, t.n_max, cfg.seed)


# -- commands -------------------------------------------------------------
def cmd_train(cfg: ExperimentConfig, args) -> int:
    env = _env(cfg)
    agent = CoreActivationAgent(env.topology, env.params, cfg.agent_config())
    schedule = _training_schedule(cfg)
    rows = []
    for row in ex.train_iter(env, agent, schedule, cfg.seed):
        rows.append(row)
        if args.progress and (row["iter"] + 1) % args.progress == 0:
            print(f"iter {row['iter'] + 1}: eps={row['epsilon']:.3f} loss={row['loss']:.5f}", file=sys.stderr)
    out = _out(cfg, "train")
    agent.save(out / "agent.npz")
    write_csv(out / "train_log.csv", rows, _header(cfg, "train"), TRAIN_COLUMNS)
    w = cfg.train.ma_window
    it = np.arange(1, len(rows) + 1)
    ma = ex.moving_average([r["norm_reward"] for r in rows], w)
    ma_g = ex.moving_average([r["greedy_norm_reward"] for r in rows], w)
    vlines = [s for s, _ in cfg.train.arrivals[1:]] if cfg.train.schedule == "sequential" else []
    plot_lines(out / "train.svg", [("executed action", it, ma), ("greedy action", it, ma_g)],
               "iteration", f"normalised reward (MA{w})", "Training convergence", vlines, (0, 1.02))
    # only full windows count; the shorter leading averages are noise
    hit = np.flatnonzero((it >= min(w, len(rows))) & (ma_g >= 0.9))
    summary = {"iterations": len(rows), "final_ma": float(ma[-1]), "final_greedy_ma": float(ma_g[-1]),
               "first_iter_greedy_ma_0.90": int(hit[0]) + 1 if len(hit) else -1}
    write_csv(out / "train_summary.csv", [summary], _header(cfg, "train"))
    _say(args, f"trained {len(rows)} iterations; greedy MA{w} = {ma_g[-1]:.4f}; checkpoint {out / 'agent.npz'}")
    return EXIT_OK


def cmd_eval(cfg: ExperimentConfig, args) -> int:
    env = _env(cfg)
    agent = _load_agent(cfg, env, args.checkpoint)
    e = cfg.eval
    out = _out(cfg, "eval")
    header = _header(cfg, f"eval-{args.mode}")
    if args.mode == "random":
        rows = list(ex.eval_random(env, agent, e.episodes, e.n_min, e.n_max, cfg.seed))
        x = np.array([r["episode"] for r in rows])
    elif args.mode == "sequential":
        schedule = ex.arrival_schedule(e.sequential_iterations, e.arrivals)
        rows = list(ex.eval_sequential(env, agent, schedule, cfg.seed, learn=e.sequential_learn))
        x = np.array([r["iter"] for r in rows])
    else:
        if args.traces:
            traces = read_traces_csv(args.traces)
        else:
            traces = gen_slice_traces(cfg.traces.horizon_days, cfg.traces.interval_s, cfg.seed, env,
                                      cfg.traces.profile)
        warmup = int(round(e.warmup_days * DAY / cfg.traces.interval_s))
        rows = list(ex.replay_traces(env, agent, traces, cfg.seed, warmup, learn=e.trace_learn))
        x = np.array([r["t"] for r in rows]) / 3600.0
    write_csv(out / f"eval_{args.mode}.csv", rows, header)

    met = np.array([r["met"] for r in rows])
    summary = {
        "mode": args.mode,
        "intervals": len(rows),
        "service_rate": float(met.mean()),
        "sira_service_rate": float(np.mean([r["sira_met"] for r in rows])),
        "mean_norm_reward": float(np.mean([r["norm_reward"] for r in rows])),
        "mean_action": float(np.mean([r["action"] for r in rows])),
        "mean_oracle_action": float(np.mean([r["oracle_action"] for r in rows])),
    }
    if args.mode == "traces":
        summary.update({f"post_warmup_{k}": v for k, v in ex.trace_summary(rows).items()})
    write_csv(out / f"eval_{args.mode}_summary.csv", [summary], header)

    if args.mode == "traces":
        series = [("agent cores", x, np.array([r["action"] for r in rows])),
                  ("oracle cores", x, np.array([r["oracle_action"] for r in rows])),
                  ("active vBS", x, np.array([r["n_vbs"] for r in rows]))]
        plot_lines(out / "eval_traces.svg", series, "time [h]", "count", "Trace replay")
    else:
        ma = ex.moving_average([r["norm_reward"] for r in rows], cfg.train.ma_window)
        vlines = [s for s, _ in e.arrivals[1:]] if args.mode == "sequential" else []
        plot_lines(out / f"eval_{args.mode}.svg", [("agent", x, ma)], "interval",
                   "normalised reward (MA)", f"Evaluation ({args.mode})", vlines, (0, 1.02))
    _say(args, " ".join(f"{k}={v:.4f}" if isinstance(v, float) else f"{k}={v}" for k, v in summary.items()))
    return EXIT_OK


_WORKER = {}


def _bench_init(env, agent):
    _WORKER["env"], _WORKER["agent"], _WORKER["sira"] = env, agent, SiraModel(env)


def _bench_chunk(args):
    n, episodes, seed = args
    w = _WORKER
    return [row for e in episodes for row in ex.bench_episode(w["env"], w["agent"], w["sira"], n, e, seed)]


def cmd_bench(cfg: ExperimentConfig, args) -> int:
    env = _env(cfg)
    agent = _load_agent(cfg, env, args.checkpoint)
    b = cfg.bench
    workers = args.workers or b.workers
    jobs = [(n, range(lo, min(lo + 250, b.episodes)), cfg.seed)
            for n in b.n_vbs for lo in range(0, b.episodes, 250)]
    if workers > 1:
        with ProcessPoolExecutor(workers, initializer=_bench_init, initargs=(env, agent)) as pool:
            chunks = list(pool.map(_bench_chunk, jobs))
    else:
        _bench_init(env, agent)
        chunks = [_bench_chunk(j) for j in jobs]
    rows = [r for c in chunks for r in c]
    out = _out(cfg, "bench")
    header = _header(cfg, "bench")
    write_csv(out / "bench_episodes.csv", rows, header)
    quantiles = ex.bench_quantiles(rows)
    write_csv(out / "bench_quantiles.csv", quantiles, header)
    summary = ex.bench_summary(rows)
    write_csv(out / "bench_summary.csv", summary, header)
    plot_quantile_boxes(out / "bench.svg", quantiles, "tput_ratio", "Served / demanded throughput")
    plot_quantile_boxes(out / "bench_savings.svg", quantiles, "savings", "Energy savings vs all cores on")
    for s in summary:
        _say(args, f"n={s['n_vbs']} {s['method']:>6}: service={s['service_rate']:.4f} "
                   f"cores={s['mean_action']:.3f} savings={s['mean_savings']:.4f}")
    return EXIT_OK


def cmd_traces(cfg: ExperimentConfig, args) -> int:
    env = _env(cfg)
    t = cfg.traces
    traces = gen_slice_traces(t.horizon_days, t.interval_s, cfg.seed, env, t.profile)
    out = _out(cfg, "traces")
    write_traces_csv(traces, out / "traces.csv", _header(cfg, "traces"))
    hours = traces.t / 3600.0
    series = [(f"slice {s + 1}", hours, np.where(traces.active[s], traces.d_dl[s], np.nan)) for s in range(4)]
    plot_lines(out / "traces.svg", series, "time [h]", "DL demand [Mbps]", "Slice traces")
    _say(args, f"wrote {len(traces)} intervals to {out / 'traces.csv'}")
    return EXIT_OK


def cmd_oracle(cfg: ExperimentConfig, args) -> int:
    env = _env(cfg)
    topo = env.topology
    e = cfg.eval
    counts = ex.random_schedule(e.episodes, e.n_min, e.n_max, cfg.seed, index=2)
    full = topo.n_physical <= 3
    rows = []
    for k, n in enumerate(counts):
        ctx_seed, noise_seed = ex.derive_seeds(cfg.seed, ex.STREAM_EPISODE, (2, k))
        contexts = env.gen_random_context(int(n), ctx_seed)
        ev = env.evaluate_actions(contexts, noise_seed)
        a = best_action(ev.reward)
        row = {"episode": k, "n_vbs": int(n), "oracle_action": a,
               "k_cpus": topo.physical_cpus_used(topo.rho(a)), "oracle_reward": float(ev.reward[a - 1])}
        for i, r in enumerate(ev.reward):
            row[f"reward_a{i + 1}"] = float(r)
        if full:
            v, r_full = full_oracle(contexts, env, noise_seed)
            row["full_reward"] = r_full
            row["full_cores"] = len(v)
            row["rho_gap"] = r_full - row["oracle_reward"]
        rows.append(row)
    out = _out(cfg, "oracle")
    write_csv(out / "oracle.csv", rows, _header(cfg, "oracle"))
    labels = [str(a) for a in topo.actions]
    groups = {}
    for n in sorted(set(int(c) for c in counts)):
        sel = [r["oracle_action"] for r in rows if r["n_vbs"] == n]
        groups[f"n={n}"] = [sel.count(a) / len(sel) for a in topo.actions]
    plot_bars(out / "oracle.svg", labels, groups, "fraction of episodes", "Oracle core count")
    _say(args, f"oracle over {len(rows)} episodes written to {out / 'oracle.csv'}")
    return EXIT_OK


def cmd_inference_bench(cfg: ExperimentConfig, args) -> int:
    env = _env(cfg)
    agent = _load_agent(cfg, env, args.checkpoint)
    reps = args.repetitions or cfg.inference.repetitions
    lat = ex.inference_latency(env, agent, reps, cfg.seed, cfg.inference.warmup)
    rows = []
    for n, x in lat.items():
        ms = x * 1e3
        rows.append({"n_vbs": n, "pair_rows": 1 if n == 1 else n * (n - 1), "repetitions": len(x),
                     "p50_ms": float(np.percentile(ms, 50)), "p95_ms": float(np.percentile(ms, 95)),
                     "p99_ms": float(np.percentile(ms, 99)), "mean_ms": float(ms.mean())})
    out = _out(cfg, "inference")
    write_csv(out / "latency.csv", rows, _header(cfg, "inference-bench", timing=1, backend=kernels.BACKEND))
    labels = [str(r["n_vbs"]) for r in rows]
    plot_bars(out / "latency.svg", labels, {q: [r[f"{q}_ms"] for r in rows] for q in ("p50", "p95", "p99")},
              "latency [ms]", "Greedy inference latency per vBS count")
    for r in rows:
        _say(args, f"n={r['n_vbs']}: p50={r['p50_ms']:.4f} ms p95={r['p95_ms']:.4f} ms p99={r['p99_ms']:.4f} ms")
    return EXIT_OK


COMMANDS = {
    "train": cmd_train,
    "eval": cmd_eval,
    "bench": cmd_bench,
    "traces": cmd_traces,
    "oracle": cmd_oracle,
    "inference-bench": cmd_inference_bench,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-c", "--config", help="YAML config file (defaults apply to missing keys)")
    common.add_argument("--seed", type=int, help="override the config seed")
    common.add_argument("-q", "--quiet", action="store_true")
    common.add_argument("--print-config", action="store_true", help="print the resolved config and exit")

    p = argparse.ArgumentParser(prog="vranpool", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)
    t = sub.add_parser("train", parents=[common], help="train an agent, write checkpoint and log")
    t.add_argument("--progress", type=int, default=0, metavar="K", help="report every K iterations")
    ev = sub.add_parser("eval", parents=[common], help="evaluate a checkpoint")
    ev.add_argument("--checkpoint")
    ev.add_argument("--mode", choices=["random", "sequential", "traces"], default="random")
    ev.add_argument("--traces", help="trace CSV to replay instead of generating one")
    b = sub.add_parser("bench", parents=[common], help="paired agent/SIRA/oracle distributions")
    b.add_argument("--checkpoint")
    b.add_argument("--workers", type=int)
    sub.add_parser("traces", parents=[common], help="generate slice traces")
    sub.add_parser("oracle", parents=[common], help="exhaustive oracle over sampled contexts")
    ib = sub.add_parser("inference-bench", parents=[common], help="greedy inference latency")
    ib.add_argument("--checkpoint")
    ib.add_argument("--repetitions", type=int)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg = dataclasses.replace(cfg, seed=args.seed)
        if getattr(args, "workers", None) is not None and args.workers < 1:
            raise ConfigError("--workers must be >= 1")
        if getattr(args, "repetitions", None) is not None and args.repetitions < 1:
            raise ConfigError("--repetitions must be >= 1")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if args.print_config:
        print(f"# config_hash={cfg.hash()}")
        print(dump_config(cfg), end="")
        return EXIT_OK
    try:
        return COMMANDS[args.command](cfg, args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001 - any other failure is a runtime error
        print(f"runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())

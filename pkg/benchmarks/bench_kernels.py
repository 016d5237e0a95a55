"""Compiled vs pure-Python interval kernels.

    python3 benchmarks/bench_kernels.py [--repeat 2000]

Times ``evaluate_vectors`` on the rho ladder (N=2, 4 masks) and on full
enumeration (N=3, 63 masks), checks the two backends agree, and reports the
share of one training iteration spent in the kernel.
"""
import argparse
import time

import numpy as np

from vranpool.env import VranEnv
from vranpool.kernels import _pykernels
from vranpool.topology import GppTopology

try:
    from vranpool.kernels import _ckernels
except ImportError:
    _ckernels = None


def _inputs(env: VranEnv, masks: np.ndarray, seed: int):
    from vranpool import radio

    ctx = env.gen_random_context(env.params.max_vbs, seed)
    n = len(ctx)
    base = sum(env.base_demand(x) for x in ctx)
    eff = np.array([base * env.slowdown(n, int(m.sum())) for m in masks])
    demand = np.array([[x.d_dl, x.d_ul] for x in ctx])
    link = np.array([[radio.link_capacity_mbps(x.sigma_dl, "dl"), radio.link_capacity_mbps(x.sigma_ul, "ul")]
                     for x in ctx])
    p = env.params
    return (np.ascontiguousarray(masks, dtype=np.uint8), eff, demand, link, env.noise(seed),
            p.smt_share, p.noise_sigma, p.contention.collapse_sharpness, p.met_rtol, *env.energy.as_args())


def _time(fn, args, repeat: int) -> float:
    fn(*args)
    t0 = time.perf_counter()
    for _ in range(repeat):
        fn(*args)
    return (time.perf_counter() - t0) / repeat


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=2000)
    args = ap.parse_args()
    if _ckernels is None:
        print("compiled kernels not built; run `pip install -e . --no-build-isolation` first")
        return

    cases = []
    env2 = VranEnv(GppTopology(2))
    cases.append(("N=2 rho ladder (4 masks)", env2, env2.topology.rho_masks()))
    env3 = VranEnv(GppTopology(3))
    t3 = env3.topology
    full = np.stack([t3.mask(v) for a in t3.actions for v in t3.enumerate_activation_vectors(a)])
    cases.append(("N=3 full enumeration (63 masks)", env3, full))

    print(f"{'case':34s} {'python [us]':>12s} {'cython [us]':>12s} {'speedup':>8s} {'max |diff|':>11s}")
    for name, env, masks in cases:
        inp = _inputs(env, masks, 7)
        t_py = _time(_pykernels.evaluate_vectors, inp, args.repeat)
        t_c = _time(_ckernels.evaluate_vectors, inp, args.repeat)
        diff = max(float(np.max(np.abs(np.asarray(a, dtype=float) - np.asarray(b, dtype=float))))
                   for a, b in zip(_pykernels.evaluate_vectors(*inp), _ckernels.evaluate_vectors(*inp)))
        print(f"{name:34s} {t_py * 1e6:12.1f} {t_c * 1e6:12.1f} {t_py / t_c:8.1f} {diff:11.2e}")

    # context: a full training iteration is dominated by the networks' BLAS work
    from vranpool.agent import CoreActivationAgent
    from vranpool.experiments import random_schedule, train_iter

    agent = CoreActivationAgent(env2.topology, env2.params)
    sched = random_schedule(400, 2, 4, 0)
    rows = iter(train_iter(env2, agent, sched, 0))
    for _ in range(200):  # fill the replay buffer past one batch
        next(rows)
    t0 = time.perf_counter()
    for _ in range(200):
        next(rows)
    t_iter = (time.perf_counter() - t0) / 200
    inp = _inputs(env2, env2.topology.rho_masks(), 7)
    share = _time(_ckernels.evaluate_vectors, inp, args.repeat) / t_iter
    print(f"training iteration: {t_iter * 1e3:.2f} ms; compiled kernel share: {share:.2%}")


if __name__ == "__main__":
    main()

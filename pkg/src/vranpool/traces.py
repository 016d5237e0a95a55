"""Multi-day per-slice load traces and their CSV form.

Slice 1: city-centre eMBB with a diurnal sinusoid.
Slice 2: office building, plateau between 09:00 and 17:00.
Slices 3-4: IoT, constant load while switched on, random on/off epochs.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .env import VbsContext, VranEnv

N_SLICES = 4
TRACE_COLUMNS = ["t", "slice_id", "d_dl_mbps", "d_ul_mbps", "cqi_dl", "snr_ul_db"]
DAY = 86400.0


@dataclass(frozen=True)
class TraceProfile:
    """Load levels as fractions of the env's ``d_max`` (DL, UL)."""

    embb_floor: float = 0.30
    embb_peak: float = 0.95
    office_low: float = 0.04
    office_peak: float = 0.95
    iot_levels: tuple[tuple[float, float], tuple[float, float]] = ((0.70, 0.90), (0.60, 0.90))
    iot_mean_on_h: float = 16.0
    iot_mean_off_h: float = 4.0
    noise: float = 0.03
    cqi: tuple[int, int, int, int] = (12, 14, 10, 9)
    snr_db: tuple[float, float, float, float] = (22.0, 26.0, 17.0, 15.0)


@dataclass
class SliceTraces:
    t: np.ndarray          # (T,) seconds since start
    active: np.ndarray     # (4, T) bool
    d_dl: np.ndarray       # (4, T) Mbps
    d_ul: np.ndarray       # (4, T) Mbps
    cqi_dl: np.ndarray     # (4, T) int
    snr_ul: np.ndarray     # (4, T) dB

    def __len__(self) -> int:
        return len(self.t)

    def n_active(self) -> np.ndarray:
        return self.active.sum(axis=0)

    def contexts_at(self, k: int, env: VranEnv) -> list[VbsContext]:
        return [
            env.make_context(self.d_dl[s, k], self.d_ul[s, k], int(self.cqi_dl[s, k]), self.snr_ul[s, k])
            for s in range(N_SLICES) if self.active[s, k]
        ]


def _on_off(n_steps: int, interval: float, mean_on_h: float, mean_off_h: float, rng) -> np.ndarray:
    out = np.zeros(n_steps, dtype=bool)
    state = bool(rng.random() < mean_on_h / (mean_on_h + mean_off_h))
    k = 0
    while k < n_steps:
        mean_h = mean_on_h if state else mean_off_h
        length = max(1, int(round(rng.exponential(mean_h) * 3600.0 / interval)))
        out[k:k + length] = state
        k += length
        state = not state
    return out


def gen_slice_traces(horizon_days: float, interval_s: float, rng_seed, env: VranEnv,
                     profile: TraceProfile | None = None) -> SliceTraces:
    if horizon_days < 1:
        raise ValueError("horizon must cover at least one day")
    if interval_s <= 0:
        raise ValueError("interval must be positive")
    prof = profile or TraceProfile()
    p = env.params
    rng = np.random.default_rng(rng_seed)
    n_steps = int(round(horizon_days * DAY / interval_s))
    t = np.arange(n_steps) * float(interval_s)
    hour = (t % DAY) / 3600.0

    embb = prof.embb_floor + (prof.embb_peak - prof.embb_floor) * 0.5 * (1 - np.cos(2 * np.pi * (hour - 4.0) / 24.0))
    # 30-minute logistic ramps around 09:00 and 17:00
    ramp = 1.0 / (1.0 + np.exp(-(hour - 9.0) / 0.25)) - 1.0 / (1.0 + np.exp(-(hour - 17.0) / 0.25))
    office = prof.office_low + (prof.office_peak - prof.office_low) * ramp
    base = np.zeros((N_SLICES, 2, n_steps))
    base[0] = embb
    base[1] = office
    for s, (dl, ul) in zip((2, 3), prof.iot_levels):
        base[s, 0] = dl
        base[s, 1] = ul

    active = np.ones((N_SLICES, n_steps), dtype=bool)
    for s in (2, 3):
        active[s] = _on_off(n_steps, interval_s, prof.iot_mean_on_h, prof.iot_mean_off_h, rng)

    jitter = 1.0 + prof.noise * rng.standard_normal((N_SLICES, 2, n_steps))
    frac = np.clip(base * jitter, 0.0, 1.0)
    d_dl = frac[:, 0] * p.d_max_dl
    d_ul = frac[:, 1] * p.d_max_ul

    cqi_lo, cqi_hi = p.cqi_range
    cqi = np.array(prof.cqi)[:, None] + rng.integers(-1, 2, (N_SLICES, n_steps))
    cqi = np.clip(cqi, cqi_lo, cqi_hi)
    snr = np.array(prof.snr_db)[:, None] + rng.normal(0.0, 1.0, (N_SLICES, n_steps))
    snr = np.clip(snr, p.snr_range[0], p.snr_range[1])
    return SliceTraces(t, active, d_dl, d_ul, cqi.astype(int), snr)


def write_traces_csv(traces: SliceTraces, path: Path, header: dict | None = None) -> None:
    path = Path(path)
    with path.open("w", newline="") as fh:
        for key, value in (header or {}).items():
            fh.write(f"# {key}={value}\n")
        w = csv.writer(fh)
        w.writerow(TRACE_COLUMNS)
        for k in range(len(traces)):
            for s in range(N_SLICES):
                if traces.active[s, k]:
                    w.writerow([
                        repr(float(traces.t[k])), s + 1, repr(float(traces.d_dl[s, k])),
                        repr(float(traces.d_ul[s, k])), int(traces.cqi_dl[s, k]), repr(float(traces.snr_ul[s, k])),
                    ])


def read_traces_csv(path: Path) -> SliceTraces:
    with Path(path).open(newline="") as fh:
        rows = list(csv.DictReader(line for line in fh if not line.startswith("#")))
    if not rows:
        raise ValueError(f"{path}: no trace rows")
    missing = set(TRACE_COLUMNS) - set(rows[0])
    if missing:
        raise ValueError(f"{path}: missing columns {sorted(missing)}")
    times = sorted({float(r["t"]) for r in rows})
    index = {tv: k for k, tv in enumerate(times)}
    n = len(times)
    tr = SliceTraces(
        t=np.array(times),
        active=np.zeros((N_SLICES, n), dtype=bool),
        d_dl=np.zeros((N_SLICES, n)),
        d_ul=np.zeros((N_SLICES, n)),
        cqi_dl=np.zeros((N_SLICES, n), dtype=int),
        snr_ul=np.zeros((N_SLICES, n)),
    )
    for r in rows:
        k = index[float(r["t"])]
        s = int(r["slice_id"]) - 1
        if not 0 <= s < N_SLICES:
            raise ValueError(f"{path}: slice_id {r['slice_id']} outside 1..{N_SLICES}")
        tr.active[s, k] = True
        tr.d_dl[s, k] = float(r["d_dl_mbps"])
        tr.d_ul[s, k] = float(r["d_ul_mbps"])
        tr.cqi_dl[s, k] = int(r["cqi_dl"])
        tr.snr_ul[s, k] = float(r["snr_ul_db"])
    return tr

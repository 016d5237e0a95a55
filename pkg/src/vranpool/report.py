"""CSV and SVG artifact writers.

Every CSV starts with ``# key=value`` comment lines (config hash, seed,
command) followed by a normal header row.  Floats are written with ``repr``
so a re-run with the same config reproduces the file byte for byte.
"""
from __future__ import annotations

import csv
import math
from pathlib import Path
from typing import Iterable, Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

plt.rcParams["svg.hashsalt"] = "vranpool"


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return "nan" if math.isnan(v) else repr(v)
    return str(v)


def write_csv(path: Path, rows: Sequence[dict], header: dict, columns: Sequence[str] | None = None) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if columns is None:
        columns = list(rows[0]) if rows else []
    with path.open("w", newline="") as fh:
        for key, value in header.items():
            fh.write(f"# {key}={value}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([_fmt(r.get(c, "")) for c in columns])
    return path


def read_csv(path: Path) -> tuple[dict, list[dict]]:
    """Return ``(header, rows)``; values stay strings."""
    header = {}
    body = []
    with Path(path).open(newline="") as fh:
        for line in fh:
            if line.startswith("# "):
                key, _, value = line[2:].rstrip("\n").partition("=")
                header[key] = value
            else:
                body.append(line)
    return header, list(csv.DictReader(body))


def _save(fig, path: Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return path


def plot_lines(path: Path, series: Iterable[tuple[str, np.ndarray, np.ndarray]], xlabel: str, ylabel: str,
               title: str, vlines: Sequence[float] = (), ylim=None) -> Path:
    fig, ax = plt.subplots(figsize=(7, 4))
    for label, x, y in series:
        ax.plot(x, y, label=label, linewidth=1.2)
    for v in vlines:
        ax.axvline(v, color="grey", linestyle=":", linewidth=1)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.set_title(title)
    if ylim is not None:
        ax.set_ylim(*ylim)
    ax.grid(alpha=0.3)
    ax.legend(loc="best", fontsize="small")
    return _save(fig, path)


def plot_quantile_boxes(path: Path, quantiles: Sequence[dict], metric: str, title: str) -> Path:
    """Box per (n_vbs, method) drawn straight from precomputed 5/25/50/75/95 quantiles."""
    rows = [q for q in quantiles if q["metric"] == metric]
    stats = [{
        "label": f"{q['method']}\nn={q['n_vbs']}",
        "whislo": q["q05"], "q1": q["q25"], "med": q["q50"], "q3": q["q75"], "whishi": q["q95"],
        "fliers": [],
    } for q in rows]
    fig, ax = plt.subplots(figsize=(max(6, 0.8 * len(stats)), 4))
    if stats:
        ax.bxp(stats, showfliers=False)
    ax.set_ylabel(metric)
    ax.set_title(title)
    ax.tick_params(axis="x", labelsize="x-small")
    ax.grid(alpha=0.3, axis="y")
    return _save(fig, path)


def plot_bars(path: Path, labels: Sequence[str], groups: dict[str, Sequence[float]], ylabel: str,
              title: str) -> Path:
    fig, ax = plt.subplots(figsize=(7, 4))
    x = np.arange(len(labels))
    width = 0.8 / max(1, len(groups))
    for i, (name, values) in enumerate(groups.items()):
        ax.bar(x + i * width, values, width, label=name)
    ax.set_xticks(x + 0.4 - width / 2, labels)
    ax.set_ylabel(ylabel)
    ax.set_title(title)
    ax.grid(alpha=0.3, axis="y")
    ax.legend(fontsize="small")
    return _save(fig, path)

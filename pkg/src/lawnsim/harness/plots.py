"""Deterministic SVG figures for each case.

Figures are built on bare ``Figure`` objects (no pyplot state). The SVG hash
salt is fixed and the date stamp dropped, so equal inputs give equal bytes.
"""
from __future__ import annotations

import csv
import math
from pathlib import Path
from typing import Mapping, Sequence

import matplotlib
import numpy as np
from matplotlib.figure import Figure

from lawnsim.exttarget import EllipseTarget
from lawnsim.harness.config import Case
from lawnsim.harness.runner import ResultTable
from lawnsim.scenario import Position3

_RC = {"svg.hashsalt": "lawnsim", "svg.fonttype": "path", "path.simplify": False}
_METHOD_ORDER = ("NoSelection", "UserCentric", "TopologyAware", "BruteForce",
                 "TaDijkstra", "GreedyLocal", "GreedyReachable")
_COLORS = {"NoSelection": "tab:gray", "UserCentric": "tab:orange", "TopologyAware": "tab:blue",
           "BruteForce": "tab:purple", "TaDijkstra": "tab:blue", "GreedyLocal": "tab:red",
           "GreedyReachable": "tab:green"}


def _ordered(methods: Sequence[str]) -> list[str]:
    known = [m for m in _METHOD_ORDER if m in methods]
    return known + sorted(m for m in methods if m not in _METHOD_ORDER)


def _save(fig: Figure, path: Path) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with matplotlib.rc_context(_RC):
        fig.savefig(path, format="svg", metadata={"Date": None})
    return path


def _finite(values) -> np.ndarray:
    arr = np.asarray(values, dtype=float)
    return arr[np.isfinite(arr)]


def _method_bars(table: ResultTable, column: str, ylabel: str, title: str) -> Figure:
    fig = Figure(figsize=(5.0, 3.6))
    ax = fig.add_subplot()
    methods = _ordered(table.methods())
    for i, m in enumerate(methods):
        vals = _finite(table.column(column, m))
        if vals.size == 0:
            continue
        ax.bar(i, vals.mean(), yerr=vals.std(), capsize=4, color=_COLORS.get(m), label=m)
    ax.set_xticks(range(len(methods)), methods)
    ax.set_ylabel(ylabel)
    ax.set_title(title)
    if ax.get_legend_handles_labels()[1]:
        ax.legend(fontsize="small")
    fig.tight_layout()
    return fig


def selection_plots(table: ResultTable, out_dir: Path) -> list[Path]:
    specs = [("sum_se", "sum spectral efficiency (bit/s/Hz)", "Communication"),
             ("sensing_sinr_db", "sensing SINR (dB)", "Sensing"),
             ("wpt_energy_j", "harvested energy (J)", "Wireless power transfer")]
    return [_save(_method_bars(table, col, label, title), out_dir / f"selection_{col}.svg")
            for col, label, title in specs]


def read_delays(path: Path) -> dict[str, list[float]]:
    out: dict[str, list[float]] = {}
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            out.setdefault(row["method"], []).append(float(row["delay_ms"]))
    return out


def delivery_plots(table: ResultTable, out_dir: Path,
                   delays: Mapping[str, Sequence[float]] | None = None) -> list[Path]:
    """Delay distribution per method (per-trial if given, else per-seed means) and success rates."""
    methods = _ordered(table.methods())
    fig = Figure(figsize=(5.0, 3.6))
    ax = fig.add_subplot()
    if delays is not None:
        data = [np.asarray(delays.get(m, []), float) for m in methods]
        ylabel = "delay of delivered tasks (ms)"
    else:
        data = [_finite(table.column("mean_delay_ms", m)) for m in methods]
        ylabel = "mean delay per seed (ms)"
    keep = [(m, d) for m, d in zip(methods, data) if d.size]
    if keep:
        ax.boxplot([d for _, d in keep], tick_labels=[m for m, _ in keep], showfliers=False)
    ax.set_ylabel(ylabel)
    ax.set_title("Delivery delay")
    fig.tight_layout()
    paths = [_save(fig, out_dir / "delivery_delay.svg")]

    fig = Figure(figsize=(5.0, 3.6))
    ax = fig.add_subplot()
    for i, m in enumerate(methods):
        ax.bar(i, float(np.mean(table.column("success_rate", m))), color=_COLORS.get(m), label=m)
    ax.set_xticks(range(len(methods)), methods)
    ax.set_ylim(0.0, 1.0)
    ax.set_ylabel("success rate")
    ax.set_title("Delivery success")
    fig.tight_layout()
    paths.append(_save(fig, out_dir / "delivery_success.svg"))
    return paths


def overlay_figure(overlay: Mapping) -> Figure:
    t = overlay["target"]
    target = EllipseTarget(Position3(*t["center"], 0.0), t["semi_major_m"], t["semi_minor_m"],
                           t["orientation_rad"])
    fig = Figure(figsize=(5.0, 5.0))
    ax = fig.add_subplot()
    ring = target.points(np.linspace(0.0, 2 * math.pi, 721))
    ax.plot(ring[:, 0], ring[:, 1], color="tab:green", label="true contour")
    theta = np.asarray(overlay["theta_rad"], float)
    r_hat = np.asarray(overlay["radius_hat_m"], float)
    cx, cy = overlay["center_hat"]
    est = np.column_stack([cx + r_hat * np.cos(theta), cy + r_hat * np.sin(theta)])
    est = np.vstack([est, est[:1]])
    ax.plot(est[:, 0], est[:, 1], color="tab:blue", linestyle="--", label="estimated contour")
    pts = np.asarray(overlay["reflection_points"], float).reshape(-1, 2)
    ax.scatter(pts[:, 0], pts[:, 1], s=14, color="red", zorder=3, label="reflection points")
    ax.scatter([target.center.x], [target.center.y], marker="s", s=60, color="green",
               zorder=4, label="true center")
    ax.scatter([cx], [cy], marker="x", s=60, color="black", zorder=5, label="estimated center")
    ax.set_aspect("equal")
    ax.set_xlabel("x (m)")
    ax.set_ylabel("y (m)")
    ax.set_title(f"Extended target, seed {overlay['seed']}")
    ax.legend(fontsize="small", loc="upper right")
    fig.tight_layout()
    return fig


def exttarget_plots(table: ResultTable, out_dir: Path,
                    overlay: Mapping | None = None) -> list[Path]:
    fig = Figure(figsize=(5.0, 3.6))
    ax = fig.add_subplot()
    ax.hist(_finite(table.column("rel_mean_err")), bins=20, color="tab:blue")
    ax.set_xlabel("mean radial error / mean true radius")
    ax.set_ylabel("seeds")
    ax.set_title("Contour accuracy")
    fig.tight_layout()
    paths = [_save(fig, out_dir / "exttarget_rel_error.svg")]
    if overlay is not None:
        paths.append(_save(overlay_figure(overlay), out_dir / "exttarget_overlay.svg"))
    return paths


def emit_plots(table: ResultTable, out_dir: str | Path,
               delays: Mapping[str, Sequence[float]] | None = None,
               overlay: Mapping | None = None) -> list[Path]:
    out_dir = Path(out_dir)
    if table.case is Case.SELECTION:
        return selection_plots(table, out_dir)
    if table.case is Case.DELIVERY:
        return delivery_plots(table, out_dir, delays)
    return exttarget_plots(table, out_dir, overlay)

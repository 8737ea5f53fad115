"""Figure rendering for run artifacts.

Figures land in <run>/figures next to the delimited output; everything is
rendered headless from the files on disk, so a finished run directory can be
re-rendered at any time.
"""

from __future__ import annotations

import os

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .geometry import read_snapshot
from .monitors import MonitorReport


def _snapshot_paths(run_dir):
    d = os.path.join(run_dir, "snapshots")
    if not os.path.isdir(d):
        return []
    return [os.path.join(d, f) for f in sorted(os.listdir(d)) if f.endswith(".txt")]


def render_curve_figure(run_dir, out_path=None):
    """3D view of the first and last snapshots."""
    paths = _snapshot_paths(run_dir)
    if not paths:
        return None
    out_path = out_path or os.path.join(run_dir, "figures", "curve3d.png")
    fig = plt.figure(figsize=(10, 5))
    for k, (idx, title) in enumerate(((0, "initial"), (-1, "final"))):
        curve, t = read_snapshot(paths[idx])
        ax = fig.add_subplot(1, 2, k + 1, projection="3d")
        v = curve.vertices
        ax.plot(v[:, 0], v[:, 1], v[:, 2], lw=0.9, color="tab:blue")
        ax.set_title(f"{title} (t={t:g})")
        ax.set_xlabel("x")
        ax.set_ylabel("y")
        ax.set_zlabel("z")
    fig.tight_layout()
    fig.savefig(out_path, dpi=130)
    plt.close(fig)
    return out_path


def render_timeseries_figure(run_dir, out_path=None):
    """Diagnostic panels from timeseries.csv."""
    csv_path = os.path.join(run_dir, "timeseries.csv")
    if not os.path.isfile(csv_path):
        return None
    out_path = out_path or os.path.join(run_dir, "figures", "timeseries.png")
    rep = MonitorReport.from_csv(csv_path)
    t = rep.column("t")

    fig, axes = plt.subplots(2, 3, figsize=(13, 7))
    ax = axes[0, 0]
    ax.semilogy(t, np.maximum(rep.column("ramp_min"), 1e-300), color="tab:green")
    ax.set_title("min <T, e>")

    ax = axes[0, 1]
    ax.plot(t, rep.column("ratio_max"), color="tab:red")
    ax.axhline(2.0, color="k", ls="--", lw=0.8)
    ax.set_title("max kappa / <T, e>")

    ax = axes[0, 2]
    ax.semilogy(t, np.maximum(rep.column("clearance_min"), 1e-300), color="tab:purple")
    ax.set_title("min barrier clearance")

    ax = axes[1, 0]
    ax.plot(t, rep.column("area_P"), label="area P")
    ax.plot(t, rep.column("area_Q"), label="area Q", ls="--")
    if "slope_P" in rep.columns:
        ax2 = ax.twinx()
        ax2.plot(t, rep.column("slope_P"), color="gray", lw=0.8)
        ax2.axhline(-np.pi, color="gray", ls=":", lw=0.8)
        ax2.set_ylabel("dA/dt")
    ax.set_title("region areas")
    ax.legend(loc="upper right", fontsize=8)

    ax = axes[1, 1]
    ax.plot(t, rep.column("nonplanarity"), label="nonplanarity")
    ax.plot(t, rep.column("line_deviation"), label="line deviation", ls="--")
    ax.set_title("geometry report")
    ax.legend(fontsize=8)

    ax = axes[1, 2]
    ax.plot(t, rep.column("tip_high_y"), label="upper tip y")
    ax.plot(t, rep.column("tip_low_y"), label="lower tip y")
    ax.set_title("lobe tips")
    ax.legend(fontsize=8)

    for row in axes:
        for a in row:
            a.set_xlabel("t")
    fig.tight_layout()
    fig.savefig(out_path, dpi=130)
    plt.close(fig)
    return out_path


def render_run_figures(run_dir):
    """Render every figure a run directory supports; returns written paths."""
    os.makedirs(os.path.join(run_dir, "figures"), exist_ok=True)
    written = []
    for fn in (render_curve_figure, render_timeseries_figure):
        p = fn(run_dir)
        if p:
            written.append(p)
    return written

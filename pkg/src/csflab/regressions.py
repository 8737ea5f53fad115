"""Exact-solution regressions: the flow engine against closed-form solitons.

Shared by the CLI's verify-exact command and the acceptance suite; each
function returns measured quantities and the pass verdict at the standard
tolerances.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .geometry import EndLine, SpaceCurve, hausdorff_distance, resample_spline
from .flow import StepControl, evolve, make_state
from .solitons import ReaperSpec, sample_angenent_oval, sample_grim_reaper, slab_distance


@dataclass
class RegressionResult:
    name: str
    passed: bool
    measures: dict = field(default_factory=dict)

    def summary(self):
        pieces = ", ".join(f"{k}={v:.4g}" for k, v in self.measures.items())
        return f"[{'PASS' if self.passed else 'FAIL'}] {self.name}: {pieces}"


def unit_circle(n):
    th = 2.0 * np.pi * np.arange(n) / n
    pts = np.column_stack([np.cos(th), np.sin(th), np.zeros(n)])
    return SpaceCurve(pts, "closed", validate=False)


def circle_regression(n=400, t_end=0.45, cfl=0.5):
    """Shrinking unit circle: radius must match sqrt(1 - 2t) within 0.5%."""
    curve = unit_circle(n)
    ctrl = StepControl(h=2.0 * np.pi / n, dt_max=1.0, cfl=cfl)
    state, _ = evolve(make_state(curve), t_end, ctrl)
    v = state.curve.vertices
    r = float(np.linalg.norm(v - v.mean(axis=0), axis=1).mean())
    r_exact = float(np.sqrt(1.0 - 2.0 * t_end))
    rel = abs(r - r_exact) / r_exact
    return RegressionResult("circle", rel <= 5e-3,
                            {"radius": r, "expected": r_exact, "rel_err": rel})


def translating_reaper(x_half=1.4, n=800):
    """Unit reaper window with ends translating at the soliton speed."""
    curve = sample_grim_reaper(ReaperSpec(), (-x_half, x_half), n)
    down = np.array([0.0, -1.0, 0.0])
    ends = (EndLine(curve.vertices[0], down, "translate", 1.0),
            EndLine(curve.vertices[-1], down, "translate", 1.0))
    return SpaceCurve(curve.vertices, "open", ends, validate=False)


def reaper_regression(n=800, x_half=1.4, dt_total=1.0, cfl=1.0):
    """Translating unit reaper: tip speed 1 within 1%, shape within 1e-2."""
    curve = translating_reaper(x_half, n)
    ctrl = StepControl(h=curve.total_length() / (n - 1), dt_max=1.0, cfl=cfl)
    state, _ = evolve(make_state(curve), dt_total, ctrl)
    tip_y = float(state.curve.vertices[:, 1].max())
    target = sample_grim_reaper(ReaperSpec(t=dt_total), (-x_half, x_half), 4 * n)
    hd = hausdorff_distance(state.curve, target)
    tip_err = abs(tip_y - (-dt_total)) / dt_total
    return RegressionResult("reaper", tip_err <= 1e-2 and hd <= 1e-2,
                            {"tip_y": tip_y, "tip_rel_err": tip_err, "hausdorff": hd})


def oval_regression(n=1600, t_start=-2.0, t_end=-1.0, cfl=1.0):
    """Angenent oval flowed between exact time slices, plus its slab gaps."""
    curve = resample_spline(sample_angenent_oval(t_start, n), n)
    ctrl = StepControl(h=curve.total_length() / n, dt_max=1.0, cfl=cfl)
    state, _ = evolve(make_state(curve, t=t_start), t_end, ctrl)
    target = sample_angenent_oval(t_end, 4 * n)
    hd = hausdorff_distance(state.curve, target)
    measures = {"hausdorff": hd}
    gaps_ok = True
    for t in (-1.0, -2.0, -4.0):
        d = slab_distance(t)
        measures[f"slab_gap({t:g})"] = d
        gaps_ok &= d < 2.0 * np.exp(t)
    return RegressionResult("oval", hd <= 1e-2 and gaps_ok, measures)


ALL_KINDS = ("circle", "reaper", "oval")


def run_regression(kind):
    if kind == "circle":
        return circle_regression()
    if kind == "reaper":
        return reaper_regression()
    if kind == "oval":
        return oval_regression()
    raise ValueError(f"unknown regression kind {kind!r}")

"""Scenario configuration, run orchestration, persistence, and export.

A scenario builds the spliced initial data, places its barriers, evolves to
t_end while sampling every diagnostic at a fixed cadence, and writes an
artifact tree:

    scenario_resolved.yaml   config echo with every default filled in
    timeseries.csv           monitor rows (fixed column order)
    snapshots/curve_NNNN.txt curve snapshot per cadence point
    checkpoints/ck_NNNNNN.*  resumable state every checkpoint_interval rows
    verdict.txt              one pass/fail line per checked property
    figures/*.png            rendered diagnostics

The verdict file is the single source of truth for a run's acceptance.
"""

from __future__ import annotations

import math
import os
import shutil
from dataclasses import dataclass, asdict

import numpy as np
import yaml

from .construction import (
    SpliceConfig,
    assemble_splice,
    build_half_reaper_xy,
    build_half_reaper_yz,
    place_barriers,
)
from .flow import (
    MonitorViolation,
    FlowStepError,
    StepControl,
    evolve,
    make_state,
    read_checkpoint,
    write_checkpoint,
)
from .geometry import write_snapshot
from .monitors import (
    AreaReport,
    MonitorReport,
    RegionSpec,
    area_slopes,
    barrier_clearances,
    check_area_inequality,
    count_plane_crossings,
    geometry_report,
    ramp_diagnostics,
    region_area,
)


class ScenarioError(ValueError):
    """Invalid scenario configuration."""


# Frozen calibration: half the nonplanarity measured for the default R=4 run
# at its t_end inside the ball of radius 10.
NONPLANARITY_FLOOR = 0.84


@dataclass(frozen=True)
class ScenarioConfig:
    """Everything a run needs; every field has a recorded default."""

    R: float
    # splice geometry
    R_bend: float = 0.0
    beta: float | None = None
    twist_window: float = 0.0
    flare_ratio: float = 1.8
    tail_length: float = 16.0
    h: float = 0.05
    domain_halflength: float | None = None
    ratio_guard: float = 1e-13
    # stepping
    dt_max: float = 1.0
    cfl: float = 0.5
    resample_cadence: int = 25
    # schedule and reporting
    ramp_direction: tuple = (math.sqrt(0.5), 0.0, math.sqrt(0.5))
    t_end: float | None = None          # None -> R - 3
    barrier_time_fraction: float = 0.7
    monitor_cadence: float = 0.1
    barrier_variants: tuple = ("corner", "tip")
    report_radius: float = 10.0
    output_dir: str | None = None
    checkpoint_interval: int = 10       # cadence rows between checkpoints
    seed: int = 0
    # verdict tolerances
    tol_slope: float = 0.2
    tol_angle: float = 0.05
    ramp_drift_tol: float = 1e-3        # per unit time
    ratio_drift_tol: float = 1e-3
    ratio_bound: float = 2.0 + 1e-2
    end_disturbance_tol: float = 1e-4
    nonplanarity_floor: float = NONPLANARITY_FLOOR
    abort_on_clearance: bool = True

    def __post_init__(self):
        if self.t_end is None:
            object.__setattr__(self, "t_end", self.R - 3.0)
        if self.t_end <= 0:
            raise ScenarioError(
                f"t_end={self.t_end:.3g} must be positive (default schedule is R - 3)")
        if self.t_end > self.barrier_time_fraction * self.R:
            raise ScenarioError(
                f"t_end={self.t_end:.3g} exceeds {self.barrier_time_fraction:.2f}*R="
                f"{self.barrier_time_fraction * self.R:.3g}; barriers A(t-R) would expire")
        if self.monitor_cadence <= 0:
            raise ScenarioError("monitor cadence must be positive")
        if self.checkpoint_interval < 1:
            raise ScenarioError("checkpoint interval must be >= 1")
        v = np.asarray(self.ramp_direction, dtype=float)
        if abs(np.linalg.norm(v) - 1.0) > 1e-9:
            raise ScenarioError("ramp direction must be a unit vector")
        object.__setattr__(self, "ramp_direction", tuple(float(x) for x in v))
        object.__setattr__(self, "barrier_variants",
                           tuple(str(b) for b in self.barrier_variants))
        for b in self.barrier_variants:
            if b not in ("corner", "tip"):
                raise ScenarioError(f"unknown barrier variant {b!r}")
        self.splice_config()  # validate the geometry fields now

    def splice_config(self):
        return SpliceConfig(R=self.R, R_bend=self.R_bend, beta=self.beta,
                            twist_window=self.twist_window,
                            flare_ratio=self.flare_ratio,
                            tail_length=self.tail_length, h=self.h,
                            domain_halflength=self.domain_halflength,
                            ratio_guard=self.ratio_guard)

    def step_control(self):
        return StepControl(h=self.h, dt_max=self.dt_max, cfl=self.cfl,
                           resample_cadence=self.resample_cadence)

    def resolved(self):
        """Every field with defaults filled; splice defaults made explicit."""
        d = asdict(self)
        sc = self.splice_config()
        d["R_bend"] = sc.R_bend
        d["twist_window"] = sc.twist_window
        d["ramp_direction"] = list(d["ramp_direction"])
        d["barrier_variants"] = list(d["barrier_variants"])
        return d


def parse_scenario(source):
    """Parse a key-value (YAML) scenario description.

    Unknown keys are rejected by name; all defaults are filled in and a
    round trip through serialize_scenario is the identity.
    """
    data = yaml.safe_load(source)
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ScenarioError("scenario source must be a key-value mapping")
    valid = set(ScenarioConfig.__dataclass_fields__)
    unknown = set(data) - valid
    if unknown:
        raise ScenarioError(f"unknown scenario keys: {sorted(unknown)}")
    if "R" not in data:
        raise ScenarioError("missing required key: R")
    for key in ("ramp_direction", "barrier_variants"):
        if key in data:
            data[key] = tuple(data[key])
    try:
        return ScenarioConfig(**data)
    except TypeError as ex:
        raise ScenarioError(str(ex)) from ex


def serialize_scenario(cfg):
    """YAML text with every field recorded (defaults included)."""
    return yaml.safe_dump(cfg.resolved(), sort_keys=True)


# -- monitor battery ---------------------------------------------------------------

def _end_disturbance(curve, window=4.0):
    """Max distance of the outermost tail vertices from their end lines.

    Measured over the last `window` of arclength at each clamped end; the
    run is only trusted while this stays small (the truncation point stands
    in for spatial infinity).
    """
    s = curve.arclengths()
    total = s[-1]
    worst = 0.0
    for which, ec in zip(("start", "end"), curve.end_conditions):
        if ec is None:
            continue
        mask = s <= window if which == "start" else s >= total - window
        if np.any(mask):
            worst = max(worst, float(np.max(ec.distance(curve.vertices[mask]))))
    return worst


def build_monitors(cfg, barriers):
    """The standard per-cadence diagnostic battery for a splice run."""
    V = np.asarray(cfg.ramp_direction)
    spec_p = RegionSpec("y>0", drop_axis=2)
    spec_q = RegionSpec("y<0", drop_axis=0)

    def monitor(state):
        curve = state.curve
        row = {
            "length": curve.total_length(),
            "kappa_max": state.kappa_max,
        }
        diag = ramp_diagnostics(curve, V, guard=cfg.ratio_guard)
        row["ramp_min"] = diag.min_te
        row["ratio_max"] = diag.ratio_max
        cl = barrier_clearances(curve, barriers, state.t)
        for label, val in cl.items():
            row[f"clearance_{label}"] = val
        row["clearance_min"] = min(cl.values())
        ap = region_area(curve, spec_p, state.t)
        aq = region_area(curve, spec_q, state.t)
        row.update({
            "area_P": ap.area, "area_Q": aq.area,
            "excess_P_start": ap.excess_start, "excess_P_end": ap.excess_end,
            "excess_Q_start": aq.excess_start, "excess_Q_end": aq.excess_end,
            "area_trusted": float(ap.trusted and aq.trusted),
        })
        geo = geometry_report(curve, cfg.R, cfg.report_radius)
        row.update({
            "nonplanarity": geo.nonplanarity,
            "line_deviation": geo.line_deviation,
            "tip_high_y": geo.tip_high[1],
            "tip_low_y": geo.tip_low[1],
            "ball_crossings": float(geo.crossing_count),
        })
        row["plane_crossings"] = float(count_plane_crossings(curve))
        row["end_disturbance"] = _end_disturbance(curve)
        row["self_intersection"] = float(curve.has_self_intersection())
        return row

    return [("splice", monitor)]


# -- verdict -----------------------------------------------------------------------

def _verdict_checks(report, cfg):
    """Evaluate every checked property; returns [(name, passed, margin, detail)]."""
    t = report.column("t")
    checks = []

    ramp = report.column("ramp_min")
    drift = ramp[1:] - ramp[:-1] + cfg.ramp_drift_tol * np.diff(t)
    margin = float(drift.min()) if len(drift) else float("inf")
    checks.append(("ramp_monotone", margin >= 0.0, margin,
                   "min<T,e> may not drop faster than the drift tolerance"))

    ratio = report.column("ratio_max")
    ok = np.all(np.isfinite(ratio)) and float(ratio.max()) <= cfg.ratio_bound
    checks.append(("ratio_bound", bool(ok), float(cfg.ratio_bound - ratio.max()),
                   f"max kappa/<T,e> <= {cfg.ratio_bound}"))

    rdrift = ratio[:-1] - ratio[1:] + cfg.ratio_drift_tol * np.diff(t)
    margin = float(rdrift.min()) if len(rdrift) else float("inf")
    checks.append(("ratio_monotone", margin >= 0.0, margin,
                   "max kappa/<T,e> nonincreasing up to the drift tolerance"))

    clearance = report.column("clearance_min")
    checks.append(("barrier_clearance", bool(np.all(clearance > 0.0)),
                   float(clearance.min()), "every barrier clearance stays positive"))

    viols = []
    for region in ("P", "Q"):
        reps = [AreaReport(t=row_t, area=a, slope=float("nan"),
                           excess_start=es, excess_end=ee, trusted=bool(tr))
                for row_t, a, es, ee, tr in zip(
                    t, report.column(f"area_{region}"),
                    report.column(f"excess_{region}_start"),
                    report.column(f"excess_{region}_end"),
                    report.column("area_trusted"))]
        viols += check_area_inequality(reps, cfg.R, cfg.tol_slope, cfg.tol_angle)
    checks.append(("area_inequality", len(viols) == 0, float(-len(viols)),
                   "dA/dt <= -pi + 2e^(-(R-t)/2) + tol on trusted rows, "
                   f"{len(viols)} violations"))

    npl = report.column("nonplanarity")
    margin = float(npl[-1] - cfg.nonplanarity_floor)
    checks.append(("nonplanarity", margin >= 0.0, margin,
                   f"final nonplanarity above the frozen floor {cfg.nonplanarity_floor}"))

    bc = report.column("ball_crossings")
    checks.append(("ball_crossings", float(bc[-1]) == 2.0, float(bc[-1]),
                   "curve crosses the report ball boundary exactly twice"))

    dist = report.column("end_disturbance")
    margin = float(cfg.end_disturbance_tol - dist.max())
    checks.append(("end_disturbance", margin >= 0.0, margin,
                   f"clamped tails undisturbed below {cfg.end_disturbance_tol}"))

    si = report.column("self_intersection")
    checks.append(("embedded", bool(np.all(si == 0.0)), float(-si.max()),
                   "no self-intersection flagged"))
    return checks


def _write_verdict(path, checks):
    all_pass = all(ok for _name, ok, _m, _d in checks)
    with open(path, "w") as f:
        for name, ok, margin, detail in checks:
            f.write(f"check={name} status={'PASS' if ok else 'FAIL'} "
                    f"margin={margin:.6g} detail={detail}\n")
        f.write(f"overall={'PASS' if all_pass else 'FAIL'}\n")
    return all_pass


def _augment_timeseries(report):
    """Append centered-difference area slopes as extra columns."""
    t = report.column("t")
    out = MonitorReport(report.columns + ["slope_P", "slope_Q"])
    sp = area_slopes(t, report.column("area_P"))
    sq = area_slopes(t, report.column("area_Q"))
    for i, row in enumerate(report.rows):
        out.rows.append(list(row) + [float(sp[i]), float(sq[i])])
    return out


# -- run orchestration ---------------------------------------------------------------

def _atomic_write(path, writer):
    tmp = str(path) + ".tmp"
    writer(tmp)
    os.replace(tmp, path)


def run_scenario(cfg, out_dir=None, resume=None, render=True):
    """Build, evolve, monitor, and persist one scenario.

    Returns (exit_code, out_dir): exit 0 when every verdict line passes, 1
    on a failed check or hard violation, with the violating row recorded.
    When `resume` names a checkpoint base path, the run continues from it
    and writes the subsequent rows.
    """
    out = out_dir or cfg.output_dir or f"runs/R{cfg.R:g}"
    os.makedirs(out, exist_ok=True)
    os.makedirs(os.path.join(out, "snapshots"), exist_ok=True)
    os.makedirs(os.path.join(out, "checkpoints"), exist_ok=True)
    os.makedirs(os.path.join(out, "figures"), exist_ok=True)
    with open(os.path.join(out, "scenario_resolved.yaml"), "w") as f:
        f.write(serialize_scenario(cfg))

    ctrl = cfg.step_control()
    if resume is not None:
        state, _saved_ctrl = read_checkpoint(resume)
        barriers = sum((place_barriers(cfg.R, v) for v in cfg.barrier_variants), [])
    else:
        sc = cfg.splice_config()
        P = build_half_reaper_xy(cfg.R, sc.h, sc.R_bend)
        Q = build_half_reaper_yz(cfg.R, sc.h, sc.R_bend)
        curve = assemble_splice(P, Q, sc)
        barriers = sum((place_barriers(cfg.R, v, curve) for v in cfg.barrier_variants), [])
        state = make_state(curve, t=0.0)

    monitors = build_monitors(cfg, barriers)
    hard = [("clearance_min", lambda v: v > 0.0)] if cfg.abort_on_clearance else []

    snap_index = {"i": 0}

    def on_sample(st, row):
        i = snap_index["i"]
        path = os.path.join(out, "snapshots", f"curve_{i:04d}.txt")
        _atomic_write(path, lambda p: write_snapshot(st.curve, st.t, p))
        if i % cfg.checkpoint_interval == 0:
            write_checkpoint(os.path.join(out, "checkpoints", f"ck_{i:06d}"), st, ctrl)
        snap_index["i"] += 1

    status = 0
    failure = None
    report = None
    try:
        state, report = evolve(state, cfg.t_end, ctrl,
                               monitor_schedule=cfg.monitor_cadence,
                               monitors=monitors, hard_checks=hard,
                               on_sample=on_sample)
    except MonitorViolation as ex:
        status = 1
        failure = f"hard violation: {ex} row={ex.row}"
    except FlowStepError as ex:
        status = 1
        failure = f"step failure: {ex}"
        write_checkpoint(os.path.join(out, "checkpoints", "ck_lastgood"), state, ctrl)

    if report is not None and len(report):
        full = _augment_timeseries(report)
        _atomic_write(os.path.join(out, "timeseries.csv"), full.to_csv)
        checks = _verdict_checks(report, cfg)
        all_pass = _write_verdict(os.path.join(out, "verdict.txt"), checks)
        if not all_pass:
            status = 1
        if render:
            from . import plots
            plots.render_run_figures(out)
    else:
        with open(os.path.join(out, "verdict.txt"), "w") as f:
            f.write(f"check=run status=FAIL margin=nan detail={failure}\n")
            f.write("overall=FAIL\n")
    return status, out


# -- export -----------------------------------------------------------------------

def export_plotdata(run_dir, what, dest=None):
    """Materialize run artifacts for plotting; byte-identical re-export.

    what: "snapshots" copies every cadence snapshot; "timeseries" copies the
    rectangular CSV.  Returns the list of written paths.
    """
    if what not in ("snapshots", "timeseries"):
        raise ScenarioError(f"unknown export kind {what!r}")
    dest = dest or os.path.join(run_dir, "export")
    written = []
    if what == "snapshots":
        src = os.path.join(run_dir, "snapshots")
        if not os.path.isdir(src) or not os.listdir(src):
            raise ScenarioError(f"no snapshots found under {run_dir}")
        os.makedirs(dest, exist_ok=True)
        for name in sorted(os.listdir(src)):
            target = os.path.join(dest, name)
            shutil.copyfile(os.path.join(src, name), target)
            written.append(target)
    else:
        src = os.path.join(run_dir, "timeseries.csv")
        if not os.path.isfile(src):
            raise ScenarioError(f"no timeseries.csv under {run_dir}")
        os.makedirs(dest, exist_ok=True)
        target = os.path.join(dest, "timeseries.csv")
        shutil.copyfile(src, target)
        written.append(target)
    return written


# -- sweep -----------------------------------------------------------------------

def run_sweep(cfg, r_values, out_base=None, render=True):
    """Per-R runs on the default schedule plus the cross-run area regression.

    Each run reuses the sweep config's resolution and stepping but takes the
    default schedule t_end = R - 3.  Returns (exit_code, summary_path); the
    regression of initial region area against R must have slope pi within
    2 percent.
    """
    out_base = out_base or cfg.output_dir or "runs/sweep"
    os.makedirs(out_base, exist_ok=True)
    carry = {k: v for k, v in cfg.resolved().items()
             if k in ("h", "cfl", "dt_max", "resample_cadence", "monitor_cadence",
                      "checkpoint_interval", "seed", "report_radius")}
    rows = []
    status = 0
    for r in r_values:
        sub = ScenarioConfig(R=float(r), **carry)
        code, rdir = run_scenario(sub, out_dir=os.path.join(out_base, f"R{r:g}"),
                                  render=render)
        status |= code
        ts = MonitorReport.from_csv(os.path.join(rdir, "timeseries.csv"))
        rows.append((float(r), float(ts.column("area_P")[0]),
                     float(ts.column("area_Q")[0]), code))

    rs = np.array([r for r, *_ in rows])
    a0 = np.array([ap for _r, ap, _aq, _c in rows])
    slope = float(np.polyfit(rs, a0, 1)[0])
    rel = abs(slope - np.pi) / np.pi
    ok = rel <= 0.02
    status |= 0 if ok else 1
    summary = os.path.join(out_base, "sweep_summary.txt")
    with open(summary, "w") as f:
        for r, ap, aq, code in rows:
            f.write(f"R={r:g} area_P0={ap:.6f} area_Q0={aq:.6f} "
                    f"run={'PASS' if code == 0 else 'FAIL'}\n")
        f.write(f"check=area_vs_R_slope status={'PASS' if ok else 'FAIL'} "
                f"slope={slope:.6f} target={np.pi:.6f} rel_err={rel:.4f}\n")
        f.write(f"overall={'PASS' if status == 0 else 'FAIL'}\n")
    return status, summary

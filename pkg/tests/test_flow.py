import numpy as np
import pytest

from csflab.geometry import EndLine, SpaceCurve, hausdorff_distance
from csflab.flow import (
    FlowStepError,
    MonitorViolation,
    StepControl,
    evolve,
    flow_step,
    make_state,
    read_checkpoint,
    stability_dt,
    write_checkpoint,
)
from csflab.regressions import circle_regression, oval_regression, translating_reaper, unit_circle
from csflab.solitons import ReaperSpec, sample_grim_reaper


def clamped_line(n=21, length=1.0):
    d = np.array([1.0, 0.0, 0.0])
    pts = np.outer(np.linspace(0, length, n), d)
    ends = (EndLine(pts[0], d, "clamp"), EndLine(pts[-1], d, "clamp"))
    return SpaceCurve(pts, "open", ends)


# -- stability_dt --------------------------------------------------------------------

def test_stability_dt_straight_segment():
    ctrl = StepControl(h=0.05, dt_max=0.7, cfl=0.5)
    st = make_state(clamped_line())
    # zero curvature: only the mesh term binds
    assert stability_dt(st, ctrl) == pytest.approx(min(0.7, 0.5 * 0.05 ** 2 / 2.0))


def test_stability_dt_unit_circle_formula():
    # frozen from the formula: min(1, 0.5*0.0157^2/2, 0.5/1) = 6.16225e-5
    ctrl = StepControl(h=0.0157, dt_max=1.0, cfl=0.5)
    st = make_state(unit_circle(400))
    assert stability_dt(st, ctrl) == pytest.approx(6.16225e-5, rel=1e-3)


def test_stability_dt_mesh_scaling():
    st = make_state(clamped_line())
    dt1 = stability_dt(st, StepControl(h=0.04, cfl=0.5))
    dt2 = stability_dt(st, StepControl(h=0.02, cfl=0.5))
    assert dt1 == pytest.approx(4.0 * dt2)


def test_control_validation():
    with pytest.raises(ValueError):
        StepControl(h=-1.0)
    with pytest.raises(ValueError):
        StepControl(h=0.1, cfl=1.5)


# -- flow_step -----------------------------------------------------------------------

def test_stationary_line():
    curve = clamped_line()
    st, _ = evolve(make_state(curve), 0.1, StepControl(h=0.05))
    assert np.abs(st.curve.vertices - curve.vertices).max() < 1e-12


def test_flow_step_rejects_oversized_dt():
    st = make_state(unit_circle(100))
    ctrl = StepControl(h=2 * np.pi / 100, cfl=0.5)
    with pytest.raises(FlowStepError):
        flow_step(st, 100.0 * stability_dt(st, ctrl), ctrl)


def test_circle_shrinks_to_quarter_time():
    st = make_state(unit_circle(400))
    ctrl = StepControl(h=2 * np.pi / 400, cfl=0.5)
    st, _ = evolve(st, 0.25, ctrl)
    v = st.curve.vertices
    r = np.linalg.norm(v - v.mean(axis=0), axis=1).mean()
    assert r == pytest.approx(np.sqrt(0.5), rel=5e-3)


def test_reaper_translates_short_horizon():
    n = 400
    curve = translating_reaper(1.4, n)
    ctrl = StepControl(h=curve.total_length() / (n - 1), cfl=1.0)
    st, _ = evolve(make_state(curve), 0.2, ctrl)
    target = sample_grim_reaper(ReaperSpec(t=0.2), (-1.4, 1.4), 4 * n)
    assert hausdorff_distance(st.curve, target) < 2e-4
    assert st.curve.vertices[:, 1].max() == pytest.approx(-0.2, abs=2e-3)


def test_length_decreases_closed():
    rng = np.random.default_rng(5)
    th = 2 * np.pi * np.arange(200) / 200
    r = 1.0 + 0.2 * np.cos(3 * th) + 0.1 * np.sin(5 * th)
    curve = SpaceCurve(np.column_stack([r * np.cos(th), r * np.sin(th), np.zeros(200)]),
                       "closed", validate=False)
    st = make_state(curve)
    ctrl = StepControl(h=curve.total_length() / 200, cfl=0.5, resample_cadence=10 ** 9)
    lengths = [st.curve.total_length()]
    for _ in range(200):
        st = flow_step(st, stability_dt(st, ctrl), ctrl)
        lengths.append(st.curve.total_length())
    assert np.all(np.diff(lengths) < 1e-12)


def test_length_decreases_clamped_straight_ends():
    # straight clamped tails with a bump in the middle
    x = np.linspace(0, 10, 400)
    y = np.exp(-((x - 5) ** 2)) * 0.5
    y[x < 2] = 0.0
    y[x > 8] = 0.0
    pts = np.column_stack([x, y, np.zeros_like(x)])
    d = np.array([1.0, 0, 0])
    ends = (EndLine(pts[0], d, "clamp"), EndLine(pts[-1], d, "clamp"))
    curve = SpaceCurve(pts, "open", ends, validate=False)
    st = make_state(curve)
    ctrl = StepControl(h=10.0 / 399, cfl=0.5, resample_cadence=10 ** 9)
    lengths = [st.curve.total_length()]
    for _ in range(200):
        st = flow_step(st, stability_dt(st, ctrl), ctrl)
        lengths.append(st.curve.total_length())
    assert np.all(np.diff(lengths) < 1e-12)


# -- evolve -------------------------------------------------------------------------

def test_evolve_noop_returns_empty_report():
    st0 = make_state(unit_circle(64))
    st, rep = evolve(st0, st0.t, StepControl(h=0.1))
    assert st is st0
    assert len(rep) == 0


def test_evolve_monitor_cadence_grid():
    st = make_state(unit_circle(128))
    ctrl = StepControl(h=2 * np.pi / 128, cfl=0.5)
    st, rep = evolve(st, 0.1, ctrl, monitor_schedule=0.025,
                     monitors=[("len", lambda s: {"length": s.curve.total_length()})])
    t = rep.column("t")
    assert t[0] == 0.0
    assert np.allclose(t, [0.0, 0.025, 0.05, 0.075, 0.1], atol=1e-12)
    assert np.all(np.diff(rep.column("length")) < 0)


def test_evolve_oval_regression():
    result = oval_regression(n=400, t_start=-2.0, t_end=-1.8)
    assert result.measures["hausdorff"] < 1e-2


def test_evolve_hard_violation_aborts():
    st = make_state(unit_circle(64))
    ctrl = StepControl(h=2 * np.pi / 64, cfl=0.5)
    with pytest.raises(MonitorViolation):
        evolve(st, 0.05, ctrl, monitor_schedule=0.01,
               monitors=[("len", lambda s: {"length": s.curve.total_length()})],
               hard_checks=[("length", lambda v: v > 6.2)])


def test_flow_convergence_order_circle():
    # exact-solution regression improves at rate >= 1.5 under mesh doubling
    errs = []
    for n in (50, 100, 200):
        res = circle_regression(n=n, t_end=0.3, cfl=0.5)
        errs.append(abs(res.measures["radius"] - res.measures["expected"]))
    assert np.log2(errs[0] / errs[1]) >= 1.5
    assert np.log2(errs[1] / errs[2]) >= 1.5


# -- checkpointing --------------------------------------------------------------------

def test_checkpoint_roundtrip(tmp_path):
    curve = translating_reaper(1.2, 50)
    st = make_state(curve, t=0.5)
    ctrl = StepControl(h=0.05, dt_max=0.5, cfl=0.7, resample_cadence=13)
    base = tmp_path / "ck"
    write_checkpoint(base, st, ctrl)
    st2, ctrl2 = read_checkpoint(base)
    assert st2.t == st.t
    assert np.array_equal(st2.curve.vertices, st.curve.vertices)
    assert ctrl2 == ctrl
    ec = st2.curve.end_conditions[0]
    assert ec.mode == "translate" and ec.speed == 1.0


def test_resume_reproduces_rows(tmp_path):
    st = make_state(unit_circle(128))
    ctrl = StepControl(h=2 * np.pi / 128, cfl=0.5)
    mon = [("r", lambda s: {"radius": float(np.linalg.norm(
        s.curve.vertices - s.curve.vertices.mean(0), axis=1).mean())})]
    states = {}

    def keep(s, row):
        states[round(row["t"], 10)] = s

    full_state, full = evolve(st, 0.1, ctrl, monitor_schedule=0.02, monitors=mon,
                              on_sample=keep)
    base = tmp_path / "ck"
    write_checkpoint(base, states[0.04], ctrl)
    st2, ctrl2 = read_checkpoint(base)
    _final, resumed = evolve(st2, 0.1, ctrl2, monitor_schedule=0.02, monitors=mon)
    t_full = full.column("t")
    r_full = full.column("radius")
    for t_r, r_r in zip(resumed.column("t")[1:], resumed.column("radius")[1:]):
        i = int(np.argmin(np.abs(t_full - t_r)))
        assert abs(t_full[i] - t_r) < 1e-12
        assert abs(r_full[i] - r_r) < 1e-12

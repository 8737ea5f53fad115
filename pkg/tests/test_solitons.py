import numpy as np
import pytest

from csflab.geometry import Slab, hausdorff_distance, slab_margin, rotation_about_axis
from csflab.solitons import (
    BarrierCylinder,
    ReaperSpec,
    RigidMotion,
    SolitonError,
    cylinder_clearance,
    oval_half_extents,
    oval_signed_distance,
    sample_angenent_oval,
    sample_grim_reaper,
    slab_distance,
    verify_soliton_residual,
)

# Oracle values, from root-solving cos x = e^t and cosh y = e^{-t} by
# bisection (scipy.optimize.brentq at xtol 1e-15).
OVAL_X_AT_TM1 = 1.1940688187
OVAL_Y_AT_TM1 = 1.6574544542
GAP_TM1 = 0.3767275081
GAP_TM3 = 0.0498076596


# -- grim reaper -----------------------------------------------------------------

def test_reaper_through_origin():
    curve = sample_grim_reaper(ReaperSpec(), (-1.0, 1.0), 201)
    mid = curve.vertices[100]
    assert np.allclose(mid, [0, 0, 0], atol=1e-12)


def test_reaper_height_at_pi_over_3():
    curve = sample_grim_reaper(ReaperSpec(), (np.pi / 3 - 1e-12, np.pi / 3 + 1e-3), 4)
    assert curve.vertices[0, 1] == pytest.approx(np.log(0.5), abs=1e-9)


def test_reaper_translates_down_one_per_unit_time():
    spec = ReaperSpec(t=1.0)
    curve = sample_grim_reaper(spec, (-1e-9, 1e-6), 4)
    assert curve.vertices[0, 1] == pytest.approx(-1.0, abs=1e-8)
    assert curve.vertices[0, 0] == pytest.approx(0.0, abs=1e-8)


def test_reaper_scaled_width_and_speed():
    # width 2 pi reaper (lam = 2) moves at speed 1/2
    spec = ReaperSpec(lam=2.0, t=2.0)
    curve = sample_grim_reaper(spec, (-1e-9, 1e-6), 4)
    assert curve.vertices[0, 1] == pytest.approx(-1.0, abs=1e-8)


def test_reaper_posed():
    pose = RigidMotion(rotation_about_axis([0, 0, 1], np.pi / 2), np.array([1.0, 0, 0]))
    curve = sample_grim_reaper(ReaperSpec(pose=pose), (-1.0, 1.0), 51)
    # the model tip (0,0,0) maps to the translation
    assert np.allclose(curve.vertices[25], [1, 0, 0], atol=1e-12)


def test_reaper_range_must_stay_inside_asymptotes():
    with pytest.raises(SolitonError):
        sample_grim_reaper(ReaperSpec(), (-np.pi / 2, 1.0), 8)


def test_reaper_equal_arclength_sampling():
    curve = sample_grim_reaper(ReaperSpec(), (-1.4, 1.4), 400)
    h = curve.edge_lengths()
    assert h.max() / h.min() < 1.0001


# -- Angenent oval ----------------------------------------------------------------

def test_oval_crossings_match_root_solve():
    curve = sample_angenent_oval(-1.0, 400)
    v = curve.vertices
    x_at_y0 = v[np.abs(v[:, 1]) < 1e-9][:, 0]
    assert np.allclose(np.abs(x_at_y0), OVAL_X_AT_TM1, atol=1e-9)
    y_at_x0 = v[np.abs(v[:, 0]) < 1e-9][:, 1]
    assert np.allclose(np.abs(y_at_x0), OVAL_Y_AT_TM1, atol=1e-9)


def test_oval_symmetric():
    v = sample_angenent_oval(-1.5, 256).vertices
    assert abs(v[:, 0].max() + v[:, 0].min()) < 1e-12
    assert abs(v[:, 1].max() + v[:, 1].min()) < 1e-12


def test_oval_inside_slab():
    for t in (-0.5, -1.0, -3.0):
        curve = sample_angenent_oval(t, 128)
        assert slab_margin(curve, Slab([1, 0, 0], 0.0, np.pi)) > 0


def test_oval_convex():
    # discrete turning angle keeps one sign at every vertex
    v = sample_angenent_oval(-2.0, 512).vertices
    e = np.roll(v, -1, axis=0) - v
    cross_z = e[:, 0] * np.roll(e, -1, axis=0)[:, 1] - e[:, 1] * np.roll(e, -1, axis=0)[:, 0]
    assert np.all(cross_z > 0) or np.all(cross_z < 0)


def test_oval_rejects_nonnegative_time():
    with pytest.raises(SolitonError):
        sample_angenent_oval(0.0, 64)


def test_oval_converges_to_reaper_at_tip():
    # window around the upper tip vs the unit reaper, O(e^t) convergence
    errs = []
    for t in (-2.0, -3.0, -4.0):
        oval = sample_angenent_oval(t, 4096)
        _, y_max = oval_half_extents(t)
        v = oval.vertices[oval.vertices[:, 1] > y_max - 1.0]
        shifted = v - np.array([0.0, y_max, 0.0])
        lo, hi = shifted[:, 0].min(), shifted[:, 0].max()
        target = sample_grim_reaper(ReaperSpec(), (lo, hi), 4096)
        from csflab.geometry import SpaceCurve
        errs.append(hausdorff_distance(SpaceCurve(shifted, "open", validate=False), target))
    errs = np.array(errs)
    assert np.all(errs < 5.0 * np.exp([-2.0, -3.0, -4.0]))
    # decays at least as fast as e^t per unit time (observed: ~e^{2t})
    ratios = errs[:-1] / errs[1:]
    assert np.all(ratios > np.e * 0.6)


# -- slab distance -----------------------------------------------------------------

def test_slab_distance_values():
    assert slab_distance(-3.0) == pytest.approx(GAP_TM3, abs=1e-9)
    assert slab_distance(-1.0) == pytest.approx(GAP_TM1, abs=1e-9)


def test_slab_distance_below_bound_and_monotone():
    ts = -np.linspace(0.2, 8, 60)
    gaps = np.array([slab_distance(t) for t in ts])
    assert np.all(gaps < 2.0 * np.exp(ts))
    assert np.all(np.diff(gaps) < 0)  # decreasing toward t -> -inf


def test_slab_distance_rejects_nonnegative():
    with pytest.raises(SolitonError):
        slab_distance(0.0)


# -- cylinder clearance ------------------------------------------------------------

def axis_cylinder(offset=-1.0):
    return BarrierCylinder(RigidMotion(), offset, "test")


def test_clearance_center_is_minus_inradius():
    b = axis_cylinder(-1.0)
    d = cylinder_clearance(np.array([0.0, 0.0, 0.0]), b, 0.0)
    assert d == pytest.approx(-OVAL_X_AT_TM1, abs=1e-8)


def test_clearance_at_slab_wall_matches_gap():
    b = axis_cylinder(-3.0)
    d = cylinder_clearance(np.array([np.pi / 2, 0.0, 5.0]), b, 0.0)
    assert d == pytest.approx(GAP_TM3, abs=1e-8)


def test_clearance_far_point():
    b = axis_cylinder(-2.0)
    d = cylinder_clearance(np.array([10.0, 0.0, -3.0]), b, 0.0)
    assert d == pytest.approx(10.0 - np.arccos(np.exp(-2.0)), abs=1e-6)


def test_clearance_on_own_oval_is_zero():
    b = axis_cylinder(-2.0)
    pts = sample_angenent_oval(-2.0, 256).vertices
    d = cylinder_clearance(pts, b, 0.0)
    assert np.abs(d).max() < 1e-6


def test_clearance_dense_sampling_oracle():
    # compare the root-solved distance against a dense polyline oracle
    rng = np.random.default_rng(11)
    b = axis_cylinder(-1.5)
    dense = sample_angenent_oval(-1.5, 20000).vertices
    pts = rng.uniform(-2.5, 2.5, size=(40, 3))
    exact = cylinder_clearance(pts, b, 0.0)
    for p, d in zip(pts, exact):
        oracle = np.linalg.norm(dense[:, :2] - p[:2], axis=1).min()
        assert abs(abs(d) - oracle) < 5e-7


def test_clearance_expired_barrier_rejected():
    b = axis_cylinder(-1.0)
    with pytest.raises(SolitonError):
        cylinder_clearance(np.zeros(3), b, 1.5)


def test_oval_signed_distance_sign_convention():
    d_in = oval_signed_distance(np.array([[0.1, 0.1]]), -1.0)
    d_out = oval_signed_distance(np.array([[2.0, 0.0]]), -1.0)
    assert d_in[0] < 0 < d_out[0]


# -- soliton residuals ----------------------------------------------------------------

def test_reaper_residual_small():
    assert verify_soliton_residual("reaper", 0.0, 801) < 1e-3


def test_reaper_tip_curvature_unity():
    from csflab.geometry import compute_frenet
    curve = sample_grim_reaper(ReaperSpec(), (-1.2, 1.2), 801)
    fr = compute_frenet(curve)
    i = np.argmax(curve.vertices[:, 1])
    assert fr.kappa[i] == pytest.approx(1.0, abs=2e-4)


def test_oval_residual_small():
    assert verify_soliton_residual("oval", -2.0, 1600) < 1e-3


def test_residual_convergence_order():
    for kind, t, ns in (("reaper", 0.0, (101, 201, 401)),
                        ("oval", -2.0, (200, 400, 800))):
        errs = [verify_soliton_residual(kind, t, n, dt=1e-6) for n in ns]
        assert np.log2(errs[0] / errs[1]) >= 1.9
        assert np.log2(errs[1] / errs[2]) >= 1.9


def test_unknown_kind_rejected():
    with pytest.raises(SolitonError):
        verify_soliton_residual("paperclip", -1.0, 100)

import math

import numpy as np
import pytest

from csflab.construction import (
    ConstructionError,
    SpliceConfig,
    assemble_splice,
    asymptote_lines,
    build_half_reaper_xy,
    build_half_reaper_yz,
    line_pairwise_distances,
    place_barriers,
    splice_scale,
)
from csflab.geometry import compute_frenet, point_to_segments_distance
from csflab.monitors import RAMP_DIRECTION, barrier_clearances, ramp_diagnostics
from csflab.solitons import slab_distance


@pytest.fixture(scope="module")
def splice_r4():
    cfg = SpliceConfig(R=4.0)
    P = build_half_reaper_xy(cfg.R, cfg.h, cfg.R_bend)
    Q = build_half_reaper_yz(cfg.R, cfg.h, cfg.R_bend)
    return cfg, P, Q, assemble_splice(P, Q, cfg)


# -- scale and builders --------------------------------------------------------------

def test_splice_scale_limits():
    assert splice_scale(5.0) == pytest.approx(1.5640583288, abs=1e-9)
    assert splice_scale(40.0) == pytest.approx(np.pi / 2, abs=1e-12)
    with pytest.raises(ConstructionError):
        splice_scale(0.5)


def test_xy_hook_endpoint_at_origin(splice_r4):
    _cfg, P, _Q, _ = splice_r4
    assert np.linalg.norm(P.vertices[-1]) < 1e-9


def test_xy_hook_planar_and_in_halfspace(splice_r4):
    _cfg, P, _Q, _ = splice_r4
    assert np.abs(P.vertices[:, 2]).max() == 0.0
    assert P.vertices[:, 0].max() < 1e-12


def test_xy_hook_asymptote(splice_r4):
    cfg, P, _Q, _ = splice_r4
    x_R = splice_scale(cfg.R)
    deep = P.vertices[0]
    assert deep[0] == pytest.approx(-(np.pi / 2 + x_R), abs=2e-5)
    assert np.linalg.norm(deep) == pytest.approx(cfg.R_bend, abs=1e-9)


def test_xy_hook_end_tangent_off_vertical_by_exp_R(splice_r4):
    cfg, P, _Q, _ = splice_r4
    u = P.vertices[-1] - P.vertices[-2]
    u /= np.linalg.norm(u)
    ang = np.arccos(np.clip(-u[1], -1, 1))  # angle from straight down
    assert 0.5 * math.exp(-cfg.R) < ang < 2.0 * math.exp(-cfg.R)


def test_yz_hook_containment(splice_r4):
    cfg, _P, Q, _ = splice_r4
    v = Q.vertices
    assert np.abs(v[:, 0]).max() < 1e-12          # plane x = 0
    assert v[:, 2].min() > -1e-12                 # z >= 0
    assert v[:, 1].min() > -cfg.R - 1e-9          # y >= -R (tip depth)


def test_yz_hook_far_asymptote(splice_r4):
    cfg, _P, Q, _ = splice_r4
    x_R = splice_scale(cfg.R)
    deep = Q.vertices[-1]
    assert deep[2] == pytest.approx(np.pi / 2 + x_R, abs=2e-5)


def test_yz_hook_is_rotated_image(splice_r4):
    # half-turn in the xy-plane then quarter-turn about the y-axis
    _cfg, P, Q, _ = splice_r4
    M = np.array([[0.0, 0.0, -1.0], [0.0, 1.0, 0.0], [1.0, 0.0, 0.0]]) @ \
        np.array([[-1.0, 0.0, 0.0], [0.0, -1.0, 0.0], [0.0, 0.0, 1.0]])
    image = P.vertices @ M.T
    assert np.abs(image[::-1] - Q.vertices).max() < 1e-12


def test_builder_precondition():
    with pytest.raises(ConstructionError):
        build_half_reaper_xy(0.8, 0.05, 5.0)


# -- the interior ramp identity -------------------------------------------------------

def test_interior_ratio_is_sqrt2(splice_r4):
    # on the unmodified reaper interior <T,e> = kappa/sqrt(2)
    _cfg, P, _Q, _ = splice_r4
    fr = compute_frenet(P)
    te = fr.tangent @ RAMP_DIRECTION
    interior = slice(5, -5)
    ratio = fr.kappa[interior] / te[interior]
    assert np.abs(ratio - np.sqrt(2.0)).max() < 1e-3
    assert te[interior].min() > 0


# -- assembled contract ----------------------------------------------------------------

def test_assembled_is_ramp_with_ratio_bound(splice_r4):
    cfg, _P, _Q, curve = splice_r4
    diag = ramp_diagnostics(curve, RAMP_DIRECTION, guard=cfg.ratio_guard)
    assert diag.min_te > 0
    assert diag.ratio_max <= 2.0


def test_assembled_close_to_raw_union(splice_r4):
    cfg, P, Q, curve = splice_r4
    bound = 10.0 * math.exp(-cfg.R)
    seg_a = np.vstack([P.vertices[:-1], Q.vertices[:-1]])
    seg_b = np.vstack([P.vertices[1:], Q.vertices[1:]])
    r = np.linalg.norm(curve.vertices, axis=1)
    inside = curve.vertices[r <= cfg.R_bend]
    assert point_to_segments_distance(inside, seg_a, seg_b).max() <= bound


def test_assembled_end_tangents_exact(splice_r4):
    _cfg, _P, _Q, curve = splice_r4
    for idx, ec in zip((0, -1), curve.end_conditions):
        edge = curve.vertices[idx + 1] - curve.vertices[idx] if idx == 0 \
            else curve.vertices[idx] - curve.vertices[idx - 1]
        u = edge / np.linalg.norm(edge)
        assert abs(abs(np.dot(u, RAMP_DIRECTION)) - 1.0) < 1e-12
        assert ec.mode == "clamp"


def test_assembled_simultaneous_ramps(splice_r4):
    # ramp for every a e1 + b e3 with a, b >= 0
    _cfg, _P, _Q, curve = splice_r4
    fr = compute_frenet(curve)
    assert fr.tangent[:, 0].min() > -1e-12
    assert fr.tangent[:, 2].min() > -1e-12
    for a, b in ((1, 0), (0, 1), (1, 1), (0.3, 0.7), (0.9, 0.1)):
        v = np.array([a, 0.0, b]) / math.hypot(a, b)
        assert (fr.tangent @ v).min() > -1e-12


def test_assembled_mesh_near_uniform(splice_r4):
    _cfg, _P, _Q, curve = splice_r4
    h = curve.edge_lengths()
    assert h.max() / h.min() <= 1.05


def test_huge_bend_rejected(splice_r4):
    cfg, P, Q, _ = splice_r4
    bad = SpliceConfig(R=cfg.R, beta=1.0)
    with pytest.raises(ConstructionError, match="ratio|kappa"):
        assemble_splice(P, Q, bad)


def test_config_invariants():
    with pytest.raises(ConstructionError):
        SpliceConfig(R=1.0)
    with pytest.raises(ConstructionError):
        SpliceConfig(R=4.0, R_bend=10.0)       # must exceed 3R
    with pytest.raises(ConstructionError):
        SpliceConfig(R=4.0, twist_window=6.0)  # past the tips
    with pytest.raises(ConstructionError):
        SpliceConfig(R=4.0, flare_ratio=2.5)


# -- asymptote line geometry -----------------------------------------------------------

def test_three_line_distances():
    for R in (4.0, 5.0, 6.0, 8.0, 12.0):
        w = np.pi / 2 + splice_scale(R)
        d = line_pairwise_distances(R)
        assert np.allclose(d, [w, w, np.sqrt(2) * w], atol=1e-12)
    # upward convergence to (pi, pi, sqrt(2) pi)
    seq = np.array([line_pairwise_distances(R) for R in (4, 6, 8, 12)])
    assert np.all(np.diff(seq[:, 0]) > 0)
    assert np.all(seq[-1] < np.array([np.pi, np.pi, np.sqrt(2) * np.pi]))
    assert np.allclose(seq[-1], [np.pi, np.pi, np.sqrt(2) * np.pi], atol=1e-4)


def test_asymptote_lines_positions():
    lines = asymptote_lines(5.0)
    x_R = splice_scale(5.0)
    assert np.allclose(lines[0][0], [-np.pi / 2 - x_R, 0, 0])
    assert np.allclose(lines[1][0], [0, 0, 0])
    assert np.allclose(lines[2][0], [0, 0, np.pi / 2 + x_R])
    for _p, d in lines:
        assert np.allclose(d, [0, 1, 0])


# -- barriers ---------------------------------------------------------------------------

def test_corner_barriers_clear_and_counted(splice_r4):
    cfg, _P, _Q, curve = splice_r4
    barriers = place_barriers(cfg.R, "corner", curve)
    assert len(barriers) == 6
    labels = {b.label for b in barriers}
    assert {"threaded_xy", "threaded_yz"} <= labels
    cl = barrier_clearances(curve, barriers, 0.0)
    assert min(cl.values()) > 0


def test_tip_barriers_clear_and_counted(splice_r4):
    cfg, _P, _Q, curve = splice_r4
    barriers = place_barriers(cfg.R, "tip", curve)
    assert len(barriers) == 4
    cl = barrier_clearances(curve, barriers, 0.0)
    assert min(cl.values()) > 0
    # recentered near the tips: oval centers sit at y = +-R
    ys = sorted(b.pose.translation[1] for b in barriers)
    assert ys[0] == ys[1] == -cfg.R and ys[2] == ys[3] == cfg.R


def test_outer_pair_forms_slab_of_width_pi_plus_2gap():
    # the outermost pair in the yz plane has walls at midline +-(pi/2 + d_S)
    R = 5.0
    d_s = slab_distance(-R)
    x_R = splice_scale(R)
    m_z = (np.pi / 2 + x_R) / 2.0
    barriers = {b.label: b for b in place_barriers(R, "corner")}
    zc_minus = barriers["outer_z-"].pose.translation[2]
    zc_plus = barriers["outer_z+"].pose.translation[2]
    half_w = np.arccos(np.exp(-R))
    wall_lo = zc_minus + half_w
    wall_hi = zc_plus - half_w
    assert wall_lo == pytest.approx(m_z - (np.pi / 2 + d_s), abs=1e-12)
    assert wall_hi == pytest.approx(m_z + (np.pi / 2 + d_s), abs=1e-12)
    assert wall_hi - wall_lo == pytest.approx(np.pi + 2 * d_s, abs=1e-12)
    assert np.pi + 2 * d_s < np.pi + 4 * math.exp(-R)


def test_barrier_time_offset_and_expiry():
    barriers = place_barriers(4.0, "corner")
    assert all(b.time_offset == -4.0 for b in barriers)
    with pytest.raises(Exception):
        barriers[0].oval_time(4.0)


def test_bad_variant_rejected():
    with pytest.raises(ConstructionError):
        place_barriers(4.0, "sideways")

"""Initial data: two perpendicular half grim reapers spliced into a ramp.

The xy-plane hook ends at the origin; its partner is the image under a
half-turn in the xy-plane followed by a quarter-turn about the y-axis, so it
lives in the yz-plane.  The junction is smoothed by equal-and-opposite
arclength-windowed twists of the two branches about the ramp axis (twisting
about that axis leaves <T, e> pointwise unchanged), and the ends are flared
with a constant-ratio bend until both tangents equal the ramp direction
exactly, then continued by straight clamped tails.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, asdict

import numpy as np
from scipy.optimize import brentq

from .geometry import EndLine, SpaceCurve, hausdorff_to_segments
from .monitors import RAMP_DIRECTION, RampDiagnostics, asymptote_lines, \
    barrier_clearances, line_pairwise_distances, ramp_diagnostics
from .solitons import BarrierCylinder, RigidMotion

__all__ = [
    "SpliceConfig", "ConstructionError", "RampDiagnostics",
    "build_half_reaper_xy", "build_half_reaper_yz", "assemble_splice",
    "place_barriers", "asymptote_lines", "line_pairwise_distances",
    "splice_scale",
]


class ConstructionError(ValueError):
    """The construction cannot meet its contract with the given parameters."""


def splice_scale(R):
    """x_R = arccos(e^-R): where the depth-R reaper crosses its own axis."""
    if R <= 1:
        raise ConstructionError(f"junction geometry degenerates for R <= 1, got R={R}")
    return float(np.arccos(np.exp(-R)))


@dataclass(frozen=True)
class SpliceConfig:
    """All parameters of the spliced initial data.

    R sets the reaper time-depth; R_bend the radius inside which the curve
    is the unperturbed splice (flares start there); beta overrides the
    junction bend angle (None aligns the branch tangents exactly, a bend of
    order e^-R); twist_window is the arclength over which the junction
    twists decay (it must end before the reaper tips); flare_ratio is the
    constant kappa/<T,e> held along the end flares; tail_length the straight
    clamped run appended after each flare.
    """

    R: float
    R_bend: float = 0.0            # 0 -> default 3.1 R
    beta: float | None = None
    twist_window: float = 0.0      # 0 -> default min(4.5, R + 0.5)
    flare_ratio: float = 1.8
    tail_length: float = 16.0
    h: float = 0.05
    domain_halflength: float | None = None
    ratio_guard: float = 1e-13

    def __post_init__(self):
        if self.R <= 1:
            raise ConstructionError(f"R must exceed 1, got {self.R}")
        if self.R_bend == 0.0:
            object.__setattr__(self, "R_bend", 3.1 * self.R)
        if self.R_bend <= 3.0 * self.R:
            raise ConstructionError(
                f"R_bend={self.R_bend:.3g} must exceed 3R={3 * self.R:.3g}")
        if self.twist_window == 0.0:
            object.__setattr__(self, "twist_window", min(4.5, self.R + 0.5))
        if not (1.0 <= self.twist_window <= self.R + 0.55):
            raise ConstructionError(
                f"twist window {self.twist_window:.3g} must lie in [1, R + 0.55] "
                "(it has to end before the reaper tips)")
        if self.beta is not None and self.beta <= 0:
            raise ConstructionError("beta must be positive when given")
        if not (1.0 < self.flare_ratio <= 2.0):
            raise ConstructionError(
                f"flare ratio {self.flare_ratio} must lie in (1, 2]")
        if self.h <= 0:
            raise ConstructionError("target edge length must be positive")
        if self.tail_length < 4.0:
            raise ConstructionError("tail length must be at least 4")

    def as_dict(self):
        return asdict(self)


# -- half-reaper builders ---------------------------------------------------------

def _reaper_s_nodes(R, h, extent):
    """Arclength nodes for the depth-R hook, deep end to the origin endpoint.

    In unit-reaper arclength s (zero at the tip), the hook runs from s_min
    (deep, negative) to s0 = asinh(tan x_R); position x = atan(sinh s) - x_R,
    y = R - ln cosh s, which is numerically stable arbitrarily deep.
    """
    x_R = splice_scale(R)
    s0 = float(np.arcsinh(np.tan(x_R)))
    tip_radius = math.hypot(x_R, R)
    if extent <= tip_radius + 1.0:
        raise ConstructionError(
            f"extent {extent:.3g} must exceed the tip radius {tip_radius:.3g} + 1")
    if extent > 30.0 + R:
        raise ConstructionError(f"extent {extent:.3g} too deep for stable sampling")

    def radius2(s):
        x = np.arctan(np.sinh(s)) - x_R
        y = R - (np.logaddexp(s, -s) - math.log(2.0))
        return x * x + y * y - extent * extent

    s_min = brentq(radius2, -(extent + R + 5.0), 0.0, xtol=1e-13)
    n = max(4, int(math.ceil((s0 - s_min) / h)) + 1)
    return np.linspace(s_min, s0, n), x_R


def build_half_reaper_xy(R, h, extent):
    """The xy-plane hook: depth-R reaper, shifted to end at the origin.

    Runs from the deep end (radius `extent`) up over the tip at (-x_R, R)
    down to the origin; the left asymptote is the line x = -pi/2 - x_R.
    """
    s, x_R = _reaper_s_nodes(R, h, extent)
    x = np.arctan(np.sinh(s)) - x_R
    y = R - (np.logaddexp(s, -s) - math.log(2.0))
    pts = np.column_stack([x, y, np.zeros_like(s)])
    pts[-1] = 0.0  # analytic endpoint, snap the rounding residue
    return SpaceCurve(pts, "open", validate=False)


def build_half_reaper_yz(R, h, extent):
    """The yz-plane partner: half-turn in the xy-plane, then a quarter-turn
    about the y-axis, of the xy hook.  Starts at the origin, dips to the tip
    at (0, -R, x_R), and exits along the asymptote {x = 0, z = pi/2 + x_R}.
    """
    s, x_R = _reaper_s_nodes(R, h, extent)
    s = s[::-1]
    y = (np.logaddexp(s, -s) - math.log(2.0)) - R
    z = x_R - np.arctan(np.sinh(s))
    pts = np.column_stack([np.zeros_like(s), y, z])
    pts[0] = 0.0
    return SpaceCurve(pts, "open", validate=False)


# -- junction twist ----------------------------------------------------------------

def _smoothstep5(t):
    t = np.clip(t, 0.0, 1.0)
    return t * t * t * (t * (6.0 * t - 15.0) + 10.0)


def _twist_about_ramp_axis(points, sigma, amplitude, window):
    """Rotate each point about the ramp axis through the origin.

    The per-vertex angle is amplitude * (1 - smoothstep(sigma/window)) where
    sigma is the arclength to the junction; rotations about this axis leave
    <T, e> unchanged at every point.
    """
    alpha = amplitude * (1.0 - _smoothstep5(sigma / window))
    e = RAMP_DIRECTION
    c = np.cos(alpha)[:, None]
    s = np.sin(alpha)[:, None]
    cross = np.cross(np.broadcast_to(e, points.shape), points)
    dot = (points @ e)[:, None]
    return points * c + cross * s + e * dot * (1.0 - c)


def _perp_angle(vec):
    """Angle of the component of vec perpendicular to the ramp axis."""
    e = RAMP_DIRECTION
    w1 = np.array([1.0, 0.0, -1.0]) / np.sqrt(2.0)
    w2 = np.array([0.0, 1.0, 0.0])
    perp = vec - np.dot(vec, e) * e
    return math.atan2(float(np.dot(perp, w2)), float(np.dot(perp, w1)))


# -- end flares -------------------------------------------------------------------

def _flare_vertices(anchor, tau, ratio, h, tail_length, sign):
    """Bend from tangent tau to the ramp direction at constant kappa/<T,e>.

    The forward tangent obeys dphi/dsigma = ratio * <T(phi), e> with
    T(phi) = cos(phi) tau + sin(phi) ehat; the solution is explicit, and the
    flare's length is ~ ln(2/<tau,e>)/ratio.  Marches outward from (but
    excluding) `anchor` in direction sign*T (sign=-1 prepends before the
    curve start, +1 appends after its end), finishing with a straight tail
    of the requested length exactly along the ramp direction.
    """
    e = RAMP_DIRECTION
    eps0 = float(np.dot(tau, e))
    if eps0 <= 0:
        raise ConstructionError("cannot flare an end whose tangent opposes the ramp direction")
    w = e - eps0 * tau
    wn = float(np.linalg.norm(w))
    ehat = w / wn
    r = math.hypot(eps0, wn)
    phi0 = math.atan2(eps0, wn)
    k0 = math.tan(phi0 / 2.0)
    sigma_end = (math.log(math.tan((math.pi / 2.0 + phi0) / 2.0)) - math.log(k0)) / (ratio * r)

    def tangent(sigma):
        phi = 2.0 * math.atan(k0 * math.exp(ratio * r * sigma)) - phi0
        return math.cos(phi) * tau + math.sin(phi) * ehat

    m = max(1, int(round(sigma_end / h)))
    ds = sigma_end / m
    verts = []
    q = anchor.astype(float).copy()
    for j in range(m):
        s0 = j * ds
        # Simpson quadrature of the unit tangent field
        q = q + sign * (ds / 6.0) * (tangent(s0) + 4.0 * tangent(s0 + ds / 2.0) + tangent(s0 + ds))
        verts.append(q.copy())
    m_tail = max(2, int(round(tail_length / h)))
    for k in range(1, m_tail + 1):
        verts.append(q + sign * k * h * e)
    return np.array(verts), sigma_end


# -- assembly ---------------------------------------------------------------------

def assemble_splice(P, Q, cfg):
    """Splice the two hooks into one ramp curve with clamped flared ends.

    Contract, verified before returning: <T,e> > 0 at every vertex (guarded
    ratio), max kappa/<T,e> <= 2, ball-of-R_bend Hausdorff distance to the
    raw union at most 10 e^-R, identity outside the junction twist window,
    and end tangents exactly along the ramp direction.  A configured bend
    angle beta that cannot meet the ratio bound raises with the measured
    maximum.
    """
    if np.linalg.norm(P.vertices[-1]) > 1e-9 or np.linalg.norm(Q.vertices[0]) > 1e-9:
        raise ConstructionError("hook endpoints must meet at the origin")
    eR = math.exp(-cfg.R)

    sP = P.arclengths()
    sigma_P = sP[-1] - sP
    sQ = Q.arclengths()
    sigma_Q = sQ.copy()

    u_P = P.vertices[-1] - P.vertices[-2]
    u_P = u_P / np.linalg.norm(u_P)
    u_Q = Q.vertices[1] - Q.vertices[0]
    u_Q = u_Q / np.linalg.norm(u_Q)
    th_P = _perp_angle(u_P)
    th_Q = _perp_angle(u_Q)
    gap = th_P - th_Q
    if cfg.beta is None:
        a_P, a_Q = -gap / 2.0, gap / 2.0
    else:
        sgn = 1.0 if gap >= 0 else -1.0
        a_P, a_Q = -sgn * cfg.beta / 2.0, sgn * cfg.beta / 2.0

    w = cfg.twist_window
    Pv = _twist_about_ramp_axis(P.vertices, sigma_P, a_P, w)
    Qv = _twist_about_ramp_axis(Q.vertices, sigma_Q, a_Q, w)
    core = np.vstack([Pv[:-1], Qv])

    tau_start = core[1] - core[0]
    tau_start /= np.linalg.norm(tau_start)
    tau_end = core[-1] - core[-2]
    tau_end /= np.linalg.norm(tau_end)
    start_ext, flare_len_start = _flare_vertices(core[0], tau_start, cfg.flare_ratio,
                                                 cfg.h, _tail_length(cfg, tau_start), -1.0)
    end_ext, flare_len_end = _flare_vertices(core[-1], tau_end, cfg.flare_ratio,
                                             cfg.h, _tail_length(cfg, tau_end), +1.0)
    vertices = np.vstack([start_ext[::-1], core, end_ext])
    core_slice = slice(len(start_ext), len(start_ext) + len(core))
    sigma_core = np.concatenate([sigma_P[:-1], sigma_Q])

    ends = (EndLine(vertices[0], RAMP_DIRECTION, "clamp"),
            EndLine(vertices[-1], RAMP_DIRECTION, "clamp"))
    curve = SpaceCurve(vertices, "open", ends, validate=True,
                       check_self_intersection=True)

    diag = ramp_diagnostics(curve, RAMP_DIRECTION, guard=cfg.ratio_guard)
    if not diag.min_te > 0.0:
        raise ConstructionError(
            f"assembled curve is not a ramp: min <T,e> = {diag.min_te:.3e}")
    if not np.isfinite(diag.ratio_max) or diag.ratio_max > 2.0 + 1e-9:
        raise ConstructionError(
            f"curvature ratio bound failed: max kappa/<T,e> = {diag.ratio_max:.4f} > 2 "
            "(decrease beta)")

    _check_hausdorff_to_raw(curve, P, Q, cfg, eR)
    _check_untwisted_identity(curve, P, Q, cfg, core_slice, sigma_core)
    return curve


def _tail_length(cfg, tau):
    if cfg.domain_halflength is None:
        return cfg.tail_length
    e = RAMP_DIRECTION
    eps0 = max(float(np.dot(tau, e)), 1e-300)
    flare_est = math.log(2.0 / eps0) / cfg.flare_ratio
    tail = cfg.domain_halflength - cfg.R_bend - flare_est
    if tail < 4.0:
        raise ConstructionError(
            f"domain halflength {cfg.domain_halflength:.3g} leaves a tail of "
            f"{tail:.3g} < 4 after the flare ({flare_est:.3g})")
    return tail


def _raw_segments(P, Q):
    segs_a = np.vstack([P.vertices[:-1], Q.vertices[:-1]])
    segs_b = np.vstack([P.vertices[1:], Q.vertices[1:]])
    return segs_a, segs_b


def _check_hausdorff_to_raw(curve, P, Q, cfg, eR):
    from .geometry import point_to_segments_distance

    bound = 10.0 * eR
    segs_a, segs_b = _raw_segments(P, Q)
    r = np.linalg.norm(curve.vertices, axis=1)
    inside = curve.vertices[r <= cfg.R_bend * (1.0 + 1e-12)]
    d1 = point_to_segments_distance(inside, segs_a, segs_b).max()
    ca, cb = curve.vertices[:-1], curve.vertices[1:]
    raw_pts = np.vstack([P.vertices, Q.vertices])
    d2 = point_to_segments_distance(raw_pts, ca, cb).max()
    d = max(float(d1), float(d2))
    if d > bound:
        raise ConstructionError(
            f"splice strays {d:.3e} from the raw union, above 10 e^-R = {bound:.3e}")


def _check_untwisted_identity(curve, P, Q, cfg, core_slice, sigma_core):
    from .geometry import point_to_segments_distance

    segs_a, segs_b = _raw_segments(P, Q)
    far = sigma_core > cfg.twist_window
    pts = curve.vertices[core_slice][far]
    if len(pts):
        d = point_to_segments_distance(pts, segs_a, segs_b).max()
        if d > 1e-9:
            raise ConstructionError(
                f"curve deviates {d:.3e} from the raw union outside the twist window")


# -- barriers ---------------------------------------------------------------------

_OVAL_IN_YZ = RigidMotion(np.array([[0.0, 0.0, -1.0],
                                    [0.0, 1.0, 0.0],
                                    [1.0, 0.0, 0.0]]), np.zeros(3))


def _posed(rotation, translation, time_offset, label):
    return BarrierCylinder(RigidMotion(rotation, np.asarray(translation, float)),
                           time_offset, label)


def place_barriers(R, variant="corner", curve=None):
    """Angenent cylinders A_{t-R} enclosing the splice.

    corner: six cylinders around the junction; one threaded inside each
    hook's lobe (axis perpendicular to the host plane) and four outside, so
    that each leg of the curve is pinched between two cylinder walls and
    every corner point sits in an intersection of two orthogonal slabs.  The
    outermost pair in each plane has its walls at the legs' midline
    +-(pi/2 + d_S(-R)).

    tip: four cylinders recentered at the two tips for the thin-slab
    confinement of the region pieces.

    When `curve` is supplied, every returned cylinder is checked for
    positive initial clearance; offenders are reported by label.
    """
    if R <= 1:
        raise ConstructionError(f"barriers need R > 1, got R={R}")
    x_R = splice_scale(R)
    eR = math.exp(-R)
    d_s = math.asin(eR)                    # slab_distance(-R)
    half_w = x_R                           # oval x-halfwidth at its waist
    m_x = -(math.pi / 2.0 + x_R) / 2.0     # xy-hook legs midline
    m_z = +(math.pi / 2.0 + x_R) / 2.0     # yz-hook legs midline
    I3 = np.eye(3)

    if variant == "corner":
        barriers = [
            _posed(I3, (m_x, -1.0, 0.0), -R, "threaded_xy"),
            _posed(_OVAL_IN_YZ.rotation, (0.0, 1.0, m_z), -R, "threaded_yz"),
            _posed(I3, (2.0 * eR + half_w, 0.0, 0.0), -R, "outer_x+"),
            _posed(I3, (-(math.pi / 2.0 + x_R) - d_s - half_w, 0.0, 0.0), -R, "outer_x-"),
            _posed(_OVAL_IN_YZ.rotation, (0.0, 0.0, m_z - math.pi), -R, "outer_z-"),
            _posed(_OVAL_IN_YZ.rotation, (0.0, 0.0, m_z + math.pi), -R, "outer_z+"),
        ]
    elif variant == "tip":
        # The oval must fit between one hook's plane and the other hook's far
        # leg (gap pi - d_S, oval width pi - 2 d_S): half the slack per side.
        off = half_w + 0.5 * d_s
        barriers = [
            _posed(_OVAL_IN_YZ.rotation, (0.0, R, +off), -R, "tip_xy_z+"),
            _posed(_OVAL_IN_YZ.rotation, (0.0, R, -off), -R, "tip_xy_z-"),
            _posed(I3, (+off, -R, 0.0), -R, "tip_yz_x+"),
            _posed(I3, (-off, -R, 0.0), -R, "tip_yz_x-"),
        ]
    else:
        raise ConstructionError(f"unknown barrier variant {variant!r}")

    if curve is not None:
        clearances = barrier_clearances(curve, barriers, 0.0)
        bad = {k: v for k, v in clearances.items() if v <= 0.0}
        if bad:
            detail = ", ".join(f"{k}={v:.3e}" for k, v in bad.items())
            raise ConstructionError(f"nonpositive initial barrier clearance: {detail}")
    return barriers

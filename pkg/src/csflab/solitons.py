"""Closed-form curve shortening solitons: grim reapers and Angenent ovals.

These serve three roles: initial data for flow runs, regression oracles
(the flow must track them), and moving barriers (Angenent cylinders, the
products of ovals with a line).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .geometry import GeometryError, SpaceCurve, compute_frenet, resample_spline


class SolitonError(ValueError):
    """Invalid soliton parameters (degenerate time, bad range, expired barrier)."""


@dataclass(frozen=True)
class RigidMotion:
    """Rotation + translation of 3-space."""

    rotation: np.ndarray = field(default_factory=lambda: np.eye(3))
    translation: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        R = np.asarray(self.rotation, dtype=float).reshape(3, 3)
        tr = np.asarray(self.translation, dtype=float).reshape(3)
        if abs(np.linalg.det(R) - 1.0) > 1e-9 or np.abs(R @ R.T - np.eye(3)).max() > 1e-9:
            raise SolitonError("pose rotation must be a proper orthogonal matrix")
        object.__setattr__(self, "rotation", R)
        object.__setattr__(self, "translation", tr)

    def apply(self, points):
        return np.atleast_2d(points) @ self.rotation.T + self.translation

    def pull_back(self, points):
        return (np.atleast_2d(points) - self.translation) @ self.rotation


@dataclass(frozen=True)
class ReaperSpec:
    """Grim reaper of width lam*pi and speed 1/lam, posed in 3-space at time t.

    Model frame: the graph y = lam*ln cos(x/lam) - t/lam in the z=0 plane.
    lam=1, t=0 is the unit reaper through the origin.
    """

    lam: float = 1.0
    pose: RigidMotion = field(default_factory=RigidMotion)
    t: float = 0.0

    def __post_init__(self):
        if self.lam <= 0:
            raise SolitonError(f"reaper scale must be positive, got {self.lam}")


def reaper_height(x, lam=1.0, t=0.0):
    """Model-frame height of the reaper graph."""
    x = np.asarray(x, dtype=float)
    return lam * np.log(np.cos(x / lam)) - t / lam


def sample_grim_reaper(spec, x_range, n):
    """Sample the posed reaper over x_range with equal arclength spacing.

    The unit reaper's arclength from the tip is s(x) = asinh(tan x), with
    inverse x = atan(sinh s); nodes are placed uniformly in s so the result
    feeds compute_frenet directly.
    """
    if n < 4:
        raise SolitonError(f"need n >= 4 sample points, got {n}")
    lo, hi = float(x_range[0]), float(x_range[1])
    half = spec.lam * np.pi / 2.0
    if not (-half < lo < hi < half):
        raise SolitonError(
            f"x_range ({lo}, {hi}) must lie strictly inside (-{half:.6g}, {half:.6g})")
    s_lo = np.arcsinh(np.tan(lo / spec.lam))
    s_hi = np.arcsinh(np.tan(hi / spec.lam))
    s = np.linspace(s_lo, s_hi, n)
    xi = np.arctan(np.sinh(s))
    x = spec.lam * xi
    y = reaper_height(x, spec.lam, spec.t)
    pts = np.column_stack([x, y, np.zeros(n)])
    return SpaceCurve(spec.pose.apply(pts), "open", validate=False)


# -- Angenent ovals -------------------------------------------------------------

def oval_half_extents(t):
    """(x halfwidth, y halfheight) of the oval {cos x = e^t cosh y} at t < 0."""
    if t >= 0:
        raise SolitonError(f"the oval exists for t < 0 only, got t={t}")
    et = np.exp(t)
    return float(np.arccos(et)), float(np.arccosh(1.0 / et))


def sample_angenent_oval(t, n):
    """Closed planar oval {cos x = e^t cosh y} sampled at n vertices (n even).

    The y-parameterization is cosine-spaced to resolve the high-curvature
    tips at (0, +-arccosh(e^-t)); the result is symmetric under x -> -x and
    y -> -y.
    """
    if t >= 0:
        raise SolitonError(f"the oval exists for t < 0 only, got t={t}")
    if n < 8 or n % 2:
        raise SolitonError(f"need even n >= 8, got {n}")
    _, y_max = oval_half_extents(t)
    m = n // 2
    theta = np.linspace(np.pi, 0.0, m + 1)
    y_right = y_max * np.cos(theta)          # -y_max .. +y_max, tip-clustered
    arg = np.clip(np.exp(t) * np.cosh(y_right), -1.0, 1.0)
    x_right = np.arccos(arg)
    x_right[0] = 0.0
    x_right[-1] = 0.0
    right = np.column_stack([x_right, y_right, np.zeros(m + 1)])
    left = right[1:-1][::-1].copy()
    left[:, 0] *= -1.0
    pts = np.vstack([right, left])
    return SpaceCurve(pts, "closed", validate=False)


def slab_distance(t):
    """Gap between the oval at time t and the slab walls x = +-pi/2.

    Equals pi/2 - arccos(e^t); always below 2 e^t.
    """
    if t >= 0:
        raise SolitonError(f"slab distance defined for t < 0 only, got t={t}")
    d = np.pi / 2.0 - np.arccos(np.exp(t))
    assert d < 2.0 * np.exp(t), "oval slab gap exceeded its analytic bound"
    return float(d)


def _oval_planar_distance(qx, qy, t, iters=90, grid=257):
    """Unsigned planar distance from points (qx, qy) to the oval at time t.

    Symmetry reduces to the first-quadrant quarter x = F(y), y in [0, y_max];
    a cosine grid brackets the minimum and golden-section refines it.
    Vectorized over query points.
    """
    qx = np.abs(np.atleast_1d(np.asarray(qx, dtype=float)))
    qy = np.abs(np.atleast_1d(np.asarray(qy, dtype=float)))
    et = np.exp(t)
    _, y_max = oval_half_extents(t)

    def fx(y):
        return np.arccos(np.clip(et * np.cosh(y), -1.0, 1.0))

    yg = y_max * np.sin(np.linspace(0.0, np.pi / 2.0, grid))
    xg = fx(yg)
    d2 = (xg[None, :] - qx[:, None]) ** 2 + (yg[None, :] - qy[:, None]) ** 2
    i = np.argmin(d2, axis=1)
    lo = yg[np.maximum(i - 1, 0)]
    hi = yg[np.minimum(i + 1, grid - 1)]

    invphi = (np.sqrt(5.0) - 1.0) / 2.0
    a, b = lo.copy(), hi.copy()

    def d2_at(y):
        return (fx(y) - qx) ** 2 + (y - qy) ** 2

    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = d2_at(c), d2_at(d)
    for _ in range(iters):
        take_c = fc < fd
        b = np.where(take_c, d, b)
        a = np.where(take_c, a, c)
        c = b - invphi * (b - a)
        d = a + invphi * (b - a)
        fc, fd = d2_at(c), d2_at(d)
    ybest = 0.5 * (a + b)
    return np.sqrt(d2_at(ybest))


def oval_signed_distance(points_xy, t):
    """Signed planar distance to the oval: positive outside, negative inside."""
    p = np.atleast_2d(np.asarray(points_xy, dtype=float))
    dist = _oval_planar_distance(p[:, 0], p[:, 1], t)
    inside = (np.abs(p[:, 0]) < np.pi / 2.0) & (
        np.cos(p[:, 0]) - np.exp(t) * np.cosh(p[:, 1]) > 0.0)
    return np.where(inside, -dist, dist)


# -- Angenent cylinders (barriers) ----------------------------------------------

@dataclass(frozen=True)
class BarrierCylinder:
    """Angenent cylinder: the model oval (xy-plane, axis e_z) posed in 3-space.

    At simulation time t the cross-section is the oval at t + time_offset,
    valid while t + time_offset < 0.  An optional label names the cylinder in
    reports.
    """

    pose: RigidMotion
    time_offset: float
    label: str = ""

    def oval_time(self, t):
        te = t + self.time_offset
        if te >= 0:
            raise SolitonError(
                f"barrier {self.label or '?'} expired: t + offset = {te:.6g} >= 0")
        return te


def cylinder_clearance(p, barrier, t):
    """Signed distance from point(s) p to the cylinder surface at time t.

    Positive outside, negative inside.  The axis direction is projected out
    in the barrier frame and the planar distance to the oval is root-solved
    on its graph representation.
    """
    te = barrier.oval_time(t)
    q = barrier.pose.pull_back(p)
    d = oval_signed_distance(q[:, :2], te)
    return d if d.size > 1 else float(d[0])


# -- soliton residual (regression oracle) ----------------------------------------

def _oval_equal_arc(t, n):
    """Oval sampled at equal arclength with every vertex on the curve.

    A dense quarter supplies the arclength table; resampled y values are
    interpolated but x is re-evaluated from the implicit equation, so
    vertices sit on the oval to machine precision (needed for clean residual
    convergence).  Midpoint-staggered targets keep the spacing uniform
    across the waist and tip symmetry points.  Requires n divisible by 4.
    """
    if n % 4:
        raise SolitonError(f"need n divisible by 4, got {n}")
    et = np.exp(t)
    _, y_max = oval_half_extents(t)
    yd = y_max * np.sin(np.linspace(0.0, np.pi / 2.0, 40 * n))
    xd = np.arccos(np.clip(et * np.cosh(yd), -1.0, 1.0))
    seg = np.hypot(np.diff(xd), np.diff(yd))
    s = np.concatenate([[0.0], np.cumsum(seg)])
    K = n // 4
    targets = s[-1] * (np.arange(K) + 0.5) / K
    yq = np.interp(targets, s, yd)
    xq = np.arccos(np.clip(et * np.cosh(yq), -1.0, 1.0))
    x = np.concatenate([xq, -xq[::-1], -xq, xq[::-1]])
    y = np.concatenate([yq, yq[::-1], -yq, -yq[::-1]])
    pts = np.column_stack([x, y, np.zeros_like(x)])
    return SpaceCurve(pts, "closed", validate=False)


def _reaper_point_distance(px, py, t):
    """Exact distance from one planar point to the unit reaper at time t."""
    def g(x):
        yp = -np.tan(x)
        return (x - px) + (np.log(np.cos(x)) - t - py) * yp

    lim = np.pi / 2.0 - 1e-9
    lo = max(px - 0.2, -lim)
    hi = min(px + 0.2, lim)
    glo, ghi = g(lo), g(hi)
    if glo * ghi > 0:
        # widen once; the foot is always near px for small displacements
        lo = max(px - 0.6, -lim)
        hi = min(px + 0.6, lim)
        glo, ghi = g(lo), g(hi)
    x0 = brentq(g, lo, hi, xtol=1e-14) if glo * ghi <= 0 else px
    return float(np.hypot(x0 - px, np.log(np.cos(x0)) - t - py))


def verify_soliton_residual(kind, t, n, dt=1e-4, x_half=1.2):
    """Compare one explicit normal-motion step against the analytic solution.

    Samples the soliton at time t, moves each vertex by dt times its discrete
    curvature vector, and measures the exact distance of the moved points to
    the analytic curve at t + dt.  Returns the max residual relative to
    kappa*dt; second-order in mesh size plus O(dt).
    """
    if kind == "reaper":
        spec = ReaperSpec(lam=1.0, t=t)
        curve = sample_grim_reaper(spec, (-x_half, x_half), n)
        fr = compute_frenet(curve)
        moved = curve.vertices + dt * fr.curvature_vec
        dist = np.array([_reaper_point_distance(px, py, t + dt)
                         for px, py, _ in moved])
    elif kind == "oval":
        if t + dt >= 0:
            raise SolitonError("oval must remain in t < 0 over the probe step")
        curve = _oval_equal_arc(t, n)
        fr = compute_frenet(curve)
        moved = curve.vertices + dt * fr.curvature_vec
        dist = _oval_planar_distance(moved[:, 0], moved[:, 1], t + dt)
    else:
        raise SolitonError(f"unknown soliton kind {kind!r}")
    return float(np.max(dist / (dt * np.maximum(fr.kappa, 1e-12))))

"""Lemma-level diagnostics for flow runs.

Every quantitative property the spliced-reaper construction rests on has a
monitor here: ramp and curvature-ratio tracking, barrier clearances, region
areas with the Gauss-Bonnet decay inequality, interior-angle excesses, the
two-slab small-angle bound, and the nonplanarity / asymptote-line geometry
report.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field

import numpy as np

from .geometry import (
    SpaceCurve,
    Slab,
    best_fit_plane,
    compute_frenet,
    discrete_kappa_max,
    point_to_segments_distance,
    slab_margin,
)
from .solitons import cylinder_clearance

# Default ramp direction: the diagonal of the two reaper planes.
RAMP_DIRECTION = np.array([np.sqrt(2.0) / 2.0, 0.0, np.sqrt(2.0) / 2.0])


class MonitorError(ValueError):
    """A monitor's precondition failed; the diagnostic does not apply."""


# -- time series --------------------------------------------------------------

class MonitorReport:
    """Rectangular time series: fixed column order, strictly increasing t."""

    def __init__(self, columns=None, rows=None):
        self.columns = list(columns) if columns else []
        self.rows = [list(map(float, r)) for r in rows] if rows else []

    def __len__(self):
        return len(self.rows)

    def append(self, row_dict):
        if not self.columns:
            self.columns = list(row_dict.keys())
            if "t" not in self.columns:
                raise MonitorError("monitor rows must carry a time column 't'")
        if set(row_dict.keys()) != set(self.columns):
            missing = set(self.columns) ^ set(row_dict.keys())
            raise MonitorError(f"row columns changed mid-series: {sorted(missing)}")
        if self.rows and row_dict["t"] <= self.rows[-1][self.columns.index("t")]:
            raise MonitorError("monitor time must be strictly increasing")
        self.rows.append([float(row_dict[c]) for c in self.columns])

    def column(self, name):
        j = self.columns.index(name)
        return np.array([r[j] for r in self.rows])

    def to_csv(self, path_or_stream):
        own = isinstance(path_or_stream, (str, bytes)) or hasattr(path_or_stream, "__fspath__")
        stream = open(path_or_stream, "w") if own else path_or_stream
        try:
            stream.write(",".join(self.columns) + "\n")
            for r in self.rows:
                stream.write(",".join(f"{x:.17g}" for x in r) + "\n")
        finally:
            if own:
                stream.close()

    @classmethod
    def from_csv(cls, path_or_stream):
        own = isinstance(path_or_stream, (str, bytes)) or hasattr(path_or_stream, "__fspath__")
        stream = open(path_or_stream) if own else path_or_stream
        try:
            header = stream.readline().strip()
            columns = header.split(",")
            rows = []
            for line in stream:
                line = line.strip()
                if line:
                    rows.append([float(x) for x in line.split(",")])
        finally:
            if own:
                stream.close()
        return cls(columns, rows)

    def to_csv_bytes(self):
        buf = io.StringIO()
        self.to_csv(buf)
        return buf.getvalue()


# -- ramp diagnostics -----------------------------------------------------------

@dataclass(frozen=True)
class RampDiagnostics:
    """Extremes of <T,V> and kappa/<T,V> over a curve."""

    direction: np.ndarray
    min_te: float
    ratio_max: float

    def __post_init__(self):
        d = np.asarray(self.direction, dtype=float).reshape(3)
        if abs(np.linalg.norm(d) - 1.0) > 1e-9:
            raise MonitorError("ramp direction must be a unit vector")
        object.__setattr__(self, "direction", d)


def ramp_diagnostics(curve, V, guard=1e-9):
    """Min <T,V> and max kappa/<T,V> over the vertices.

    Vertices with <T,V> below `guard` make the ratio +inf (and fail a run);
    the guard is configurable because deep reaper tails carry analytically
    positive but exponentially small <T,V>.
    """
    V = np.asarray(V, dtype=float).reshape(3)
    V = V / np.linalg.norm(V)
    fr = compute_frenet(curve)
    te = fr.tangent @ V
    min_te = float(te.min())
    if np.any(te < guard):
        ratio_max = np.inf
    else:
        ratio_max = float((fr.kappa / te).max())
    return RampDiagnostics(V, min_te, ratio_max)


# -- region areas and the decay inequality ----------------------------------------

@dataclass(frozen=True)
class RegionSpec:
    """Selects one compact piece of the curve cut by the plane {y = 0}.

    half: "y>0" or "y<0".  drop_axis: coordinate projected out to form the
    reference plane (2 projects to xy, 0 to yz).  slab_width: the compact
    piece must stay within this total width of its reference plane for the
    projected area to be trusted.
    """

    half: str
    drop_axis: int
    slab_width: float = 0.2

    def __post_init__(self):
        if self.half not in ("y>0", "y<0"):
            raise MonitorError(f"half must be 'y>0' or 'y<0', got {self.half!r}")
        if self.drop_axis not in (0, 2):
            raise MonitorError("drop_axis must be 0 (yz plane) or 2 (xy plane)")


@dataclass
class AreaReport:
    """Area of one region at one time, with corner excesses."""

    t: float
    area: float
    slope: float            # filled by series-level analysis; nan per snapshot
    excess_start: float     # interior angle minus pi at the first corner
    excess_end: float
    trusted: bool


def _compact_pieces(curve, half):
    """Crossing-bounded maximal runs of one sign of y.

    Returns a list of (start_point, vertex_block, end_point) where the two
    points are linear interpolations of the y=0 crossings.
    """
    v = curve.vertices
    y = v[:, 1]
    sign = np.where(y >= 0.0, 1, -1)
    want = 1 if half == "y>0" else -1
    n = len(v)
    idx = np.arange(n) if not curve.closed else np.arange(n + 1)
    if curve.closed:
        sgn = np.concatenate([sign, sign[:1]])
        pts = np.vstack([v, v[:1]])
    else:
        sgn = sign
        pts = v
    cross = np.nonzero(sgn[:-1] != sgn[1:])[0]

    def cross_point(k):
        y0, y1 = pts[k, 1], pts[k + 1, 1]
        lam = y0 / (y0 - y1)
        return pts[k] + lam * (pts[k + 1] - pts[k])

    pieces = []
    if curve.closed:
        if len(cross) < 2:
            return pieces
        for a, b in zip(cross, np.roll(cross, -1)):
            first = (a + 1) % n
            last = b  # runs a+1 .. b inclusive (wrapping)
            if sign[first] != want:
                continue
            if first <= last:
                block = v[first:last + 1]
            else:
                block = np.vstack([v[first:], v[:last + 1]])
            pieces.append((cross_point(a), block, cross_point(b)))
    else:
        for i in range(len(cross) - 1):
            a, b = cross[i], cross[i + 1]
            if sign[a + 1] != want:
                continue
            pieces.append((cross_point(a), v[a + 1:b + 1], cross_point(b)))
    return pieces


def count_plane_crossings(curve):
    """Transversal crossings of {y = 0} along the polyline."""
    y = curve.vertices[:, 1]
    sgn = np.where(y >= 0.0, 1, -1)
    if curve.closed:
        sgn = np.concatenate([sgn, sgn[:1]])
    return int(np.count_nonzero(sgn[:-1] != sgn[1:]))


def _polygon_area_and_corner_excess(poly2d):
    """Shoelace area of the closed polygon and interior-angle excesses.

    poly2d rows: [corner A, piece vertices..., corner B]; the closing edge is
    the chord B -> A.  Returns (area, excess_at_A, excess_at_B).
    """
    p = np.asarray(poly2d, dtype=float)
    x, y = p[:, 0], p[:, 1]
    signed = 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))
    idx_a, idx_b = 0, len(p) - 1
    if signed < 0:
        p = p[::-1]
        idx_a, idx_b = len(p) - 1, 0

    def interior_excess(i):
        prev = p[(i - 1) % len(p)]
        nxt = p[(i + 1) % len(p)]
        u = p[i] - prev
        w = nxt - p[i]
        turn = np.arctan2(u[0] * w[1] - u[1] * w[0], u[0] * w[0] + u[1] * w[1])
        return float(-turn)  # interior = pi - turn, excess = interior - pi

    return abs(signed), interior_excess(idx_a), interior_excess(idx_b)


def region_area(curve, spec, t=float("nan")):
    """Projected area of the compact piece selected by spec, plus corner data.

    The piece is closed by the chord between its two y=0 crossings; the area
    is the shoelace area of its projection onto the reference plane.  If the
    piece leaves the slab of width spec.slab_width about that plane the
    report is flagged untrusted (the projection no longer approximates the
    minimal disk).
    """
    pieces = _compact_pieces(curve, spec.half)
    if len(pieces) == 0:
        raise MonitorError(f"no compact {spec.half} piece bounded by y=0 crossings")
    if len(pieces) > 1:
        raise MonitorError(
            f"expected one compact {spec.half} piece, found {len(pieces)}")
    start, block, end = pieces[0]
    chain = np.vstack([start, block, end])
    off = np.abs(chain[:, spec.drop_axis])
    trusted = bool(off.max() <= spec.slab_width / 2.0)
    keep = [j for j in range(3) if j != spec.drop_axis]
    poly = chain[:, keep]
    area, exc_a, exc_b = _polygon_area_and_corner_excess(poly)
    return AreaReport(t=t, area=area, slope=float("nan"),
                      excess_start=exc_a, excess_end=exc_b, trusted=trusted)


def area_slopes(times, areas):
    """Centered-difference dA/dt; nan at the boundary rows."""
    times = np.asarray(times, dtype=float)
    areas = np.asarray(areas, dtype=float)
    slopes = np.full_like(areas, np.nan)
    if len(times) >= 3:
        slopes[1:-1] = (areas[2:] - areas[:-2]) / (times[2:] - times[:-2])
    return slopes


def check_area_inequality(reports, R, tol_slope=0.2, tol_angle=0.05):
    """Violations of dA/dt <= -pi + eps(t) with eps(t) = 2 e^{-(R-t)/2}.

    Also flags slopes below -pi - tol_slope (the two-sided calibration check
    that the slope measurement is sane) and corner excesses beyond
    eps(t) + tol_angle.  Untrusted rows are skipped.  Returns a list of
    violation dicts.
    """
    reports = list(reports)
    if len(reports) < 3:
        raise MonitorError("need at least 3 rows to estimate slopes")
    times = np.array([r.t for r in reports])
    areas = np.array([r.area for r in reports])
    trusted = np.array([r.trusted for r in reports])
    slopes = area_slopes(times, areas)
    violations = []
    for i, rep in enumerate(reports):
        if not trusted[i]:
            continue
        eps_t = 2.0 * np.exp(-(R - times[i]) / 2.0)
        for which, exc in (("start", rep.excess_start), ("end", rep.excess_end)):
            if exc > eps_t + tol_angle:
                violations.append({"index": i, "t": times[i], "kind": f"corner_{which}",
                                   "value": exc, "bound": eps_t + tol_angle})
        if i == 0 or i == len(reports) - 1 or not (trusted[i - 1] and trusted[i + 1]):
            continue
        upper = -np.pi + eps_t + tol_slope
        if slopes[i] > upper:
            violations.append({"index": i, "t": times[i], "kind": "slope_upper",
                               "value": slopes[i], "bound": upper})
        if slopes[i] < -np.pi - tol_slope:
            violations.append({"index": i, "t": times[i], "kind": "slope_lower",
                               "value": slopes[i], "bound": -np.pi - tol_slope})
    return violations


# -- barrier clearance -------------------------------------------------------------

def barrier_clearances(curve, barriers, t):
    """Min signed clearance per barrier, as {label: clearance}."""
    out = {}
    for i, b in enumerate(barriers):
        c = cylinder_clearance(curve.vertices, b, t)
        out[b.label or f"barrier{i}"] = float(np.min(c))
    return out


def barrier_clearance(curve, barriers, t):
    """Min signed clearance over vertices x barriers; nonpositive is a hard violation."""
    if not barriers:
        raise MonitorError("no barriers supplied")
    return min(barrier_clearances(curve, barriers, t).values())


# -- two-slab small-angle bound ------------------------------------------------------

def small_angle_check(curve, eps, v):
    """True iff |<T, v>| < 3 sqrt(eps) away from the open ends.

    Preconditions (raised as MonitorError when violated, since the bound
    does not apply): v is a unit vector perpendicular to e_2; the discrete
    curvature is at most 1; the curve lies in both orthogonal slabs
    {|x| <= eps/2} and {|z| <= eps/2}.  Vertices within sqrt(eps) arclength
    of an open end are excluded: the bound's integration argument needs that
    much room along the curve.
    """
    v = np.asarray(v, dtype=float).reshape(3)
    nv = np.linalg.norm(v)
    if abs(nv - 1.0) > 1e-9:
        raise MonitorError(f"|v| = {nv:.6g} is not a unit vector")
    if abs(v[1]) > 1e-9:
        raise MonitorError("v must be perpendicular to e_2")
    kap = discrete_kappa_max(curve)
    if kap > 1.0 + 1e-9:
        raise MonitorError(f"discrete curvature {kap:.3f} > 1; rescale before calling")
    for normal in ((1.0, 0.0, 0.0), (0.0, 0.0, 1.0)):
        if slab_margin(curve, Slab(np.array(normal), 0.0, eps)) < 0:
            raise MonitorError("curve leaves the width-eps slab intersection")
    fr = compute_frenet(curve)
    te = np.abs(fr.tangent @ v)
    if not curve.closed:
        s = curve.arclengths()
        margin = np.sqrt(eps)
        inner = (s >= margin) & (s <= s[-1] - margin)
        if not np.any(inner):
            raise MonitorError("curve shorter than the 2 sqrt(eps) interior window")
        te = te[inner]
    return bool(te.max() < 3.0 * np.sqrt(eps))


# -- geometry report ------------------------------------------------------------------

def asymptote_lines(R):
    """The three asymptote lines of the unflared splice, as (point, direction).

    All are parallel to e_2; their (x, z) positions are
    (-pi/2 - x_R, 0), (0, 0), (0, pi/2 + x_R) with x_R = arccos(e^-R).
    """
    x_R = float(np.arccos(np.exp(-R)))
    d = np.array([0.0, 1.0, 0.0])
    return [
        (np.array([-np.pi / 2.0 - x_R, 0.0, 0.0]), d),
        (np.array([0.0, 0.0, 0.0]), d),
        (np.array([0.0, 0.0, np.pi / 2.0 + x_R]), d),
    ]


def line_pairwise_distances(R):
    """Pairwise distances of the three asymptote lines: (w, w, sqrt(2) w)."""
    w = np.pi / 2.0 + float(np.arccos(np.exp(-R)))
    return np.array([w, w, np.sqrt(2.0) * w])


@dataclass
class GeometryReport:
    """Ball-restricted nonplanarity and asymptote geometry."""

    nonplanarity: float
    line_deviation: float
    tip_high: np.ndarray       # extremal +y point of the {y>0} lobe
    tip_low: np.ndarray        # extremal -y point of the {y<0} lobe
    crossing_count: int        # transversal crossings of the ball boundary
    empty: bool = False


def geometry_report(curve, R, report_radius):
    """Restrict to the ball B(0, report_radius) and measure the claims.

    Reports the max deviation from the best-fit plane, the symmetric
    Hausdorff distance to the three asymptote lines (clipped to the ball),
    the two tip positions, and how often the curve crosses the ball
    boundary.
    """
    if report_radius <= 0:
        raise MonitorError("report radius must be positive")
    v = curve.vertices
    r = np.linalg.norm(v, axis=1)
    inside = r <= report_radius
    sgn = np.where(r <= report_radius, 1, -1)
    if curve.closed:
        sgn = np.concatenate([sgn, sgn[:1]])
    crossings = int(np.count_nonzero(sgn[:-1] != sgn[1:]))
    if not np.any(inside):
        return GeometryReport(float("nan"), float("nan"),
                              np.full(3, np.nan), np.full(3, np.nan),
                              crossings, empty=True)
    pts = v[inside]
    npl = float("nan")
    if len(pts) >= 4:
        c, nrm = best_fit_plane(pts)
        npl = float(np.abs((pts - c) @ nrm).max())

    # Hausdorff distance to the union of the three lines, both clipped to the ball.
    seg_a, seg_b, samples = [], [], []
    for p0, d in asymptote_lines(R):
        perp2 = float(np.dot(p0, p0) - np.dot(p0, d) ** 2)
        if perp2 > report_radius ** 2:
            continue
        half = np.sqrt(report_radius ** 2 - perp2)
        mid = p0 - np.dot(p0, d) * d
        seg_a.append(mid - half * d)
        seg_b.append(mid + half * d)
        ts = np.linspace(-half, half, 200)
        samples.append(mid[None, :] + ts[:, None] * d[None, :])
    d_curve_to_lines = point_to_segments_distance(
        pts, np.array(seg_a), np.array(seg_b)).max()
    line_pts = np.vstack(samples)
    if curve.closed:
        ca, cb = v, np.roll(v, -1, axis=0)
    else:
        ca, cb = v[:-1], v[1:]
    d_lines_to_curve = point_to_segments_distance(line_pts, ca, cb).max()
    deviation = float(max(d_curve_to_lines, d_lines_to_curve))

    # Lobe tips: extremal-y points of the compact pieces cut by {y = 0}.
    tip_high = np.full(3, np.nan)
    tip_low = np.full(3, np.nan)
    up = _compact_pieces(curve, "y>0")
    if up:
        block = max(up, key=lambda p: p[1][:, 1].max())[1]
        tip_high = block[np.argmax(block[:, 1])].copy()
    down = _compact_pieces(curve, "y<0")
    if down:
        block = min(down, key=lambda p: p[1][:, 1].min())[1]
        tip_low = block[np.argmin(block[:, 1])].copy()
    return GeometryReport(npl, deviation, tip_high, tip_low, crossings)

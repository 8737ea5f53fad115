"""Discrete space curves and their differential-geometric measurements.

A curve is an ordered polyline in R^3, open or closed.  All operations are
pure functions of immutable inputs; curves are copied on construction and
never mutated in place.
"""

from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import CubicSpline

# Tolerances shared across the geometric predicates.
SELF_INTERSECT_TOL = 1e-9
END_ALIGN_TOL = 1e-6  # rad, clamped end edges vs. declared direction


class GeometryError(ValueError):
    """Raised when a curve violates a construction invariant."""


@dataclass(frozen=True)
class EndLine:
    """Line constraint for one end of an open curve.

    mode "clamp": the end edge is collinear with `direction` (checked at
    construction), the end vertex stays put on the line, and the flow keeps
    the end tangent exactly along the line.
    mode "translate": the end vertex moves along the line at the prescribed
    signed `speed` (exact boundary data for soliton regression windows); the
    end tangent is free.
    """

    point: np.ndarray
    direction: np.ndarray
    mode: str = "clamp"
    speed: float = 0.0

    def __post_init__(self):
        p = np.asarray(self.point, dtype=float).reshape(3)
        d = np.asarray(self.direction, dtype=float).reshape(3)
        nd = np.linalg.norm(d)
        if nd < 1e-12:
            raise GeometryError("end line direction must be nonzero")
        object.__setattr__(self, "point", p)
        object.__setattr__(self, "direction", d / nd)
        if self.mode not in ("clamp", "translate"):
            raise GeometryError(f"unknown end line mode {self.mode!r}")

    def distance(self, q):
        """Distance from point(s) q to the infinite line."""
        q = np.atleast_2d(np.asarray(q, dtype=float))
        rel = q - self.point
        along = rel @ self.direction
        perp = rel - np.outer(along, self.direction)
        d = np.linalg.norm(perp, axis=1)
        return d if d.size > 1 else float(d[0])

    def project(self, q):
        """Orthogonal projection of a single point onto the line."""
        q = np.asarray(q, dtype=float)
        return self.point + np.dot(q - self.point, self.direction) * self.direction


class SpaceCurve:
    """Ordered polyline in 3-space with open or closed topology.

    Closed curves do not repeat the first vertex.  Open curves may carry an
    :class:`EndLine` per end (``end_conditions=(start, end)``, entries may be
    None).  Construction validates vertex count, distinctness, optional
    self-intersection, and clamped-end collinearity.
    """

    def __init__(self, vertices, topology="open", end_conditions=None,
                 validate=True, check_self_intersection=None):
        v = np.array(vertices, dtype=float)
        if v.ndim != 2 or v.shape[1] != 3:
            raise GeometryError("vertices must be an (n, 3) array")
        self.vertices = v
        if topology not in ("open", "closed"):
            raise GeometryError(f"unknown topology {topology!r}")
        self.topology = topology
        if end_conditions is None:
            end_conditions = (None, None)
        if topology == "closed" and any(ec is not None for ec in end_conditions):
            raise GeometryError("closed curves take no end conditions")
        self.end_conditions = tuple(end_conditions)
        if check_self_intersection is None:
            check_self_intersection = validate
        if validate:
            self._validate(check_self_intersection)

    # -- basic measurements ------------------------------------------------

    @property
    def n(self):
        return len(self.vertices)

    @property
    def closed(self):
        return self.topology == "closed"

    def edges(self):
        """Edge vectors, wrapping for closed curves."""
        v = self.vertices
        if self.closed:
            return np.roll(v, -1, axis=0) - v
        return v[1:] - v[:-1]

    def edge_lengths(self):
        return np.linalg.norm(self.edges(), axis=1)

    def total_length(self):
        return float(self.edge_lengths().sum())

    def arclengths(self):
        """Cumulative arclength per vertex, starting at 0."""
        h = self.edge_lengths()
        s = np.zeros(self.n)
        np.cumsum(h[: self.n - 1], out=s[1:])
        return s

    def copy(self):
        return SpaceCurve(self.vertices.copy(), self.topology,
                          self.end_conditions, validate=False)

    # -- validation ---------------------------------------------------------

    def _validate(self, check_self_intersection):
        if self.n < 4:
            raise GeometryError(f"curve needs >= 4 vertices, got {self.n}")
        h = self.edge_lengths()
        if np.any(h < 1e-12):
            i = int(np.argmin(h))
            raise GeometryError(f"consecutive vertices {i},{i+1} coincide")
        for which, ec in zip(("start", "end"), self.end_conditions):
            if ec is None or ec.mode != "clamp":
                continue
            if which == "start":
                edge = self.vertices[1] - self.vertices[0]
            else:
                edge = self.vertices[-2] - self.vertices[-1]
            u = edge / np.linalg.norm(edge)
            ang = np.arccos(np.clip(abs(np.dot(u, ec.direction)), -1.0, 1.0))
            if ang > END_ALIGN_TOL:
                raise GeometryError(
                    f"clamped {which} edge misaligned by {ang:.2e} rad")
        if check_self_intersection and self.has_self_intersection():
            raise GeometryError("curve self-intersects at construction")

    def has_self_intersection(self, tol=SELF_INTERSECT_TOL):
        """True if two non-adjacent segments come within `tol`."""
        return min_nonadjacent_segment_distance(self) < tol


# -- segment distance machinery ---------------------------------------------

def _segment_starts_ends(curve):
    v = curve.vertices
    if curve.closed:
        return v, np.roll(v, -1, axis=0)
    return v[:-1], v[1:]


def point_to_segments_distance(points, seg_a, seg_b):
    """Min distance from each point to a common set of segments.

    points: (m,3); seg_a, seg_b: (k,3).  Returns (m,) of minima.  Chunked so
    the (m,k) pairwise table stays small.
    """
    points = np.atleast_2d(points)
    d = seg_b - seg_a                      # (k,3)
    dd = np.einsum("ij,ij->i", d, d)
    dd[dd == 0.0] = 1.0
    out = np.empty(len(points))
    chunk = max(1, int(4e6 / max(len(seg_a), 1)))
    for lo in range(0, len(points), chunk):
        p = points[lo:lo + chunk]          # (c,3)
        w = p[:, None, :] - seg_a[None, :, :]
        t = np.clip(np.einsum("ckj,kj->ck", w, d) / dd, 0.0, 1.0)
        closest = seg_a[None, :, :] + t[:, :, None] * d[None, :, :]
        dist = np.linalg.norm(p[:, None, :] - closest, axis=2)
        out[lo:lo + chunk] = dist.min(axis=1)
    return out


def _segment_pair_distance(a0, a1, b0, b1):
    """Distance between one segment (a0,a1) and many segments (b0,b1)."""
    # Eberly's clamped closest-point scheme, vectorized over the b-segments.
    d1 = a1 - a0
    d2 = b1 - b0                            # (k,3)
    r = a0 - b0                             # (k,3)
    a = float(np.dot(d1, d1))
    e = np.einsum("ij,ij->i", d2, d2)
    f = d2 @ r.T if d2.ndim == 1 else np.einsum("ij,ij->i", d2, r)
    c = r @ d1
    b = d2 @ d1
    denom = a * e - b * b
    s = np.where(denom > 1e-30, np.clip((b * f - c * e) / np.where(denom > 1e-30, denom, 1.0), 0.0, 1.0), 0.0)
    t = np.where(e > 1e-30, (b * s + f) / np.where(e > 1e-30, e, 1.0), 0.0)
    tc = np.clip(t, 0.0, 1.0)
    # re-clamp s for clamped t
    s = np.where(np.abs(tc - t) > 0, np.clip((b * tc - c) / (a if a > 1e-30 else 1.0), 0.0, 1.0), s)
    p1 = a0 + s[:, None] * d1
    p2 = b0 + tc[:, None] * d2
    return np.linalg.norm(p1 - p2, axis=1)


def min_nonadjacent_segment_distance(curve):
    """Minimum distance between non-adjacent segment pairs of one curve.

    Midpoint distances prefilter the O(n^2) pairs; only candidates closer
    than the sum of segment half-lengths get the exact treatment.
    """
    a, b = _segment_starts_ends(curve)
    k = len(a)
    if k < 3:
        return np.inf
    mid = 0.5 * (a + b)
    rad = 0.5 * np.linalg.norm(b - a, axis=1)
    best = np.inf
    block = 256
    for lo in range(0, k - 2, block):
        hi = min(lo + block, k - 2)
        rows = np.arange(lo, hi)
        # pairwise midpoint distances to all later segments
        d2 = np.linalg.norm(mid[rows, None, :] - mid[None, :, :], axis=2)
        reach = rad[rows, None] + rad[None, :] + min(best, 1.0)
        cand_i, cand_j = np.nonzero(d2 <= reach)
        cand_j_abs = cand_j
        cand_i_abs = rows[cand_i]
        keep = cand_j_abs >= cand_i_abs + 2
        if curve.closed:
            keep &= ~((cand_i_abs == 0) & (cand_j_abs == k - 1))
        cand_i_abs, cand_j_abs = cand_i_abs[keep], cand_j_abs[keep]
        for i in np.unique(cand_i_abs):
            js = cand_j_abs[cand_i_abs == i]
            d = _segment_pair_distance(a[i], b[i], a[js], b[js])
            m = float(d.min())
            if m < best:
                best = m
    return float(best)


# -- resampling ---------------------------------------------------------------

def _resample_pass(curve, n):
    s = curve.arclengths()
    L = curve.total_length()
    if L < 1e-12:
        raise GeometryError("cannot resample a degenerate curve of length 0")
    v = curve.vertices
    if curve.closed:
        svals = np.concatenate([s, [L]])
        pts = np.vstack([v, v[:1]])
        targets = L * np.arange(n) / n
    else:
        svals = s
        pts = v
        targets = np.linspace(0.0, L, n)
    out = np.column_stack([np.interp(targets, svals, pts[:, j]) for j in range(3)])
    if not curve.closed:
        out[0] = v[0]
        out[-1] = v[-1]
    return SpaceCurve(out, curve.topology, curve.end_conditions, validate=False)


def resample_by_arclength(curve, n):
    """Resample to n vertices at equal arclength spacing along the polyline.

    Open endpoints are preserved exactly; closed curves keep vertex 0 as the
    starting phase.  Placement is iterated to its fixed point (edge lengths
    equal to machine precision), which makes the operation idempotent at
    fixed n.
    """
    if n < 4:
        raise GeometryError(f"resample needs n >= 4, got {n}")
    out = _resample_pass(curve, n)
    scale = max(1.0, out.total_length())
    for _ in range(8):
        nxt = _resample_pass(out, n)
        moved = np.abs(nxt.vertices - out.vertices).max()
        out = nxt
        if moved < 1e-12 * scale:
            break
    return out


def resample_spline(curve, n):
    """Arclength resampling through a cubic spline of the vertices.

    Used by the flow engine: interpolating the vertices avoids the inward
    corner-cutting bias of chord resampling, which otherwise shrinks exact
    circles measurably over thousands of steps.
    """
    if n < 4:
        raise GeometryError(f"resample needs n >= 4, got {n}")
    s = curve.arclengths()
    L = curve.total_length()
    if L < 1e-12:
        raise GeometryError("cannot resample a degenerate curve of length 0")
    v = curve.vertices
    if curve.closed:
        svals = np.concatenate([s, [L]])
        pts = np.vstack([v, v[:1]])
        spl = CubicSpline(svals, pts, bc_type="periodic")
        targets = L * np.arange(n) / n
    else:
        spl = CubicSpline(s, v, bc_type="natural")
        targets = np.linspace(0.0, L, n)
    out = spl(targets)
    if not curve.closed:
        out[0] = v[0]
        out[-1] = v[-1]
    return SpaceCurve(out, curve.topology, curve.end_conditions, validate=False)


# -- Frenet data ---------------------------------------------------------------

@dataclass
class FrenetData:
    """Per-vertex tangent, curvature vector, scalar curvature and torsion."""

    tangent: np.ndarray          # (n,3), unit
    curvature_vec: np.ndarray    # (n,3), perpendicular to tangent
    kappa: np.ndarray            # (n,), >= 0
    torsion: np.ndarray          # (n,)
    total_length: float


# Below this curvature the Frenet frame is undefined; torsion is set to 0.
TORSION_KAPPA_FLOOR = 1e-6


def compute_frenet(curve):
    """Second-order discrete Frenet data on a near-uniform polyline.

    Requires max/min edge ratio <= 1.1 (resample first).  Tangents come from
    averaged edge directions, the curvature vector from the difference of
    consecutive unit edges (exactly perpendicular to the averaged tangent),
    and torsion from det(gamma', gamma'', gamma''')/kappa^2 with centered
    3/5-point stencils.  One-sided stencils at open ends.
    """
    if curve.n < 4:
        raise GeometryError("frenet data needs >= 4 vertices")
    h = curve.edge_lengths()
    ratio = h.max() / h.min()
    if ratio > 1.1 + 1e-9:
        raise GeometryError(
            f"edge ratio {ratio:.3f} > 1.1; resample before compute_frenet")
    v = curve.vertices
    n = curve.n
    e = curve.edges()
    u = e / h[:, None]

    if curve.closed:
        u_prev = np.roll(u, 1, axis=0)
        h_prev = np.roll(h, 1)
        T = u_prev + u
        T /= np.linalg.norm(T, axis=1)[:, None]
        K = 2.0 * (u - u_prev) / (h + h_prev)[:, None]
    else:
        T = np.empty_like(v)
        K = np.empty_like(v)
        T[1:-1] = u[:-1] + u[1:]
        T[0] = 1.5 * u[0] - 0.5 * u[1]
        T[-1] = 1.5 * u[-1] - 0.5 * u[-2]
        T /= np.linalg.norm(T, axis=1)[:, None]
        K[1:-1] = 2.0 * (u[1:] - u[:-1]) / (h[1:] + h[:-1])[:, None]
        h0 = h[:3].mean()
        h1 = h[-3:].mean()
        K[0] = (2.0 * v[0] - 5.0 * v[1] + 4.0 * v[2] - v[3]) / h0**2
        K[-1] = (2.0 * v[-1] - 5.0 * v[-2] + 4.0 * v[-3] - v[-4]) / h1**2

    # Curvature vector is normal by definition; remove the tangential residue
    # of the one-sided stencils.
    K -= np.einsum("ij,ij->i", K, T)[:, None] * T
    kappa = np.linalg.norm(K, axis=1)

    tau = _torsion(v, K, kappa, h, curve.closed)
    return FrenetData(T, K, kappa, tau, float(h.sum()))


def _torsion(v, K, kappa, h, closed):
    n = len(v)
    if closed:
        hbar = float(h.mean())
        d1 = (np.roll(v, -1, axis=0) - np.roll(v, 1, axis=0)) / (2.0 * hbar)
        d3 = (-np.roll(v, 2, axis=0) + 2.0 * np.roll(v, 1, axis=0)
              - 2.0 * np.roll(v, -1, axis=0) + np.roll(v, -2, axis=0)) / (2.0 * hbar**3)
        det = np.einsum("ij,ij->i", np.cross(d1, K), d3)
        tau = np.zeros(n)
        ok = kappa > TORSION_KAPPA_FLOOR
        tau[ok] = det[ok] / kappa[ok] ** 2
        return tau
    tau = np.zeros(n)
    if n >= 5:
        hbar = float(h.mean())
        idx = np.arange(2, n - 2)
        d1 = (v[idx + 1] - v[idx - 1]) / (2.0 * hbar)
        d3 = (-v[idx - 2] + 2.0 * v[idx - 1] - 2.0 * v[idx + 1] + v[idx + 2]) / (2.0 * hbar**3)
        det = np.einsum("ij,ij->i", np.cross(d1, K[idx]), d3)
        ok = kappa[idx] > TORSION_KAPPA_FLOOR
        inner = np.zeros(len(idx))
        inner[ok] = det[ok] / kappa[idx][ok] ** 2
        tau[idx] = inner
        tau[0] = tau[1] = tau[2]
        tau[-1] = tau[-2] = tau[-3]
    return tau


def discrete_kappa_max(curve):
    """Max discrete curvature from unit-edge differences; no mesh precondition."""
    h = curve.edge_lengths()
    u = curve.edges() / h[:, None]
    if curve.closed:
        du = u - np.roll(u, 1, axis=0)
        hh = h + np.roll(h, 1)
    else:
        du = u[1:] - u[:-1]
        hh = h[1:] + h[:-1]
    if len(du) == 0:
        return 0.0
    return float((2.0 * np.linalg.norm(du, axis=1) / hh).max())


# -- Hausdorff distance --------------------------------------------------------

def hausdorff_distance(a, b):
    """Symmetric Hausdorff distance between two polylines.

    Directed distances are vertex-to-segment in both directions, per the
    polyline convention.
    """
    if a.n == 0 or b.n == 0:
        raise GeometryError("hausdorff distance needs nonempty curves")
    sa0, sa1 = _segment_starts_ends(a)
    sb0, sb1 = _segment_starts_ends(b)
    d_ab = point_to_segments_distance(a.vertices, sb0, sb1).max()
    d_ba = point_to_segments_distance(b.vertices, sa0, sa1).max()
    return float(max(d_ab, d_ba))


def hausdorff_to_segments(points, seg_a, seg_b):
    """Directed max distance from a point set to a segment soup."""
    return float(point_to_segments_distance(points, seg_a, seg_b).max())


# -- planarity -----------------------------------------------------------------

def best_fit_plane(points):
    """Least-squares plane: returns (centroid, unit normal).

    The normal is the smallest-eigenvalue eigenvector of the second-moment
    (covariance) matrix of the points.
    """
    p = np.asarray(points, dtype=float)
    c = p.mean(axis=0)
    q = p - c
    cov = q.T @ q
    w, vec = np.linalg.eigh(cov)
    return c, vec[:, 0]


def nonplanarity(curve_or_points):
    """Max distance of the vertex set to its best-fit affine plane."""
    pts = curve_or_points.vertices if isinstance(curve_or_points, SpaceCurve) else np.asarray(curve_or_points, float)
    if len(pts) < 4:
        raise GeometryError("nonplanarity needs >= 4 vertices")
    c, nrm = best_fit_plane(pts)
    return float(np.abs((pts - c) @ nrm).max())


# -- slabs ---------------------------------------------------------------------

@dataclass(frozen=True)
class Slab:
    """Region between two parallel planes: |<p, normal> - offset| <= width/2."""

    normal: np.ndarray
    offset: float
    width: float

    def __post_init__(self):
        nrm = np.asarray(self.normal, dtype=float).reshape(3)
        nn = np.linalg.norm(nrm)
        if nn < 1e-12:
            raise GeometryError("slab normal must be nonzero")
        object.__setattr__(self, "normal", nrm / nn)
        if self.width <= 0:
            raise GeometryError("slab width must be positive")


def slab_margin(curve, slab):
    """(width/2) - max vertex distance to the slab center plane; >= 0 iff contained."""
    d = np.abs(curve.vertices @ slab.normal - slab.offset)
    return float(slab.width / 2.0 - d.max())


# -- rigid motions -------------------------------------------------------------

def rotation_about_axis(axis, angle):
    """Rodrigues rotation matrix about a unit axis through the origin."""
    a = np.asarray(axis, dtype=float).reshape(3)
    a = a / np.linalg.norm(a)
    c, s = np.cos(angle), np.sin(angle)
    K = np.array([[0.0, -a[2], a[1]], [a[2], 0.0, -a[0]], [-a[1], a[0], 0.0]])
    return np.eye(3) * c + s * K + (1.0 - c) * np.outer(a, a)


# -- snapshot format -----------------------------------------------------------

def write_snapshot(curve, t, path_or_stream):
    """Line-oriented snapshot: header then 'x y z' rows at 17 significant digits."""
    own = isinstance(path_or_stream, (str, bytes)) or hasattr(path_or_stream, "__fspath__")
    stream = open(path_or_stream, "w") if own else path_or_stream
    try:
        stream.write(f"# curve topology={curve.topology} n={curve.n} t={t:.17g}\n")
        for x, y, z in curve.vertices:
            stream.write(f"{x:.17g} {y:.17g} {z:.17g}\n")
    finally:
        if own:
            stream.close()


def read_snapshot(path_or_stream):
    """Inverse of write_snapshot; returns (SpaceCurve, t)."""
    own = isinstance(path_or_stream, (str, bytes)) or hasattr(path_or_stream, "__fspath__")
    stream = open(path_or_stream) if own else path_or_stream
    try:
        header = stream.readline().strip()
        if not header.startswith("# curve"):
            raise GeometryError(f"not a curve snapshot: {header[:40]!r}")
        fields = dict(tok.split("=", 1) for tok in header[7:].split())
        topology = fields["topology"]
        n = int(fields["n"])
        t = float(fields["t"])
        data = np.loadtxt(io.StringIO(stream.read()), ndmin=2)
        if data.shape != (n, 3):
            raise GeometryError(f"snapshot body {data.shape} != ({n}, 3)")
    finally:
        if own:
            stream.close()
    return SpaceCurve(data, topology, validate=False), t


def snapshot_bytes(curve, t):
    buf = io.StringIO()
    write_snapshot(curve, t, buf)
    return buf.getvalue()

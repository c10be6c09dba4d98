"""Bounded regions, their boundaries, boundary-parameter fields and line sections.

Regions are immutable. A 2D boundary is a counterclockwise chain of segments
(straight edges or circular arcs); a 1D region is an interval whose boundary
is the pair of endpoints. Outward normals are the edge tangent rotated by -90
degrees.

Two kinds of boundary data live on a region:

* the Robin field of the Hamiltonian, stored as an angle ``alpha`` with
  ``cos(alpha) psi + sin(alpha) n.grad(psi) = 0`` (``alpha = 0`` is Dirichlet,
  ``alpha = pi/2`` Neumann, ``gamma = cot(alpha)`` otherwise);
* one purely imaginary momentum field ``lambda`` per direction label.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .errors import GeometryError, ValidationError

TANGENT_TOL = 1e-9
_MERGE_TOL = 1e-10


def _rot_cw(v):
    return np.array([v[1], -v[0]])


def _rot_ccw(v):
    return np.array([-v[1], v[0]])


def as_direction(direction, dim=2):
    """Return ``direction`` as a unit float vector of length ``dim``."""
    d = np.atleast_1d(np.asarray(direction, dtype=float))
    if d.shape != (dim,):
        raise ValueError(f"direction must have {dim} components, got shape {d.shape}")
    norm = np.linalg.norm(d)
    if abs(norm - 1.0) > 1e-9:
        raise ValueError(f"direction must be a unit vector (|d| = {norm})")
    return d / norm


def transverse(direction):
    """Unit vector perpendicular to a 2D direction (direction rotated +90 degrees)."""
    return _rot_ccw(np.asarray(direction, dtype=float))


# ----------------------------------------------------------------------------
# Boundary fields


@dataclass(frozen=True)
class BoundaryField:
    """Scalar field on the boundary.

    Either piecewise constant (one value per segment) or a periodic table of
    values against global arclength, linearly interpolated.
    """

    constants: tuple | None = None
    table: tuple | None = None  # (arclength array, value array, perimeter)

    @classmethod
    def constant(cls, value, n_segments):
        return cls(constants=tuple([value] * n_segments))

    @classmethod
    def per_segment(cls, values):
        return cls(constants=tuple(values))

    @classmethod
    def from_table(cls, arclength, values, perimeter):
        s = np.asarray(arclength, dtype=float)
        v = np.asarray(values)
        if s.ndim != 1 or s.shape != v.shape or len(s) < 2:
            raise ValidationError("boundary table needs matching 1D arclength/value arrays")
        if np.any(np.diff(s) <= 0):
            raise ValidationError("boundary table arclengths must be strictly increasing")
        return cls(table=(s, v, float(perimeter)))

    @property
    def piecewise_constant(self):
        return self.constants is not None

    def values(self):
        if self.constants is not None:
            return np.asarray(self.constants)
        return np.asarray(self.table[1])

    def at(self, segment, s):
        """Evaluate at segment index ``segment`` / global arclength ``s`` (arrays ok)."""
        if self.constants is not None:
            return np.asarray(self.constants)[np.asarray(segment, dtype=int)]
        knots, vals, perimeter = self.table
        # periodic linear interpolation in arclength
        kk = np.concatenate([knots, [knots[0] + perimeter]])
        vv = np.concatenate([vals, [vals[0]]])
        ss = np.mod(np.asarray(s, dtype=float) - knots[0], perimeter) + knots[0]
        if np.iscomplexobj(vv):
            return np.interp(ss, kk, vv.real) + 1j * np.interp(ss, kk, vv.imag)
        return np.interp(ss, kk, vv)


def _check_imaginary(fieldobj, label):
    vals = np.asarray(fieldobj.values(), dtype=complex)
    if np.any(np.abs(vals.real) > 0):
        raise ValidationError(
            f"lambda field {label!r} must be purely imaginary (self-adjointness of the momentum)")
    if np.any(~np.isfinite(vals.imag)):
        raise ValidationError(f"lambda field {label!r} has non-finite values")


def robin_alpha(gamma):
    """Angle parameterization of a Robin coefficient; ``inf`` or 'dirichlet' gives 0."""
    if isinstance(gamma, str):
        if gamma.lower() == "dirichlet":
            return 0.0
        if gamma.lower() == "neumann":
            return math.pi / 2
        raise ValidationError(f"unknown boundary condition {gamma!r}")
    if isinstance(gamma, complex) or np.iscomplexobj(gamma):
        if complex(gamma).imag != 0:
            raise ValidationError("gamma must be real (self-adjointness of H)")
        gamma = complex(gamma).real
    g = float(gamma)
    if math.isnan(g):
        raise ValidationError("gamma is NaN")
    if math.isinf(g):
        return 0.0
    return math.atan2(1.0, g)


def alpha_to_gamma(alpha):
    """Inverse of :func:`robin_alpha`; Dirichlet maps to ``inf``."""
    alpha = float(alpha)
    if alpha == 0.0:
        return math.inf
    return math.cos(alpha) / math.sin(alpha)


# ----------------------------------------------------------------------------
# Boundary segments


@dataclass(frozen=True)
class LineSeg:
    p0: tuple
    p1: tuple

    @property
    def length(self):
        return float(np.hypot(self.p1[0] - self.p0[0], self.p1[1] - self.p0[1]))

    def point(self, u):
        u = np.asarray(u, dtype=float)[..., None]
        return (1 - u) * np.asarray(self.p0) + u * np.asarray(self.p1)

    def normal(self, u):
        t = (np.asarray(self.p1) - np.asarray(self.p0)) / self.length
        n = _rot_cw(t)
        return np.broadcast_to(n, np.shape(u) + (2,)).copy()

    def intersect(self, c, l):
        """Line ``c + s*l``; returns [(s, u)] excluding parallel (tangent) hits."""
        p0 = np.asarray(self.p0, dtype=float)
        d = np.asarray(self.p1, dtype=float) - p0
        n = _rot_cw(d / self.length)
        if abs(float(n @ l)) < TANGENT_TOL:
            return []
        m = np.column_stack([l, -d])
        s, u = np.linalg.solve(m, p0 - c)
        if -1e-12 <= u <= 1 + 1e-12:
            return [(float(s), float(min(max(u, 0.0), 1.0)))]
        return []

    def extreme_points(self):
        return [np.asarray(self.p0, float), np.asarray(self.p1, float)]


@dataclass(frozen=True)
class ArcSeg:
    """Counterclockwise circular arc from angle ``t0`` to ``t1`` (t1 > t0)."""

    center: tuple
    radius: float
    t0: float
    t1: float

    @property
    def length(self):
        return self.radius * (self.t1 - self.t0)

    def _angle(self, u):
        return self.t0 + np.asarray(u, dtype=float) * (self.t1 - self.t0)

    def point(self, u):
        t = self._angle(u)
        return np.stack([self.center[0] + self.radius * np.cos(t),
                         self.center[1] + self.radius * np.sin(t)], axis=-1)

    def normal(self, u):
        t = self._angle(u)
        return np.stack([np.cos(t), np.sin(t)], axis=-1)

    def intersect(self, c, l):
        w = np.asarray(c, float) - np.asarray(self.center, float)
        b = float(l @ w)
        disc = b * b - (w @ w - self.radius ** 2)
        if disc < 0:
            return []
        out = []
        for s in (-b - math.sqrt(disc), -b + math.sqrt(disc)):
            p = w + s * l
            t = math.atan2(p[1], p[0])
            # bring t into [t0, t0 + 2pi)
            t = self.t0 + math.fmod(t - self.t0 + 4 * math.pi, 2 * math.pi)
            if t > self.t1 + 1e-12:
                if abs(t - 2 * math.pi - self.t0) < 1e-12:
                    t = self.t0
                else:
                    continue
            u = (min(t, self.t1) - self.t0) / (self.t1 - self.t0)
            nrm = p / self.radius
            if abs(float(nrm @ l)) < TANGENT_TOL:
                continue
            out.append((float(s), float(u)))
        return out

    def extreme_points(self):
        pts = [self.point(0.0), self.point(1.0)]
        # axis-extreme points of the circle that fall inside the arc
        for k in range(-4, 9):
            t = k * math.pi / 2
            if self.t0 < t < self.t1:
                pts.append(np.array([self.center[0] + self.radius * math.cos(t),
                                     self.center[1] + self.radius * math.sin(t)]))
        return pts


@dataclass(frozen=True)
class PointSeg:
    """Endpoint of a 1D interval with its outward normal (+1 or -1)."""

    x: float
    n: float

    length = 1.0


# ----------------------------------------------------------------------------
# Regions


def _polygon_area(v):
    x, y = v[:, 0], v[:, 1]
    return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


def _segments_cross(a0, a1, b0, b1):
    def orient(p, q, r):
        return (q[0] - p[0]) * (r[1] - p[1]) - (q[1] - p[1]) * (r[0] - p[0])

    d1, d2 = orient(b0, b1, a0), orient(b0, b1, a1)
    d3, d4 = orient(a0, a1, b0), orient(a0, a1, b1)
    if ((d1 > 0) != (d2 > 0)) and ((d3 > 0) != (d4 > 0)) and d1 * d2 != 0 and d3 * d4 != 0:
        return True
    return False


@dataclass(frozen=True, eq=False)
class Region:
    """A bounded region with Robin (Hamiltonian) and momentum boundary fields.

    Build regions with the ``interval``, ``rectangle``, ``convex_polygon``,
    ``polygon`` and ``rounded_rectangle`` constructors rather than directly.
    """

    kind: str
    params: Mapping
    segments: tuple
    alpha: BoundaryField
    lam: Mapping[str, BoundaryField] = field(default_factory=dict)
    region_id: str = ""

    # ------------------------------------------------------------ constructors
    @classmethod
    def interval(cls, a, b, gamma=math.inf, lam=None, region_id="interval"):
        if not b > a:
            raise GeometryError(f"interval needs a < b, got ({a}, {b})")
        segs = (PointSeg(float(a), -1.0), PointSeg(float(b), 1.0))
        return cls._build("interval_1d", {"a": float(a), "b": float(b)}, segs,
                          gamma, lam, region_id)

    @classmethod
    def rectangle(cls, lx, ly, origin=(0.0, 0.0), gamma=math.inf, lam=None,
                  region_id="rectangle"):
        """Axis-aligned rectangle; segments 1..4 = bottom, right, top, left."""
        if lx <= 0 or ly <= 0:
            raise GeometryError("rectangle sides must be positive")
        ox, oy = map(float, origin)
        v = [(ox, oy), (ox + lx, oy), (ox + lx, oy + ly), (ox, oy + ly)]
        segs = tuple(LineSeg(v[i], v[(i + 1) % 4]) for i in range(4))
        return cls._build("rectangle", {"lx": float(lx), "ly": float(ly), "origin": (ox, oy)},
                          segs, gamma, lam, region_id)

    @classmethod
    def polygon(cls, vertices, gamma=math.inf, lam=None, region_id="polygon", convex=False):
        v = np.asarray(vertices, dtype=float)
        if v.ndim != 2 or v.shape[1] != 2 or len(v) < 3:
            raise GeometryError("polygon needs at least 3 two-dimensional vertices")
        n = len(v)
        area = _polygon_area(v)
        if abs(area) < 1e-14:
            raise GeometryError("degenerate polygon (zero area)")
        for i in range(n):
            for j in range(i + 1, n):
                if j == i + 1 or (i == 0 and j == n - 1):
                    continue
                if _segments_cross(v[i], v[(i + 1) % n], v[j], v[(j + 1) % n]):
                    raise GeometryError(f"polygon edges {i} and {j} intersect")
        perm = list(range(n))
        if area < 0:
            # reverse to counterclockwise; edge i (v_i -> v_i+1) becomes edge n-2-i
            v = v[::-1].copy()
            perm = [(n - 2 - i) % n for i in range(n)]
        if convex:
            e = np.roll(v, -1, axis=0) - v
            cross = e[:, 0] * np.roll(e[:, 1], -1) - e[:, 1] * np.roll(e[:, 0], -1)
            if np.any(cross < -1e-12):
                raise GeometryError("convex_polygon given a non-convex vertex list")

        def remap(values):
            if values is None or np.isscalar(values) or isinstance(values, str):
                return values
            values = list(values)
            if len(values) != n:
                raise ValidationError(f"expected {n} per-edge values, got {len(values)}")
            out = [None] * n
            for i, val in enumerate(values):
                out[perm[i]] = val
            return out

        gamma = remap(gamma)
        if lam is not None:
            lam = {k: (val if isinstance(val, BoundaryField) else remap(val))
                   for k, val in lam.items()}
        segs = tuple(LineSeg(tuple(v[i]), tuple(v[(i + 1) % n])) for i in range(n))
        kind = "convex_polygon" if convex else "polygon"
        return cls._build(kind, {"vertices": tuple(map(tuple, v))}, segs, gamma, lam, region_id)

    @classmethod
    def convex_polygon(cls, vertices, gamma=math.inf, lam=None, region_id="convex_polygon"):
        return cls.polygon(vertices, gamma, lam, region_id, convex=True)

    @classmethod
    def rounded_rectangle(cls, lx, ly, r, origin=(0.0, 0.0), gamma=math.inf, lam=None,
                          region_id="rounded_rectangle"):
        """Rectangle with circular corners of radius ``r``.

        Segment order (counterclockwise): bottom, arc BR, right, arc TR, top,
        arc TL, left, arc BL.
        """
        if lx <= 0 or ly <= 0:
            raise GeometryError("rectangle sides must be positive")
        if not 0 < r < 0.5 * min(lx, ly):
            raise GeometryError("corner radius must satisfy 0 < r < min(lx, ly)/2")
        ox, oy = map(float, origin)
        x0, x1, y0, y1 = ox, ox + lx, oy, oy + ly
        h = math.pi / 2
        segs = (
            LineSeg((x0 + r, y0), (x1 - r, y0)),
            ArcSeg((x1 - r, y0 + r), r, -h, 0.0),
            LineSeg((x1, y0 + r), (x1, y1 - r)),
            ArcSeg((x1 - r, y1 - r), r, 0.0, h),
            LineSeg((x1 - r, y1), (x0 + r, y1)),
            ArcSeg((x0 + r, y1 - r), r, h, 2 * h),
            LineSeg((x0, y1 - r), (x0, y0 + r)),
            ArcSeg((x0 + r, y0 + r), r, 2 * h, 3 * h),
        )
        return cls._build("rounded_rectangle",
                          {"lx": float(lx), "ly": float(ly), "r": float(r), "origin": (ox, oy)},
                          segs, gamma, lam, region_id)

    @classmethod
    def _build(cls, kind, params, segs, gamma, lam, region_id):
        nseg = len(segs)
        if gamma is None:
            gamma = math.inf
        if isinstance(gamma, BoundaryField):
            alpha = BoundaryField(constants=tuple(robin_alpha(g) for g in gamma.constants))
        elif np.isscalar(gamma) or isinstance(gamma, str):
            alpha = BoundaryField.constant(robin_alpha(gamma), nseg)
        else:
            gamma = list(gamma)
            if len(gamma) != nseg:
                raise ValidationError(f"expected {nseg} gamma values, got {len(gamma)}")
            alpha = BoundaryField.per_segment([robin_alpha(g) for g in gamma])
        fields = {}
        for key, val in (lam or {}).items():
            if isinstance(val, BoundaryField):
                f = val
            elif np.isscalar(val):
                f = BoundaryField.constant(complex(val), nseg)
            else:
                val = list(val)
                if len(val) != nseg:
                    raise ValidationError(f"lambda[{key!r}] needs {nseg} values, got {len(val)}")
                f = BoundaryField.per_segment([complex(x) for x in val])
            _check_imaginary(f, key)
            fields[key] = f
        return cls(kind, params, segs, alpha, fields, region_id)

    # ------------------------------------------------------------------ basics
    @property
    def dim(self):
        return 1 if self.kind == "interval_1d" else 2

    @property
    def perimeter(self):
        if self.dim == 1:
            return 2.0
        return float(sum(s.length for s in self.segments))

    def segment_offsets(self):
        """Global arclength at the start of each segment."""
        lengths = [s.length for s in self.segments]
        return np.concatenate([[0.0], np.cumsum(lengths)[:-1]])

    def gamma(self, segment):
        """Robin coefficient on a segment (``inf`` for Dirichlet)."""
        return alpha_to_gamma(self.alpha.at(segment, 0.0))

    def is_dirichlet(self, segment):
        return float(self.alpha.at(segment, 0.0)) == 0.0

    def lambda_field(self, direction):
        """Momentum extension field for a direction (unit vector or label).

        Labels: ``"x"``, ``"y"`` for the coordinate axes, otherwise
        ``"default"``. Missing fields default to lambda = 0.
        """
        key = direction if isinstance(direction, str) else self._direction_key(direction)
        if key in self.lam:
            return self.lam[key]
        if "default" in self.lam:
            return self.lam["default"]
        return BoundaryField.constant(0j, len(self.segments))

    def _direction_key(self, direction):
        d = np.atleast_1d(np.asarray(direction, dtype=float))
        if self.dim == 1:
            return "x"
        if abs(abs(d[0]) - 1) < 1e-12:
            return "x"
        if abs(abs(d[1]) - 1) < 1e-12:
            return "y"
        return "default"

    def contains(self, points):
        """Strict-interior test (boundary points may go either way)."""
        p = np.asarray(points, dtype=float)
        if self.dim == 1:
            return (p > self.params["a"]) & (p < self.params["b"])
        p = np.atleast_2d(p)
        x, y = p[..., 0], p[..., 1]
        if self.kind == "rectangle":
            ox, oy = self.params["origin"]
            return (x > ox) & (x < ox + self.params["lx"]) & (y > oy) & (y < oy + self.params["ly"])
        if self.kind == "rounded_rectangle":
            ox, oy = self.params["origin"]
            lx, ly, r = self.params["lx"], self.params["ly"], self.params["r"]
            inside = (x > ox) & (x < ox + lx) & (y > oy) & (y < oy + ly)
            for cx, cy, sx, sy in ((ox + r, oy + r, -1, -1), (ox + lx - r, oy + r, 1, -1),
                                   (ox + lx - r, oy + ly - r, 1, 1), (ox + r, oy + ly - r, -1, 1)):
                corner = (sx * (x - cx) > 0) & (sy * (y - cy) > 0)
                inside &= ~(corner & ((x - cx) ** 2 + (y - cy) ** 2 >= r * r))
            return inside
        v = np.asarray(self.params["vertices"])
        inside = np.zeros(x.shape, dtype=bool)
        n = len(v)
        for i in range(n):
            (x0, y0), (x1, y1) = v[i], v[(i + 1) % n]
            cond = (y0 > y) != (y1 > y)
            with np.errstate(divide="ignore", invalid="ignore"):
                xc = x0 + (y - y0) * (x1 - x0) / (y1 - y0)
            inside ^= cond & (x < xc)
        return inside

    def distance_to_boundary(self, points):
        """Euclidean distance from points to the boundary curve."""
        p = np.atleast_2d(np.asarray(points, dtype=float))
        if self.dim == 1:
            a, b = self.params["a"], self.params["b"]
            q = np.asarray(points, float)
            return np.minimum(np.abs(q - a), np.abs(q - b))
        best = np.full(p.shape[:-1], np.inf)
        for seg in self.segments:
            if isinstance(seg, LineSeg):
                a = np.asarray(seg.p0)
                d = np.asarray(seg.p1) - a
                u = np.clip(((p - a) @ d) / (d @ d), 0, 1)
                dist = np.linalg.norm(p - (a + u[..., None] * d), axis=-1)
            else:
                w = p - np.asarray(seg.center)
                t = np.arctan2(w[..., 1], w[..., 0])
                t = seg.t0 + np.mod(t - seg.t0, 2 * np.pi)
                on_arc = t <= seg.t1
                radial = np.abs(np.linalg.norm(w, axis=-1) - seg.radius)
                ends = np.minimum(np.linalg.norm(p - seg.point(0.0), axis=-1),
                                  np.linalg.norm(p - seg.point(1.0), axis=-1))
                dist = np.where(on_arc, radial, ends)
            best = np.minimum(best, dist)
        return best

    def transverse_breakpoints(self, direction):
        """Transverse coordinates where the line-section structure can change."""
        t = transverse(direction)
        pts = []
        for seg in self.segments:
            pts.extend(seg.extreme_points())
        return np.unique(np.round(np.array([float(np.asarray(q) @ t) for q in pts]), 14))


# ----------------------------------------------------------------------------
# Line sections


@dataclass(frozen=True)
class Interval:
    """One connected piece of a line section, in line coordinates ``s = l.x``."""

    x_minus: float
    x_plus: float
    lambda_minus: complex = 0j
    lambda_plus: complex = 0j
    seg_minus: int = -1
    seg_plus: int = -1

    @property
    def length(self):
        return self.x_plus - self.x_minus


@dataclass(frozen=True)
class LineSection:
    direction: np.ndarray
    anchor: float | None
    intervals: tuple

    def point(self, s):
        """Map line coordinates to Cartesian points."""
        s = np.asarray(s, dtype=float)
        if self.anchor is None:
            return s * float(self.direction[0])
        t = transverse(self.direction)
        return self.anchor * t + s[..., None] * self.direction


def line_section(region: Region, direction, anchor=None, lam_key=None) -> LineSection:
    """Intersect the line ``anchor * t + s * direction`` with the region.

    ``anchor`` is the transverse coordinate along ``t`` = direction rotated by
    +90 degrees, or any 2D point on the line (2D only). Returns the maximal open intervals inside the
    region, sorted, with the momentum extension parameter at each piercing
    point. Tangent piercings are dropped.
    """
    if region.dim == 1:
        if anchor is not None and np.size(anchor) != 0:
            raise ValueError("a 1D region takes no transverse anchor")
        l = as_direction(direction, 1)
        lf = region.lambda_field(lam_key or "x")
        a, b = region.params["a"], region.params["b"]
        lam_a, lam_b = complex(lf.at(0, 0.0)), complex(lf.at(1, 0.0))
        if l[0] > 0:
            iv = Interval(a, b, lam_a, lam_b, 0, 1)
        else:
            iv = Interval(-b, -a, lam_b, lam_a, 1, 0)
        return LineSection(l, None, (iv,))

    l = as_direction(direction, 2)
    t = transverse(l)
    if anchor is None:
        raise ValueError("a 2D region needs a transverse anchor")
    if np.ndim(anchor) == 1 and np.size(anchor) == 2:
        anchor = float(np.asarray(anchor, dtype=float) @ t)
    elif np.ndim(anchor) != 0:
        raise ValueError("anchor must be a transverse coordinate or a 2D point on the line")
    lf = region.lambda_field(lam_key or l)
    c = float(anchor) * t
    offsets = region.segment_offsets()
    hits = []
    for k, seg in enumerate(region.segments):
        for s, u in seg.intersect(c, l):
            nl = abs(float(seg.normal(u) @ l))
            hits.append((s, k, u, nl))
    if not hits:
        return LineSection(l, float(anchor), ())
    hits.sort(key=lambda h: h[0])
    merged = []
    for h in hits:
        if merged and abs(h[0] - merged[-1][0]) < _MERGE_TOL:
            if h[3] > merged[-1][3]:
                merged[-1] = h
            continue
        merged.append(h)

    def lam_at(h):
        s_glob = offsets[h[1]] + h[2] * region.segments[h[1]].length
        return complex(lf.at(h[1], s_glob))

    pieces = []
    for h0, h1 in zip(merged[:-1], merged[1:]):
        mid = c + 0.5 * (h0[0] + h1[0]) * l
        if region.contains(mid[None, :])[0]:
            pieces.append([h0, h1])
    # glue pieces that share an endpoint (line through a boundary touch point)
    glued = []
    for p in pieces:
        if glued and abs(glued[-1][1][0] - p[0][0]) < _MERGE_TOL:
            glued[-1][1] = p[1]
        else:
            glued.append(p)
    intervals = tuple(Interval(h0[0], h1[0], lam_at(h0), lam_at(h1), h0[1], h1[1])
                      for h0, h1 in glued if h1[0] - h0[0] > _MERGE_TOL)
    return LineSection(l, float(anchor), intervals)


# ----------------------------------------------------------------------------
# Boundary quadrature


@dataclass(frozen=True)
class BoundaryQuadrature:
    points: np.ndarray
    normals: np.ndarray
    weights: np.ndarray
    segment: np.ndarray
    arclength: np.ndarray

    def subset(self, mask):
        return BoundaryQuadrature(self.points[mask], self.normals[mask], self.weights[mask],
                                  self.segment[mask], self.arclength[mask])

    def __len__(self):
        return len(self.weights)


def boundary_quadrature(region: Region, n_points=256) -> BoundaryQuadrature:
    """Gauss-Legendre nodes on every boundary segment, allotted by length.

    For a 1D interval the "boundary integral" is the sum over both
    endpoints with unit weight.
    """
    if n_points < 8:
        raise ValueError("boundary_quadrature needs n_points >= 8")
    if region.dim == 1:
        a, b = region.params["a"], region.params["b"]
        return BoundaryQuadrature(np.array([a, b]), np.array([-1.0, 1.0]), np.ones(2),
                                  np.array([0, 1]), np.array([0.0, 1.0]))
    lengths = np.array([s.length for s in region.segments])
    total = lengths.sum()
    if total <= 0 or region.kind != "interval_1d" and _region_area(region) <= 0:
        raise GeometryError("degenerate region")
    counts = np.maximum(2, np.round(n_points * lengths / total).astype(int))
    offsets = region.segment_offsets()
    pts, nrm, w, segi, arc = [], [], [], [], []
    for k, (seg, m) in enumerate(zip(region.segments, counts)):
        xg, wg = np.polynomial.legendre.leggauss(int(m))
        u = 0.5 * (xg + 1)
        pts.append(seg.point(u))
        nrm.append(seg.normal(u))
        w.append(0.5 * wg * seg.length)
        segi.append(np.full(m, k))
        arc.append(offsets[k] + u * seg.length)
    return BoundaryQuadrature(np.concatenate(pts), np.concatenate(nrm), np.concatenate(w),
                              np.concatenate(segi), np.concatenate(arc))


def _region_area(region):
    if region.kind in ("rectangle",):
        return region.params["lx"] * region.params["ly"]
    if region.kind == "rounded_rectangle":
        p = region.params
        return p["lx"] * p["ly"] - (4 - math.pi) * p["r"] ** 2
    if region.kind in ("polygon", "convex_polygon"):
        return _polygon_area(np.asarray(region.params["vertices"]))
    return region.params["b"] - region.params["a"]


def region_area(region):
    return _region_area(region)


@dataclass(frozen=True)
class BoundaryPartition:
    """Boundary split by the sign of ``n . l``; segments listed by index.

    ``plus``/``minus``/``zero`` hold quadrature subsets; the ``*_segments``
    sets list segments lying entirely (up to isolated points) in each part.
    """

    plus: BoundaryQuadrature
    minus: BoundaryQuadrature
    zero: BoundaryQuadrature
    plus_segments: frozenset
    minus_segments: frozenset
    zero_segments: frozenset
    mixed_segments: frozenset


def partition_boundary(region: Region, direction, n_points=256) -> BoundaryPartition:
    """Partition the boundary into ``n.l > 0``, ``n.l < 0`` and ``n.l = 0`` parts.

    The zero part carries no momentum boundary condition for ``l . p_R``.
    """
    q = boundary_quadrature(region, n_points)
    if region.dim == 1:
        l = as_direction(direction, 1)
        nl = q.normals * l[0]
    else:
        l = as_direction(direction, 2)
        nl = q.normals @ l
    plus, minus = nl > TANGENT_TOL, nl < -TANGENT_TOL
    zero = ~(plus | minus)
    sets = {"plus": set(), "minus": set(), "zero": set(), "mixed": set()}
    for k in range(len(region.segments)):
        sel = q.segment == k
        kinds = {name for name, m in (("plus", plus), ("minus", minus), ("zero", zero))
                 if np.any(m[sel])}
        if len(kinds) == 1:
            sets[kinds.pop()].add(k)
        else:
            sets["mixed"].add(k)
    return BoundaryPartition(q.subset(plus), q.subset(minus), q.subset(zero),
                             frozenset(sets["plus"]), frozenset(sets["minus"]),
                             frozenset(sets["zero"]), frozenset(sets["mixed"]))


# ----------------------------------------------------------------------------
# Volume quadrature through line sections


@dataclass(frozen=True)
class LineRule:
    """Transverse quadrature: line anchors, weights and their sections."""

    direction: np.ndarray
    anchors: np.ndarray
    weights: np.ndarray
    sections: tuple


def line_rule(region: Region, direction, n_lines=64, rule="gauss", lam_key=None) -> LineRule:
    """Lines parallel to ``direction`` covering the region.

    ``rule="gauss"`` puts Gauss-Legendre anchors on panels between
    transverse breakpoints (vertices, arc ends), so integrands that are
    smooth per panel integrate spectrally. ``rule="midpoint"`` is the plain
    composite midpoint rule over the transverse extent.
    """
    if region.dim == 1:
        l = as_direction(direction, 1)
        return LineRule(l, np.array([np.nan]), np.ones(1), (line_section(region, l, None),))
    l = as_direction(direction, 2)
    bps = region.transverse_breakpoints(l)
    lo, hi = bps[0], bps[-1]
    if rule == "midpoint":
        h = (hi - lo) / n_lines
        anchors = lo + h * (np.arange(n_lines) + 0.5)
        weights = np.full(n_lines, h)
    elif rule == "gauss":
        widths = np.diff(bps)
        keep = widths > 1e-12
        edges = [(a, b) for a, b, k in zip(bps[:-1], bps[1:], keep) if k]
        w = np.array([b - a for a, b in edges])
        # every panel gets a floor of points: chords under a shallow edge
        # sweep the whole width within a thin panel
        base = min(12, max(1, n_lines // len(w)))
        counts = base + np.floor((n_lines - base * len(w)) * w / w.sum()).astype(int)
        counts = np.maximum(counts, 1)
        # hand leftover lines to the widest panels
        for i in np.argsort(-w)[: max(0, n_lines - counts.sum())]:
            counts[i] += 1
        anchors, weights = [], []
        for (a, b), m in zip(edges, counts):
            xg, wg = np.polynomial.legendre.leggauss(int(m))
            anchors.append(0.5 * (a + b) + 0.5 * (b - a) * xg)
            weights.append(0.5 * (b - a) * wg)
        anchors, weights = np.concatenate(anchors), np.concatenate(weights)
    else:
        raise ValueError(f"unknown transverse rule {rule!r}")
    sections = tuple(line_section(region, l, float(a), lam_key) for a in anchors)
    return LineRule(l, anchors, weights, sections)


@dataclass(frozen=True)
class VolumeQuadrature:
    points: np.ndarray
    weights: np.ndarray


def volume_quadrature(region: Region, n_lines=64, n_per_line=64, direction=None,
                      rule="gauss") -> VolumeQuadrature:
    """Tensor Gauss rule built from line sections (lines along ``direction``)."""
    if direction is None:
        direction = (1.0,) if region.dim == 1 else (1.0, 0.0)
    lr = line_rule(region, direction, n_lines, rule)
    xg, wg = np.polynomial.legendre.leggauss(n_per_line)
    pts, wts = [], []
    for wt, sec in zip(lr.weights, lr.sections):
        for iv in sec.intervals:
            s = iv.x_minus + 0.5 * (xg + 1) * iv.length
            pts.append(sec.point(s))
            wts.append(wt * 0.5 * iv.length * wg)
    return VolumeQuadrature(np.concatenate(pts), np.concatenate(wts))

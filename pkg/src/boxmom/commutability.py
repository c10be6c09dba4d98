"""Simultaneous measurability of momentum components.

Two doubling variants are provided for joint modes on a rectangle:

* ``tensor_c4`` doubles once per axis, ``Phi = phi_x(x) (x) phi_y(y)`` with
  components indexed ``[x parity, y parity]``; every side condition holds
  identically.
* ``literal_c2`` is the single two-component form
  ``(A e^{i mu.x} + B e^{-i mu.x}, A e^{i mu.x} - B e^{-i mu.x})`` with
  ``B/A`` fixed by the x ladder at the bottom edge; the side conditions
  then leave transverse phases ``e^{+-i mu_t t}`` behind.

The side labels are 1..4 = bottom, right, top, left, matching the segment
order of ``Region.rectangle``. ``lambda_1, lambda_3`` act on the y momentum,
``lambda_2, lambda_4`` on the x momentum.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError
from .geometry import ArcSeg, Interval, Region, as_direction, line_rule
from .momentum_modes import _check_lambda, build_mode, spectrum

PARALLEL_TOL = 1e-12
INCOMPATIBLE_THRESHOLD = 0.05
VARIANTS = ("tensor_c4", "literal_c2")

def _unit(v, d=2):
    return as_direction(v, d)


@dataclass(frozen=True)
class JointMode:
    """Simultaneous eigenfunction candidate of ``x.p_R`` and ``y.p_R``."""

    variant: str
    n: tuple
    mu: tuple
    origin: tuple
    lengths: tuple
    lambdas: tuple
    sigma: tuple  # (sigma_x, sigma_y) of the two 1D factors
    theta: tuple  # ladder offsets, mu = pi n / L + theta


    @property
    def mu_norm(self):
        return float(math.hypot(*self.mu))

    def _phase(self, axis, s):
        # exp(i mu s) with the pi n s / L part reduced mod 2 pi first: keeps the
        # far-side condition at rounding level instead of eps * mu * L
        n, L, th = self.n[axis], self.lengths[axis], self.theta[axis]
        u = np.mod(n * (s / L), 2.0)
        return np.exp(1j * (math.pi * u + th * s))

    def _factor(self, axis, s):
        sg = self.sigma[axis]
        s = np.asarray(s, dtype=float) - self.origin[axis]
        e = self._phase(axis, s)
        ep, em = e, sg * np.conj(e)
        c = 1.0 / (2.0 * math.sqrt(self.lengths[axis]))
        return c * (ep + em), c * (ep - em)

    def components(self, points):
        """Component array: ``(2, 2, P)`` for tensor_c4, ``(2, P)`` for literal_c2."""
        p = np.atleast_2d(np.asarray(points, dtype=float))
        if self.variant == "tensor_c4":
            fx = np.stack(self._factor(0, p[:, 0]))
            fy = np.stack(self._factor(1, p[:, 1]))
            return fx[:, None, :] * fy[None, :, :]
        q = p - np.asarray(self.origin)
        phase = q @ np.asarray(self.mu)
        a = 1.0 / (2.0 * math.sqrt(self.lengths[0] * self.lengths[1]))
        ep, em = a * np.exp(1j * phase), a * self.sigma[0] * np.exp(-1j * phase)
        return np.stack([ep + em, ep - em])

    def derivative(self, points, vec):
        """Directional derivative ``vec . grad`` of every component."""
        p = np.atleast_2d(np.asarray(points, dtype=float))
        v = np.broadcast_to(np.asarray(vec, dtype=float), p.shape)
        if self.variant == "tensor_c4":
            fx, fy = np.stack(self._factor(0, p[:, 0])), np.stack(self._factor(1, p[:, 1]))
            gx = np.stack(self._factor_d(0, p[:, 0]))
            gy = np.stack(self._factor_d(1, p[:, 1]))
            return (v[:, 0] * gx)[:, None, :] * fy[None] + fx[:, None, :] * (v[:, 1] * gy)[None]
        q = p - np.asarray(self.origin)
        phase = q @ np.asarray(self.mu)
        a = 1.0 / (2.0 * math.sqrt(self.lengths[0] * self.lengths[1]))
        dphase = v @ np.asarray(self.mu)
        ep = 1j * dphase * a * np.exp(1j * phase)
        em = -1j * dphase * a * self.sigma[0] * np.exp(-1j * phase)
        return np.stack([ep + em, ep - em])

    def _factor_d(self, axis, s):
        k, sg = self.mu[axis], self.sigma[axis]
        s = np.asarray(s, dtype=float) - self.origin[axis]
        e = self._phase(axis, s)
        ep, em = 1j * k * e, -1j * k * sg * np.conj(e)
        c = 1.0 / (2.0 * math.sqrt(self.lengths[axis]))
        return c * (ep + em), c * (ep - em)

    def pair(self, points, axis, tangent=None):
        """(even, odd) parts with respect to the doubling of ``axis``.

        With ``tangent`` the parts of the derivative along it are returned.
        For tensor_c4 the untouched index is kept as a leading axis.
        """
        c = self.components(points) if tangent is None else self.derivative(points, tangent)
        if self.variant == "literal_c2":
            return c[0], c[1]
        return (c[0], c[1]) if axis == 0 else (c[:, 0], c[:, 1])

    def amplitude(self, points):
        c = self.components(points)
        return np.sqrt(np.sum(np.abs(c.reshape(-1, c.shape[-1])) ** 2, axis=0))


def _rect_lambdas(region: Region, lambdas):
    if lambdas is not None:
        lam = tuple(_check_lambda(v, f"lambda_{i + 1}") for i, v in enumerate(lambdas))
        if len(lam) != 4:
            raise ValidationError("a rectangle needs four side parameters")
        return lam
    lx, ly = region.lambda_field("x"), region.lambda_field("y")
    for f in (lx, ly):
        if not f.piecewise_constant:
            raise ValidationError("joint modes need lambda constant per side")
    return tuple(_check_lambda(v, f"lambda_{i + 1}") for i, v in enumerate(
        (ly.at(0, 0.0), lx.at(1, 0.0), ly.at(2, 0.0), lx.at(3, 0.0))))


def _bounding_box(region: Region):
    if region.kind == "rectangle":
        return region.params["origin"], (region.params["lx"], region.params["ly"])
    if region.kind == "rounded_rectangle":
        return region.params["origin"], (region.params["lx"], region.params["ly"])
    pts = np.concatenate([np.atleast_2d(p) for s in region.segments for p in s.extreme_points()])
    lo, hi = pts.min(axis=0), pts.max(axis=0)
    return tuple(lo), tuple(hi - lo)


def joint_modes_rectangle(region: Region, lambdas=None, nx_range=(0, 3), ny_range=(0, 3),
                          variant="tensor_c4"):
    """Joint modes over ``nx_range x ny_range`` (inclusive bounds).

    ``lambdas`` = (lambda_1..lambda_4) for sides bottom, right, top, left;
    taken from the region's ``"y"``/``"x"`` fields when omitted. Rounded
    rectangles use their bounding rectangle.
    """
    if variant not in VARIANTS:
        raise ValidationError(f"unknown doubling variant {variant!r}")
    if region.dim != 2:
        raise ValidationError("joint modes need a two-dimensional region")
    origin, (lx, ly) = _bounding_box(region)
    l1, l2, l3, l4 = _rect_lambdas(region, lambdas)
    ivx = Interval(origin[0], origin[0] + lx, l4, l2)
    ivy = Interval(origin[1], origin[1] + ly, l1, l3)
    thx = spectrum(ivx, 0, 0).theta
    thy = spectrum(ivy, 0, 0).theta
    out = []
    for nx in range(nx_range[0], nx_range[1] + 1):
        mx = build_mode(ivx, nx)
        for ny in range(ny_range[0], ny_range[1] + 1):
            my = build_mode(ivy, ny)
            # sigma relative to the box origin, in closed form (no phase round trip)
            sx = (1 - l4) / (1 + l4)
            sy = (1 - l1) / (1 + l1)
            out.append(JointMode(variant, (nx, ny), (mx.k, my.k), tuple(map(float, origin)),
                                 (float(lx), float(ly)), (l1, l2, l3, l4),
                                 (complex(sx), complex(sy)), (thx, thy)))
    return out


def joint_ladders(region: Region, lambdas=None, n_max=8):
    """The two 1D ladders behind the joint modes: (x ladder, y ladder)."""
    origin, (lx, ly) = _bounding_box(region)
    l1, l2, l3, l4 = _rect_lambdas(region, lambdas)
    return (spectrum(Interval(origin[0], origin[0] + lx, l4, l2), 0, n_max),
            spectrum(Interval(origin[1], origin[1] + ly, l1, l3), 0, n_max))


# ----------------------------------------------------------------------------
# Residuals


@dataclass(frozen=True)
class BoundarySamples:
    points: np.ndarray
    normals: np.ndarray
    weights: np.ndarray
    segment: np.ndarray
    arclength: np.ndarray


def boundary_samples(region: Region, n_per_segment=65) -> BoundarySamples:
    """Uniform samples on every segment, endpoints included (trapezoid weights)."""
    u = np.linspace(0.0, 1.0, n_per_segment)
    w = np.full(n_per_segment, 1.0 / (n_per_segment - 1))
    w[0] = w[-1] = 0.5 / (n_per_segment - 1)
    pts, nrm, wts, seg, arc = [], [], [], [], []
    offsets = region.segment_offsets()
    for k, s in enumerate(region.segments):
        arc.append(offsets[k] + u * s.length)
        pts.append(s.point(u))
        nrm.append(s.normal(u))
        wts.append(w * s.length)
        seg.append(np.full(n_per_segment, k))
    return BoundarySamples(np.concatenate(pts), np.concatenate(nrm), np.concatenate(wts),
                           np.concatenate(seg), np.concatenate(arc))


@dataclass(frozen=True)
class JointResidual:
    """Normalized joint boundary-condition residuals of one mode.

    ``per_segment`` holds the max over each segment (NaN where no condition
    applies); ``per_direction`` maps 0/1 to (max, L2) over points where that
    direction's condition applies.
    """

    max: float
    l2: float
    per_segment: np.ndarray
    per_direction: dict
    amplitude: float
    max_c1: float = 0.0


def _axis_of(direction):
    d = _unit(direction)
    if abs(abs(d[0]) - 1) < PARALLEL_TOL:
        return 0
    if abs(abs(d[1]) - 1) < PARALLEL_TOL:
        return 1
    raise ValidationError("joint modes are defined for the coordinate directions only")


def joint_bc_residual(region: Region, mode: JointMode, directions=((1.0, 0.0), (0.0, 1.0)),
                      samples: BoundarySamples | None = None) -> JointResidual:
    """``|Psi_o - lambda_k Psi_e|`` wherever ``n.k != 0``, for k in ``directions``.

    Normalized by the RMS boundary amplitude of the mode. The lambda at each
    point comes from the region's field for that direction.

    ``max_c1`` adds the tangential-derivative condition
    ``d_t Psi_o = lambda_k d_t Psi_e`` required on the commutator domain,
    made dimensionless with the box extent transverse to ``k``.
    """
    samples = samples or boundary_samples(region)
    amp = float(np.sqrt(np.sum(samples.weights * mode.amplitude(samples.points) ** 2)
                        / np.sum(samples.weights)))
    nseg = len(region.segments)
    per_seg = np.full(nseg, np.nan)
    per_dir, sq, wsum, mx, mx1 = {}, 0.0, 0.0, 0.0, 0.0
    _, box = _bounding_box(region)
    for axis, d in enumerate(directions):
        ax = _axis_of(d)
        dvec = _unit(d)
        act = np.abs(samples.normals @ dvec) > PARALLEL_TOL
        if not np.any(act):
            per_dir[axis] = (0.0, 0.0)
            continue
        lam = np.asarray(region.lambda_field(dvec).at(samples.segment[act], samples.arclength[act]))
        e, o = mode.pair(samples.points[act], ax)
        r = np.abs(o - lam * e) / amp
        tan = np.column_stack([-samples.normals[act, 1], samples.normals[act, 0]])
        de, do = mode.pair(samples.points[act], ax, tangent=tan)
        r1 = np.abs(do - lam * de) * box[1 - ax] / amp
        if r.ndim > 1:
            r = np.sqrt(np.sum(r ** 2, axis=0))
            r1 = np.sqrt(np.sum(r1 ** 2, axis=0))
        mx1 = max(mx1, float(np.sqrt(r ** 2 + r1 ** 2).max()))
        w = samples.weights[act]
        per_dir[axis] = (float(r.max()), float(np.sqrt(np.sum(w * r ** 2) / np.sum(w))))
        for k in np.unique(samples.segment[act]):
            rk = float(r[samples.segment[act] == k].max())
            per_seg[k] = rk if np.isnan(per_seg[k]) else max(per_seg[k], rk)
        sq += float(np.sum(w * r ** 2))
        wsum += float(np.sum(w))
        mx = max(mx, float(r.max()))
    return JointResidual(mx, math.sqrt(sq / wsum) if wsum else 0.0, per_seg, per_dir, amp, mx1)


def corner_arc_residual(region: Region, mode: JointMode, res: JointResidual | None = None):
    """Max residual on the corner arcs divided by ``min(1, |mu| r)``.

    A smooth joint mode deviates from the side conditions by ``O(|mu| r)``
    within distance ``r`` of a corner, so this ratio stays O(1) as ``r -> 0``.
    """
    if region.kind != "rounded_rectangle":
        raise ValidationError("corner arcs exist on rounded rectangles only")
    res = res or joint_bc_residual(region, mode)
    arcs = [k for k, s in enumerate(region.segments) if isinstance(s, ArcSeg)]
    raw = float(np.nanmax(res.per_segment[arcs]))
    scale = min(1.0, mode.mu_norm * region.params["r"])
    return raw / scale if scale > 0 else math.inf


# ----------------------------------------------------------------------------
# Classification


@dataclass
class CommutabilityVerdict:
    region_id: str
    directions: tuple
    verdict: str
    residual_max: float
    residual_mean: float
    variant: str
    evidence: dict = field(default_factory=dict)

    def to_json(self):
        return {
            "region_id": self.region_id,
            "directions": [list(map(float, d)) for d in self.directions],
            "verdict": self.verdict,
            "residual_max": self.residual_max,
            "residual_mean": self.residual_mean,
            "variant": self.variant,
            "evidence": self.evidence,
        }


def _segment_constant(field_, samples, k):
    if field_.piecewise_constant:
        return True
    sel = samples.segment == k
    v = np.asarray(field_.at(samples.segment[sel], _arclength(field_, samples, sel)))
    return bool(np.ptp(np.abs(v)) < PARALLEL_TOL and np.ptp(np.angle(v)) < PARALLEL_TOL)


def _arclength(field_, samples, sel):
    return samples.arclength[sel]


def _probe_residuals(region, directions, variant, n_max, samples):
    modes = joint_modes_rectangle(region, _probe_lambdas(region), (0, n_max), (0, n_max), variant)
    stats = []
    for md in modes:
        res = joint_bc_residual(region, md, directions, samples)
        row = {"n": list(md.n), "mu": list(md.mu), "max": res.max, "l2": res.l2}
        if region.kind == "rounded_rectangle" and md.mu_norm > 0:
            row["corner_arc"] = corner_arc_residual(region, md, res)
        stats.append(row)
    return stats


def _probe_lambdas(region):
    """Side parameters for probe modes on the bounding box of any region."""
    if region.kind == "rectangle":
        try:
            return _rect_lambdas(region, None)
        except ValidationError:
            pass
    lx, ly = region.lambda_field("x"), region.lambda_field("y")
    sides = (0, 2, 4, 6) if region.kind == "rounded_rectangle" else (0, 0, 0, 0)
    off = region.segment_offsets()
    pick = lambda f, k: complex(f.at(k, off[k]))
    return tuple(pick(f, k) for f, k in zip((ly, lx, ly, lx), sides))


def classify_region(region: Region, directions=((1.0, 0.0), (0.0, 1.0)), variant="tensor_c4",
                    n_probe=3, n_per_segment=65) -> CommutabilityVerdict:
    """Decide whether ``l.p_R`` and ``m.p_R`` can be diagonalized jointly.

    Separable iff on every segment at most one of the two conditions applies
    (``n.l = 0`` or ``n.m = 0`` pointwise) and the applicable lambda is
    constant per segment. Segments carrying both conditions are listed with
    a flag for disagreeing lambda values.
    """
    rid = region.region_id
    if region.dim == 1:
        l = _unit(directions[0], 1)
        return CommutabilityVerdict(rid, (tuple(l), tuple(l)), "trivial_domain", 0.0, 0.0,
                                    variant, {"reason": "one-dimensional region"})
    l, m = _unit(directions[0]), _unit(directions[1])
    dirs = (tuple(l), tuple(m))
    if abs(abs(float(l @ m)) - 1) < PARALLEL_TOL:
        return CommutabilityVerdict(rid, dirs, "trivial_domain", 0.0, 0.0, variant,
                                    {"reason": "parallel directions define one operator"})

    samples = boundary_samples(region, n_per_segment)
    fl, fm = region.lambda_field(l), region.lambda_field(m)
    both, mismatch, varying = [], [], []
    for k in range(len(region.segments)):
        sel = samples.segment == k
        nl = np.abs(samples.normals[sel] @ l) > PARALLEL_TOL
        nm = np.abs(samples.normals[sel] @ m) > PARALLEL_TOL
        if np.any(nl & nm):
            both.append(k)
            vl = np.asarray(fl.at(samples.segment[sel], samples.arclength[sel]))
            vm = np.asarray(fm.at(samples.segment[sel], samples.arclength[sel]))
            if np.max(np.abs(vl - vm)) > PARALLEL_TOL:
                mismatch.append(k)
        for f, act in ((fl, nl), (fm, nm)):
            if np.any(act) and not _segment_constant(f, samples, k):
                varying.append(k)
    separable = not both and not varying
    evidence = {"both_conditions_segments": both, "lambda_mismatch_segments": mismatch,
                "nonconstant_lambda_segments": sorted(set(varying))}

    axis_pair = all(abs(abs(v[0]) - 1) < PARALLEL_TOL or abs(abs(v[1]) - 1) < PARALLEL_TOL
                    for v in (l, m))
    rmax = rmean = math.nan
    if axis_pair:
        probes = _probe_residuals(region, (l, m), variant, n_probe, samples)
        evidence["probes"] = probes
        vals = np.array([p["max"] for p in probes])
        rmax, rmean = float(vals.max()), float(vals.mean())
        if variant == "tensor_c4":
            alt = _probe_residuals(region, (l, m), "literal_c2", n_probe, samples)
            evidence["literal_c2_max"] = float(max(p["max"] for p in alt))
    verdict = "separable_parallelepiped" if separable else "incompatible_bc"
    return CommutabilityVerdict(rid, dirs, verdict, rmax, rmean, variant, evidence)


# ----------------------------------------------------------------------------
# Position and momentum


@dataclass(frozen=True)
class CommutatorWitness:
    commutes: bool
    dot: float
    commutator_norms: np.ndarray
    state_norms: np.ndarray

    @property
    def deviation(self):
        """Max of ``| ||[l.p_R, m.x] Psi|| - |l.m| ||Psi|| |``."""
        return float(np.max(np.abs(self.commutator_norms - abs(self.dot) * self.state_norms)))


def _line_state(iv, coeffs, s):
    """Doubled-space combination of line modes, unmasked (analytic) in ``s``."""
    e = np.zeros(np.shape(s), dtype=complex)
    o = np.zeros(np.shape(s), dtype=complex)
    for n, c in coeffs.items():
        md = build_mode(iv, n)
        ep = np.exp(1j * md.k * s)
        em = md.sigma * np.exp(-1j * md.k * s)
        e += c * (ep + em)
        o += c * (ep - em)
    return e, o


_FD6 = np.array([-1.0, 9.0, -45.0, 0.0, 45.0, -9.0, 1.0]) / 60.0


def _fd_s(f, s, step):
    """Sixth-order centered derivative of ``f(s)`` -> tuple of arrays."""
    vals = [f(s + j * step) for j in range(-3, 4)]
    return tuple(sum(w * v[c] for w, v in zip(_FD6, vals)) / step for c in range(len(vals[0])))


def position_momentum_commutes(l, m, region: Region | None = None, rng=None, n_states=10,
                               n_lines=24, n_per_line=48, n_modes=5, step=1e-3) -> CommutatorWitness:
    """Whether ``[l.p_R, m.x] = 0``, with a finite-difference witness.

    Random states are built line by line from eigenmodes of ``l.p_R`` so
    they satisfy its boundary conditions. The commutator is evaluated with
    sixth-order differences along ``l`` of both ``(m.x) Psi`` and ``Psi``;
    its norm equals ``|l.m| ||Psi||``.
    """
    region = region or Region.rectangle(1.0, 1.0)
    d = region.dim
    l, m = _unit(l, d), _unit(m, d)
    dot = float(l @ m)
    rng = rng if rng is not None else np.random.default_rng(0)
    lr = line_rule(region, l, n_lines)
    xg, wg = np.polynomial.legendre.leggauss(n_per_line)
    cnorm, snorm = [], []
    for _ in range(n_states):
        c2, s2 = 0.0, 0.0
        env = rng.normal(size=3)
        for wt, t, sec in zip(lr.weights, lr.anchors, lr.sections):
            a_t = 1.0 if d == 1 else float(np.exp(-(env[0] + env[1] * t) ** 2 / 4) * (1 + 0.3 * env[2] * t))
            for iv in sec.intervals:
                coeffs = {n: a_t * complex(*rng.normal(size=2)) / (1 + abs(n)) for n in range(-n_modes, n_modes + 1)}
                s = iv.x_minus + 0.5 * (xg + 1) * iv.length
                w = wt * 0.5 * iv.length * wg
                mx = lambda u: sec.point(u) @ m if d == 2 else sec.point(u) * float(m[0])
                psi = lambda u: _line_state(iv, coeffs, u)
                prod = lambda u: tuple(mx(u) * comp for comp in psi(u))
                dprod = _fd_s(prod, s, step)
                dpsi = _fd_s(psi, s, step)
                # l.p_R = -i sigma_1 d/ds swaps the components
                x_here = mx(s)
                comm = [-1j * (dprod[1] - x_here * dpsi[1]), -1j * (dprod[0] - x_here * dpsi[0])]
                e, o = psi(s)
                c2 += float(np.sum(w * (np.abs(comm[0]) ** 2 + np.abs(comm[1]) ** 2)))
                s2 += float(np.sum(w * (np.abs(e) ** 2 + np.abs(o) ** 2)))
        cnorm.append(math.sqrt(c2))
        snorm.append(math.sqrt(s2))
    return CommutatorWitness(abs(dot) < 1e-12, dot, np.array(cnorm), np.array(snorm))

"""Expectation values, boundary terms, Ehrenfest residuals and the uncertainty bound.

Every function takes either a grid ``WaveState`` (trapezoid sums, 2nd-order
stencils) or a closed-form ``FieldState`` (Gauss quadrature through line
sections and boundary segments). Densities are those of the physical
single-component field ``psi``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConsistencyError, DomainError, ValidationError
from .geometry import (as_direction, boundary_quadrature, line_rule, volume_quadrature)
from .momentum_modes import spectral_bilinear
from .state import FieldState, WaveState, _points, boundary_jets, grid_gradient

# default closed-form resolutions
N_LINES = 64
N_PER_LINE = 96
N_BOUNDARY = 512
INEQUALITY_EPS = 1e-8
TAIL_WARN = 1e-3


def _require_physical(state):
    if not state.physical:
        raise DomainError("observable is defined for physical states")


def _direction(state, direction):
    return as_direction(direction, state.region.dim)


# ----------------------------------------------------------------------------
# Closed-form quadrature helpers


def _volume(state, n_lines=N_LINES, n_per_line=N_PER_LINE):
    q = volume_quadrature(state.region, n_lines, n_per_line)
    pts = _points(q.points, state.region.dim)
    return pts, q.weights


def _boundary(state, n_points=N_BOUNDARY):
    q = boundary_quadrature(state.region, n_points)
    pts = _points(q.points, state.region.dim)
    return pts, q.normals.reshape(len(q), -1), q.weights, q.segment


# ----------------------------------------------------------------------------
# Grid helpers


def _grid_fields(state: WaveState, order=2):
    psi = state.scalar()
    return psi, grid_gradient(psi, state.grid, order)


def _grid_boundary_sum(state: WaveState, values_fn):
    """``sum_segments oint values_fn(idx, n, segment)`` with trapezoid weights.

    Returns the total and the per-segment list.
    """
    per = []
    for seg, idx, n, w in state.grid.boundary_pieces():
        per.append(np.sum(np.asarray(w)[..., None] * np.atleast_2d(values_fn(idx, n, seg)).reshape(
            np.size(w), -1), axis=0))
    per = np.array(per)
    return per.sum(axis=0), per


# ----------------------------------------------------------------------------
# First moments


def expect_position(state):
    """``<x>`` as a vector (density ``|psi|^2``)."""
    _require_physical(state)
    if isinstance(state, WaveState):
        rho = np.abs(state.scalar()) ** 2 * state.grid.weights
        return np.array([np.sum(rho * c) for c in state.grid.coords])
    pts, w = _volume(state)
    rho = w * np.abs(state(pts)) ** 2
    return rho @ pts


def expect_gradient_vector(state):
    """``int psi* (-i grad) psi`` per Cartesian component (complex)."""
    _require_physical(state)
    if isinstance(state, WaveState):
        psi, grads = _grid_fields(state)
        w = state.grid.weights
        return np.array([np.sum(w * np.conj(psi) * (-1j) * g) for g in grads])
    pts, w = _volume(state)
    return (w * np.conj(state(pts))) @ (-1j * state.gradient(pts))


def expect_gradient(state, direction):
    """``<-i l.grad>``; real part is ``<l.p_R>``, imaginary part ``<l.p_I>``."""
    return complex(expect_gradient_vector(state) @ _direction(state, direction))


def expect_pI_vector(state):
    """``-1/2 oint n |psi|^2 dS``."""
    _require_physical(state)
    if isinstance(state, WaveState):
        psi = state.scalar()
        tot, _ = _grid_boundary_sum(state, lambda idx, n, s: np.multiply.outer(
            np.abs(np.atleast_1d(psi[idx])) ** 2, n))
        return -0.5 * tot
    pts, nrm, w, _ = _boundary(state)
    return -0.5 * (w * np.abs(state(pts)) ** 2) @ nrm


def expect_pI(state, direction):
    return float(expect_pI_vector(state) @ _direction(state, direction))


def boundary_moment(state, weight_fn=None):
    """``oint n f |psi|^2 dS`` with ``f = weight_fn(points)`` (default 1)."""
    _require_physical(state)
    pts, nrm, w, _ = _boundary(state)
    f = 1.0 if weight_fn is None else weight_fn(pts)
    return (w * f * np.abs(state(pts)) ** 2) @ nrm


def expect_grad_potential(state, potential):
    """``<grad V>`` from the analytic gradient."""
    _require_physical(state)
    if isinstance(state, WaveState):
        pts = state.grid.points if state.grid.dim > 1 else state.grid.axes[0][..., None]
        rho = np.abs(state.scalar()) ** 2 * state.grid.weights
        return np.tensordot(rho, potential.gradient(pts), axes=rho.ndim)
    pts, w = _volume(state)
    return (w * np.abs(state(pts)) ** 2) @ potential.gradient(pts)


# ----------------------------------------------------------------------------
# Spectral route


@dataclass(frozen=True)
class SpectralEstimate:
    value: float
    raw: float
    tail: float
    n_modes: int
    n_lines: int
    warning: bool


def expect_pR_spectral(state: FieldState, direction, n_lines=N_LINES, n_modes=64,
                       rule="gauss", tail=True) -> SpectralEstimate:
    """``int dy0 sum_k k |<Phi_{y0,k}|psi>|^2`` over transverse lines.

    ``rule`` selects the transverse quadrature ("gauss" panels or "midpoint").
    The per-line sums include the asymptotic tail beyond ``n_modes``.
    """
    _require_physical(state)
    return _spectral_route(state, direction, None, n_lines, n_modes, rule, tail)


def _spectral_route(state, direction, m_dir, n_lines, n_modes, rule, tail):
    l = _direction(state, direction)
    lr = line_rule(state.region, l, n_lines, rule)
    total, raw, tl = 0j, 0j, 0j
    for wt, sec in zip(lr.weights, lr.sections):
        for iv in sec.intervals:
            f = lambda s, sec=sec: state(sec.point(s))
            if m_dir is None:
                g = f
            else:
                g = lambda s, sec=sec: (_points(sec.point(s), state.region.dim) @ m_dir) \
                    * state(sec.point(s))
            r = spectral_bilinear(f, g, iv, n_modes=n_modes, tail=tail)
            total += wt * r.value
            raw += wt * r.raw
            tl += wt * r.tail
    if m_dir is None:
        total, raw, tl = total.real, raw.real, tl.real
    warn = abs(tl) > TAIL_WARN * max(abs(total), 1e-300)
    return SpectralEstimate(total, raw, tl, n_modes, len(lr.weights), bool(warn))


# ----------------------------------------------------------------------------
# Boundary force and p_I rate


@dataclass(frozen=True)
class BoundaryForce:
    total: np.ndarray
    per_segment: np.ndarray


def _force_integrand(psi, grad, lap, n, gamma, dirichlet):
    """``gamma grad|psi|^2 + n (lap|psi|^2 - |grad psi|^2)`` at boundary points.

    ``grad`` has shape ``(P, d)``. On Dirichlet sides the gamma term is taken
    in its limiting form ``-2 Re(conj(d_n psi) grad psi)``.
    """
    g2 = np.sum(np.abs(grad) ** 2, axis=-1)
    normal_part = np.multiply.outer(g2 + 2 * np.real(np.conj(psi) * lap), n)
    if dirichlet:
        dn = grad @ n
        gamma_part = -2 * np.real(np.conj(dn)[..., None] * grad)
    elif gamma == 0:
        gamma_part = 0.0
    else:
        gamma_part = gamma * 2 * np.real(np.conj(psi)[..., None] * grad)
    return gamma_part + normal_part


def boundary_force(state, mass=1.0, gamma=None, order=2) -> BoundaryForce:
    """``F_B = (1/2m) oint [gamma grad|psi|^2 + n (lap|psi|^2 - |grad psi|^2)] dS``.

    ``gamma`` overrides the region's per-segment Robin coefficients. On grids
    ``order`` sets the accuracy of the (one-sided) boundary stencils.
    """
    _require_physical(state)
    region = state.region
    nseg = len(region.segments)
    gammas = [region.gamma(k) for k in range(nseg)] if gamma is None else list(gamma)
    if isinstance(state, WaveState):
        per = np.array([
            jet.weights @ _force_integrand(jet.psi, jet.grad, jet.lap, jet.normal,
                                           gammas[jet.segment], math.isinf(gammas[jet.segment]))
            for jet in boundary_jets(state.scalar(), state.grid, order)])
        return BoundaryForce(per.sum(axis=0) / (2 * mass), per / (2 * mass))
    pts, nrm, w, seg = _boundary(state)
    psi, grad, lap = state(pts), state.gradient(pts), state.lap(pts)
    per = np.zeros((nseg, region.dim))
    for k in range(nseg):
        sel = seg == k
        if not np.any(sel):
            continue
        vals = np.stack([_force_integrand(psi[i:i + 1], grad[i:i + 1], lap[i:i + 1], nrm[i],
                                          gammas[k], math.isinf(gammas[k]))[0]
                         for i in np.flatnonzero(sel)])
        per[k] = w[sel] @ vals
    return BoundaryForce(per.sum(axis=0) / (2 * mass), per / (2 * mass))


def pI_rate(state, mass=1.0):
    """``-1/2 oint n d|psi|^2/dt dS`` from the continuity equation: ``(1/2m) oint n Im(psi* lap psi)``."""
    _require_physical(state)
    if isinstance(state, WaveState):
        tot = sum(np.sum(jet.weights * np.imag(np.conj(jet.psi) * jet.lap)) * jet.normal
                  for jet in boundary_jets(state.scalar(), state.grid))
        return tot / (2 * mass)
    pts, nrm, w, _ = _boundary(state)
    return (w * np.imag(np.conj(state(pts)) * state.lap(pts))) @ nrm / (2 * mass)


# ----------------------------------------------------------------------------
# Ehrenfest residuals on recorded runs


def _centered(series, dt):
    series = np.asarray(series)
    if len(series) < 3:
        raise ValueError("need at least 3 recorded steps for a centered derivative")
    return (series[2:] - series[:-2]) / (2 * dt)


def ehrenfest_position_residual(run, direction):
    """``|m d<x>/dt - <p_R>|`` at interior record times (centered differences)."""
    l = np.atleast_1d(np.asarray(direction, dtype=float))
    x = run.x @ l
    p = run.p_R @ l
    return np.abs(run.mass * _centered(x, run.dt) - p[1:-1])


def ehrenfest_momentum_residual(run, direction, include_force=True, segments=None):
    """``|d<p_R>/dt + <grad V> - F_B|`` at interior record times.

    ``segments`` restricts F_B to a subset of boundary segments;
    ``include_force=False`` is the ablation without the boundary force.
    """
    l = np.atleast_1d(np.asarray(direction, dtype=float))
    dp = _centered(run.p_R @ l, run.dt)
    gv = (run.grad_V @ l)[1:-1]
    if not include_force:
        F = 0.0
    elif segments is None:
        F = (run.force @ l)[1:-1]
    else:
        F = (run.force_segments[:, list(segments), :].sum(axis=1) @ l)[1:-1]
    return np.abs(dp + gv - F)


def pI_rate_residual(run, direction):
    """``|d<p_I>/dt - (-1/2 oint n d|psi|^2/dt)|`` at interior record times."""
    l = np.atleast_1d(np.asarray(direction, dtype=float))
    return np.abs(_centered(run.p_I @ l, run.dt) - (run.p_I_rate @ l)[1:-1])


def impulse(run, direction, segments=None, window=None):
    """Trapezoid time integral of ``F_B`` (optionally per segment and time window)."""
    l = np.atleast_1d(np.asarray(direction, dtype=float))
    if segments is None:
        F = run.force @ l
    else:
        F = run.force_segments[:, list(segments), :].sum(axis=1) @ l
    t = run.times
    if window is not None:
        sel = (t >= window[0]) & (t <= window[1])
        F, t = F[sel], t[sel]
    return float(np.trapezoid(F, t))


# ----------------------------------------------------------------------------
# Correlator and uncertainty relation


@dataclass(frozen=True)
class Correlator:
    """``<(l.p_R)(m.x)>`` by the identity route and the spectral route."""

    identity: complex
    spectral: complex
    difference: float
    n_modes: int


def _boundary_terms(state, m_dir):
    """``oint n |psi|^2`` and ``oint n (m.x) |psi|^2``."""
    pts, nrm, w, _ = _boundary(state)
    rho = w * np.abs(state(pts)) ** 2
    return rho @ nrm, (rho * (pts @ m_dir)) @ nrm


def _x_gradient(state, m_dir):
    """``<(m.x)(-i grad)>`` per Cartesian component."""
    pts, w = _volume(state)
    return (w * np.conj(state(pts)) * (pts @ m_dir)) @ (-1j * state.gradient(pts))


def pR_position_correlator(state: FieldState, l_dir, m_dir, n_modes=128, n_lines=N_LINES,
                           tol=1e-4, check=True) -> Correlator:
    """Dual-route ``<(l.p_R)(m.x)>``.

    Identity route: ``<(m.x)(-i l.grad)> - i (l.m) + (i/2) oint (n.l)(m.x)|psi|^2``.
    Spectral route: per-line sums ``sum_k k conj(c_k[psi]) c_k[(m.x) psi]``.
    Disagreement beyond ``tol`` raises a consistency error when ``check``.
    """
    _require_physical(state)
    l, m = _direction(state, l_dir), _direction(state, m_dir)
    _, nx = _boundary_terms(state, m)
    ident = complex(_x_gradient(state, m) @ l - 1j * (l @ m) + 0.5j * (nx @ l))
    spec = complex(_spectral_route(state, l, m, n_lines, n_modes, "gauss", True).value)
    diff = abs(ident - spec)
    if check and diff > tol:
        raise ConsistencyError(f"correlator routes disagree by {diff:.3e}",
                               invariant="correlator_routes")
    return Correlator(ident, spec, diff, n_modes)


@dataclass
class ObservableReport:
    """Named scalar terms with metadata and pass/fail flags."""

    terms: dict = field(default_factory=dict)
    meta: dict = field(default_factory=dict)
    passed: dict = field(default_factory=dict)

    def __getitem__(self, key):
        return self.terms[key]

    def finite(self):
        return all(np.all(np.isfinite(v)) for v in self.terms.values())

    def to_json(self):
        def conv(v):
            if isinstance(v, (complex, np.complexfloating)):
                return {"re": float(v.real), "im": float(v.imag)}
            if isinstance(v, np.ndarray):
                return [conv(x) for x in v.tolist()]
            if isinstance(v, (np.floating, np.integer)):
                return v.item()
            if isinstance(v, (list, tuple)):
                return [conv(x) for x in v]
            if isinstance(v, dict):
                return {k: conv(x) for k, x in v.items()}
            return v

        return json.dumps({"terms": conv(self.terms), "meta": conv(self.meta),
                           "passed": conv(self.passed)}, indent=2, sort_keys=True)


def gamma_boundary(state: FieldState):
    """``<gamma>_dOmega = oint gamma |psi|^2``.

    On Dirichlet sides the product is taken as ``-Re(psi* d_n psi)``, its
    value under the Robin condition, which vanishes for states obeying it.
    """
    pts, nrm, w, seg = _boundary(state)
    psi = state(pts)
    out = 0.0
    for k in range(len(state.region.segments)):
        sel = seg == k
        if not np.any(sel):
            continue
        g = state.region.gamma(k)
        if math.isinf(g):
            dn = np.sum(nrm[sel] * state.gradient(pts[sel]), axis=-1)
            out += float(np.sum(w[sel] * -np.real(np.conj(psi[sel]) * dn)))
        else:
            out += float(g * np.sum(w[sel] * np.abs(psi[sel]) ** 2))
    return out


def uncertainty_report(state: FieldState, m_dir, basis=None, mass=1.0, n_modes=64,
                       n_lines=N_LINES, spectral=True) -> ObservableReport:
    """All terms of the kinetic-energy uncertainty inequality summed over ``basis``.

    LHS ``2m<T> = int |grad psi|^2 + <gamma>``; RHS is the sum of the
    anticommutator bracket, the geometric boundary bracket, ``<gamma>``,
    ``<p_R>^2`` and ``<p_I>^2``. The anticommutator uses the identity route;
    the spectral route is reported alongside when ``spectral``.
    """
    _require_physical(state)
    d = state.region.dim
    m = _direction(state, m_dir)
    basis = np.eye(d) if basis is None else np.array([as_direction(b, d) for b in basis])

    pts, w = _volume(state)
    psi, grad = state(pts), state.gradient(pts)
    rho = w * np.abs(psi) ** 2
    norm2 = float(rho.sum())
    if not norm2 > 0:
        raise DomainError("state has zero norm on the quadrature")
    xm = pts @ m
    x_mean = float(rho @ xm) / norm2
    var = float(rho @ xm ** 2) / norm2 - x_mean ** 2
    if not var > 1e-24:
        raise DomainError("position spread of the state is degenerate (Delta x ~ 0)")
    dx = math.sqrt(var)

    grad_vec = (w * np.conj(psi)) @ (-1j * grad)
    xgrad_vec = (w * np.conj(psi) * xm) @ (-1j * grad)
    n_b, nx_b = _boundary_terms(state, m)
    gam = gamma_boundary(state)
    grad_sq = float(np.sum(w * np.sum(np.abs(grad) ** 2, axis=-1)))
    lhs = grad_sq + gam

    per = {"direction": [], "grad": [], "p_R": [], "p_I": [], "kinetic_k": [],
           "n_dot_k": [], "n_dot_k_xm": [], "anticommutator": [], "anticommutator_spectral": [],
           "bracket_anticommutator": [], "bracket_boundary": []}
    rhs = gam
    tail_warn = False
    for k in basis:
        g = complex(grad_vec @ k)
        pR, pI = g.real, g.imag
        nk, nkx = float(n_b @ k), float(nx_b @ k)
        anti = float(np.real(xgrad_vec @ k))
        if spectral:
            est = _spectral_route(state, k, m, n_lines, n_modes, "gauss", True)
            anti_s = float(np.real(est.value))
            tail_warn |= est.warning
        else:
            anti_s = float("nan")
        b1 = anti - x_mean * pR
        b2 = float(k @ m) - nkx + x_mean * nk
        rhs += b1 ** 2 / var + b2 ** 2 / (4 * var) + pR ** 2 + pI ** 2
        per["direction"].append(k)
        per["grad"].append(g)
        per["p_R"].append(pR)
        per["p_I"].append(pI)
        per["kinetic_k"].append(float(np.sum(w * np.abs(grad @ k) ** 2)) / (2 * mass))
        per["n_dot_k"].append(nk)
        per["n_dot_k_xm"].append(nkx)
        per["anticommutator"].append(anti)
        per["anticommutator_spectral"].append(anti_s)
        per["bracket_anticommutator"].append(b1)
        per["bracket_boundary"].append(b2)

    if not spectral:
        del per["anticommutator_spectral"]
    terms = {"mean_xm": x_mean, "delta_xm": dx, "norm": norm2, "T": lhs / (2 * mass),
             "gamma_boundary": gam, "lhs": lhs, "rhs": rhs, "slack": lhs - rhs}
    terms.update({k: np.array(v) for k, v in per.items()})
    meta = {"mass": mass, "m_dir": m, "n_modes": n_modes, "n_lines": n_lines,
            "n_per_line": N_PER_LINE, "n_boundary": N_BOUNDARY, "tail_warning": tail_warn,
            "eps": INEQUALITY_EPS}
    passed = {"inequality": bool(lhs - rhs >= -INEQUALITY_EPS)}
    return ObservableReport(terms, meta, passed)

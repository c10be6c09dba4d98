"""Two-component wave functions on grids and in closed form.

Grid states live on uniform grids over intervals and rectangles with nodes on
the boundary. Closed-form states (``FieldState``) are evaluable anywhere and
serve general regions through line and boundary quadrature.

Physical states are embedded as ``psi_e = psi_o = psi / sqrt(2)`` so the
doubled norm equals the single-component norm.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import Callable

import numpy as np

from .errors import DomainError, ResolutionError, ValidationError
from .geometry import Region, boundary_quadrature, volume_quadrature

SQRT2 = math.sqrt(2.0)


# ----------------------------------------------------------------------------
# Grids


@dataclass(frozen=True, eq=False)
class Grid:
    """Uniform tensor grid with nodes on the boundary of an interval/rectangle."""

    region: Region
    axes: tuple
    h: float

    @property
    def dim(self):
        return len(self.axes)

    @property
    def shape(self):
        return tuple(len(a) for a in self.axes)

    def axis_weights(self, i):
        w = np.full(len(self.axes[i]), self.h)
        w[0] = w[-1] = 0.5 * self.h
        return w

    @property
    def weights(self):
        """Trapezoid weights."""
        w = self.axis_weights(0)
        for i in range(1, self.dim):
            w = np.multiply.outer(w, self.axis_weights(i))
        return w

    @property
    def coords(self):
        """Coordinate arrays, one per axis, broadcast to the grid shape."""
        return np.meshgrid(*self.axes, indexing="ij")

    @property
    def points(self):
        return np.stack(self.coords, axis=-1)

    def boundary_pieces(self):
        """Per boundary segment: (segment index, index tuple, normal, weights).

        Rectangle segments follow the region order: bottom, right, top, left.
        """
        if self.dim == 1:
            n = self.shape[0]
            return [(0, (0,), np.array([-1.0]), 1.0), (1, (n - 1,), np.array([1.0]), 1.0)]
        nx, ny = self.shape
        wx, wy = self.axis_weights(0), self.axis_weights(1)
        allx, ally = np.arange(nx), np.arange(ny)
        return [
            (0, (allx, np.zeros(nx, int)), np.array([0.0, -1.0]), wx),
            (1, (np.full(ny, nx - 1), ally), np.array([1.0, 0.0]), wy),
            (2, (allx, np.full(nx, ny - 1)), np.array([0.0, 1.0]), wx),
            (3, (np.zeros(ny, int), ally), np.array([-1.0, 0.0]), wy),
        ]


def make_grid(region: Region, h) -> Grid:
    """Grid of spacing ``h``; the region's extents must be integer multiples of h."""
    if region.kind == "interval_1d":
        spans = [(region.params["a"], region.params["b"])]
    elif region.kind == "rectangle":
        ox, oy = region.params["origin"]
        spans = [(ox, ox + region.params["lx"]), (oy, oy + region.params["ly"])]
    else:
        raise DomainError(f"grids support intervals and rectangles, not {region.kind}")
    axes = []
    for lo, hi in spans:
        n = round((hi - lo) / h)
        if n < 2 or abs(n * h - (hi - lo)) > 1e-9 * (hi - lo):
            raise ValueError(f"extent {hi - lo} is not an integer multiple of h = {h}")
        axes.append(np.linspace(lo, hi, n + 1))
    return Grid(region, tuple(axes), float(h))


def fd_weights(offsets, deriv):
    """Finite-difference weights on integer ``offsets`` for the ``deriv``-th derivative (h = 1)."""
    return _fd_weights(tuple(int(o) for o in offsets), int(deriv))


@lru_cache(maxsize=None)
def _fd_weights(offsets, deriv):
    offsets = np.asarray(offsets, dtype=float)
    n = len(offsets)
    A = np.vander(offsets, n, increasing=True).T
    b = np.zeros(n)
    b[deriv] = math.factorial(deriv)
    return np.linalg.solve(A, b)


@lru_cache(maxsize=None)
def _stencil_plan(n, deriv, order):
    half, n_edge = order // 2, order + deriv
    if n < n_edge:
        raise ResolutionError(f"need at least {n_edge} nodes along each axis",
                              invariant="resolution")
    centered = fd_weights(np.arange(-half, half + 1), deriv)
    edges = []
    for i in list(range(half)) + list(range(n - half, n)):
        lo = 0 if i < half else n - n_edge
        idx = np.arange(lo, lo + n_edge)
        edges.append((i, idx, fd_weights(idx - i, deriv)))
    return half, centered, edges


def axis_derivative(f, h, axis, deriv=1, order=2):
    """``d^deriv f / dx_axis^deriv`` at the given (even) order of accuracy.

    Centered ``order+1``-point stencils where they fit, otherwise a window of
    ``order+deriv`` points pushed against the boundary.
    """
    if order % 2 or order < 2:
        raise ValueError("order must be an even integer >= 2")
    f = np.moveaxis(np.asarray(f), axis, 0)
    n = f.shape[0]
    half, wc, edges = _stencil_plan(n, deriv, order)
    out = np.empty_like(f, dtype=np.result_type(f, float))
    out[half:n - half] = sum(w * f[half + o:n - half + o]
                             for w, o in zip(wc, range(-half, half + 1)))
    for i, idx, we in edges:
        out[i] = np.tensordot(we, f[idx], axes=1)
    return np.moveaxis(out / h ** deriv, 0, axis)


def edge_derivative(f, h, axis, end, deriv=1, order=2):
    """One-sided derivative at the first (``end=0``) or last (``end=-1``) node along ``axis``."""
    n_edge = order + deriv
    f = np.moveaxis(np.asarray(f), axis, 0)
    if f.shape[0] < n_edge:
        raise ResolutionError(f"need at least {n_edge} nodes along each axis",
                              invariant="resolution")
    offsets = np.arange(n_edge) if end == 0 else -np.arange(n_edge)[::-1]
    rows = f[:n_edge] if end == 0 else f[-n_edge:]
    return np.tensordot(fd_weights(offsets, deriv), rows, axes=1) / h ** deriv


def grid_gradient(f, grid: Grid, order=2):
    """Gradient components: centered inside, one-sided at the boundary nodes."""
    return [axis_derivative(f, grid.h, ax, 1, order) for ax in range(grid.dim)]


def second_derivative(f, grid: Grid, axis, order=2):
    """``d^2 f/dx_axis^2``; one-sided ``order+2``-point stencils at the ends."""
    return axis_derivative(f, grid.h, axis, 2, order)


@dataclass(frozen=True)
class BoundaryJet:
    """Field, gradient ``(P, d)`` and Laplacian at the nodes of one boundary side."""

    segment: int
    normal: np.ndarray
    weights: np.ndarray
    psi: np.ndarray
    grad: np.ndarray
    lap: np.ndarray


# normal axis and end (0 = low, -1 = high) of each side
_SIDES = {1: ((0, 0), (0, -1)), 2: ((1, 0), (0, -1), (1, -1), (0, 0))}


def boundary_jets(f, grid: Grid, order=2):
    """Derivatives at boundary nodes from thin slabs next to each side.

    Matches the full-grid stencils of :func:`axis_derivative` at those nodes.
    """
    f = np.asarray(f)
    jets = []
    for (seg, _, n, w), (ax, end) in zip(grid.boundary_pieces(), _SIDES[grid.dim]):
        d1 = edge_derivative(f, grid.h, ax, end, 1, order)
        d2 = edge_derivative(f, grid.h, ax, end, 2, order)
        edge = np.atleast_1d(np.take(f, end, axis=ax))
        grad = np.zeros(edge.shape + (grid.dim,), dtype=complex)
        grad[..., ax] = d1
        lap = np.atleast_1d(d2).astype(complex)
        if grid.dim == 2:
            other = 1 - ax
            grad[..., other] = axis_derivative(edge, grid.h, 0, 1, order)
            lap = lap + axis_derivative(edge, grid.h, 0, 2, order)
        jets.append(BoundaryJet(seg, n, np.atleast_1d(np.asarray(w, dtype=float)), edge,
                                grad, lap))
    return jets


def grid_laplacian(f, grid: Grid, order=2):
    return sum(second_derivative(f, grid, ax, order) for ax in range(grid.dim))


# ----------------------------------------------------------------------------
# Grid states


@dataclass(frozen=True, eq=False)
class WaveState:
    """Doubled-space state sampled on a grid."""

    grid: Grid
    e: np.ndarray
    o: np.ndarray

    @property
    def region(self):
        return self.grid.region

    @property
    def physical(self):
        return bool(np.array_equal(self.e, self.o))

    def scalar(self):
        """Single-component ``psi`` of a physical state."""
        if not self.physical:
            raise DomainError("state is not in the physical sector")
        return SQRT2 * self.e

    def inner(self, other: "WaveState"):
        w = self.grid.weights
        return complex(np.sum(w * (np.conj(self.e) * other.e + np.conj(self.o) * other.o)))

    def norm(self):
        return math.sqrt(self.inner(self).real)

    def normalize(self):
        nrm = self.norm()
        if nrm == 0:
            raise ValidationError("cannot normalize the zero state")
        return WaveState(self.grid, self.e / nrm, self.o / nrm)

    def to_rows(self):
        """Columnar rows (flat index, Re e, Im e, Re o, Im o)."""
        e, o = self.e.ravel(), self.o.ravel()
        return np.column_stack([np.arange(e.size), e.real, e.imag, o.real, o.imag])


def embed_physical(grid: Grid, psi) -> WaveState:
    """Embed a scalar field as ``(psi, psi)/sqrt(2)``."""
    psi = np.asarray(psi, dtype=complex)
    if psi.shape != grid.shape:
        raise ValueError(f"field shape {psi.shape} does not match grid {grid.shape}")
    if not np.all(np.isfinite(psi)):
        raise ValidationError("field has non-finite samples")
    half = psi / SQRT2
    return WaveState(grid, half, half.copy())


@dataclass(frozen=True)
class CurrentField:
    j: tuple
    mass: float


def probability_current(state, mass=1.0) -> CurrentField:
    """``j = Im(psi* grad psi) / m`` on the grid (physical states only)."""
    psi = state.scalar()
    grads = grid_gradient(psi, state.grid)
    return CurrentField(tuple(np.imag(np.conj(psi) * g) / mass for g in grads), float(mass))


def boundary_flux(state, mass=1.0):
    """``oint |n.j| dS`` over the boundary (trapezoid along each side)."""
    if isinstance(state, FieldState):
        return state.boundary_flux(mass)
    total = 0.0
    for jet in boundary_jets(state.scalar(), state.grid):
        nj = np.imag(np.conj(jet.psi) * (jet.grad @ jet.normal)) / mass
        total += float(np.sum(jet.weights * np.abs(nj)))
    return total


# ----------------------------------------------------------------------------
# Closed-form states


def _points(x, dim):
    x = np.asarray(x, dtype=float)
    if dim == 1 and (x.ndim == 0 or x.shape[-1] != 1):
        x = x[..., None]
    return x


@dataclass(frozen=True, eq=False)
class FieldState:
    """State given by callables on points of shape ``(..., d)``.

    With ``odd=None`` the state is physical and ``psi`` is the single
    component field. Otherwise ``psi`` and ``odd`` are ``psi_e``, ``psi_o``.
    ``grad`` returns ``(..., d)``; ``laplacian`` is optional.
    """

    region: Region
    psi: Callable
    grad: Callable | None = None
    laplacian: Callable | None = None
    odd: Callable | None = None
    scale: complex = 1.0

    @property
    def dim(self):
        return self.region.dim

    @property
    def physical(self):
        return self.odd is None

    def __call__(self, x):
        return self.scale * self.psi(_points(x, self.dim))

    def components(self, x):
        x = _points(x, self.dim)
        if self.odd is None:
            v = self.scale * self.psi(x) / SQRT2
            return v, v
        return self.scale * self.psi(x), self.scale * self.odd(x)

    def gradient(self, x, step=1e-5):
        x = _points(x, self.dim)
        if self.grad is not None:
            return self.scale * self.grad(x)
        if not self.physical:
            raise DomainError("gradient of a non-physical closed-form state needs grad")
        out = []
        for i in range(self.dim):
            dx = np.zeros(self.dim)
            dx[i] = step
            f = self.psi
            out.append((-f(x + 2 * dx) + 8 * f(x + dx) - 8 * f(x - dx) + f(x - 2 * dx))
                       / (12 * step))
        return self.scale * np.stack(out, axis=-1)

    def lap(self, x, step=1e-4):
        x = _points(x, self.dim)
        if self.laplacian is not None:
            return self.scale * self.laplacian(x)
        total = 0
        for i in range(self.dim):
            dx = np.zeros(self.dim)
            dx[i] = step
            f = self.psi
            total = total + (-f(x + 2 * dx) + 16 * f(x + dx) - 30 * f(x) + 16 * f(x - dx)
                             - f(x - 2 * dx)) / (12 * step ** 2)
        return self.scale * total

    def norm(self, n_lines=64, n_per_line=96):
        q = volume_quadrature(self.region, n_lines, n_per_line)
        e, o = self.components(q.points)
        return math.sqrt(float(np.sum(q.weights * (np.abs(e) ** 2 + np.abs(o) ** 2))))

    def normalize(self, **kw):
        nrm = self.norm(**kw)
        if nrm == 0:
            raise ValidationError("cannot normalize the zero state")
        return replace(self, scale=self.scale / nrm)

    def current(self, x, mass=1.0):
        if not self.physical:
            raise DomainError("current is defined for physical states")
        psi = self(x)
        return np.imag(np.conj(psi)[..., None] * self.gradient(x)) / mass

    def boundary_flux(self, mass=1.0, n_points=512):
        q = boundary_quadrature(self.region, n_points)
        pts = _points(q.points, self.dim)
        nrm = q.normals.reshape(len(q), -1)
        nj = np.sum(nrm * self.current(pts, mass), axis=-1)
        return float(np.sum(q.weights * np.abs(nj)))

    def on_grid(self, grid: Grid) -> WaveState:
        pts = grid.points if grid.dim > 1 else grid.axes[0][..., None]
        e, o = self.components(pts)
        return WaveState(grid, np.asarray(e, complex), np.asarray(o, complex))


# ----------------------------------------------------------------------------
# Catalog


@dataclass(frozen=True)
class GaussianTerm:
    """``amp * exp(-|x-c|^2/(2 w^2) + i p.x)``."""

    amp: complex
    center: tuple
    width: float
    momentum: tuple


def _gauss_parts(terms, x):
    vals, grads, laps = 0, 0, 0
    for t in terms:
        c, p = np.asarray(t.center, float), np.asarray(t.momentum, float)
        d = x - c
        g = t.amp * np.exp(-np.sum(d * d, axis=-1) / (2 * t.width ** 2) + 1j * (x @ p))
        q = -d / t.width ** 2 + 1j * p
        vals = vals + g
        grads = grads + g[..., None] * q
        laps = laps + g * (np.sum(q * q, axis=-1) - x.shape[-1] / t.width ** 2)
    return vals, grads, laps


def gaussian_state(region: Region, terms) -> FieldState:
    """Physical superposition of Gaussian packets with analytic derivatives."""
    terms = tuple(terms)
    return FieldState(
        region,
        psi=lambda x: _gauss_parts(terms, x)[0],
        grad=lambda x: _gauss_parts(terms, x)[1],
        laplacian=lambda x: _gauss_parts(terms, x)[2],
    )


def gaussian_packet(region: Region, center, width, momentum) -> FieldState:
    return gaussian_state(region, [GaussianTerm(1.0, tuple(np.atleast_1d(center)), float(width),
                                                tuple(np.atleast_1d(momentum)))]).normalize()


def _bounding_box(region):
    if region.dim == 1:
        return np.array([region.params["a"]]), np.array([region.params["b"]])
    q = boundary_quadrature(region, 64)
    return q.points.min(axis=0), q.points.max(axis=0)


def random_smooth_state(region: Region, rng: np.random.Generator, n_terms=3,
                        max_momentum=4.0) -> FieldState:
    """Random normalized superposition of Gaussians centred inside the region."""
    lo, hi = _bounding_box(region)
    size = float(np.min(hi - lo))
    terms = []
    while len(terms) < n_terms:
        c = lo + (hi - lo) * rng.uniform(size=lo.shape)
        inside = region.contains(c if region.dim == 1 else c[None, :])
        if not np.all(inside):
            continue
        w = size * rng.uniform(0.2, 0.45)
        p = rng.uniform(-max_momentum, max_momentum, size=lo.shape)
        amp = complex(rng.normal(), rng.normal())
        terms.append(GaussianTerm(amp, tuple(c), w, tuple(p)))
    return gaussian_state(region, terms).normalize()


def mode_state(region: Region, mode) -> FieldState:
    """A 1D momentum eigenmode as a (non-physical) closed-form state."""

    def comp(i):
        return lambda x: mode.components(x[..., 0])[i]

    def grad(x):
        return mode.derivative(x[..., 0])[0][..., None]

    return FieldState(region, psi=comp(0), odd=comp(1), grad=grad)

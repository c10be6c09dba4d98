"""Robin Hamiltonian on interval/rectangle grids and Crank-Nicolson evolution.

The Laplacian uses the 3-point stencil per axis. At a Robin end the ghost
node is eliminated through the centered boundary condition, e.g. at the
left end ``psi_{-1} = psi_1 - 2 h gamma psi_0``; Dirichlet nodes are dropped.
Conjugating with the square roots of the trapezoid weights makes the
resulting matrix exactly symmetric, so ``u = sqrt(W) psi`` is the working
vector and ``|u|^2`` is the trapezoid norm.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import DomainError, NumericalError, ValidationError
from .geometry import Region
from .potentials import Zero
from . import observables as obs
from .state import Grid, WaveState, boundary_flux, embed_physical

SOLVE_TOL = 1e-12

# (low end, high end) segment indices per axis of a rectangle
_RECT_ENDS = ((3, 1), (0, 2))


@dataclass(frozen=True, eq=False)
class HamiltonianOperator:
    grid: Grid
    mass: float
    V: np.ndarray
    gammas: tuple
    matrix: sp.csr_matrix
    active: np.ndarray
    sqrt_w: np.ndarray

    def reduce(self, psi):
        return self.sqrt_w[self.active] * np.asarray(psi)[self.active]

    def expand(self, u):
        psi = np.zeros(self.grid.shape, dtype=complex)
        psi[self.active] = u / self.sqrt_w[self.active]
        return psi

    def energy(self, psi):
        u = self.reduce(psi)
        return float(np.real(np.vdot(u, self.matrix @ u)) / np.real(np.vdot(u, u)))

    def eigh(self, k=6):
        """Lowest ``k`` eigenpairs (dense; small grids only)."""
        w, v = np.linalg.eigh(self.matrix.toarray())
        return w[:k], [self.expand(v[:, i]) for i in range(k)]


def _axis_operator(n_nodes, h, g_lo, g_hi):
    """Symmetrized 1D ``d^2/dx^2`` with Robin/Dirichlet ends; returns (matrix, active)."""
    main = np.full(n_nodes, -2.0, dtype=complex)
    off = np.ones(n_nodes - 1, dtype=complex)
    upper, lower = off.copy(), off.copy()
    active = np.ones(n_nodes, dtype=bool)
    for end, g in ((0, g_lo), (n_nodes - 1, g_hi)):
        if g is None or (np.isreal(g) and math.isinf(float(np.real(g)))):
            active[end] = False
            continue
        main[end] = -2.0 - 2.0 * h * g
        if end == 0:
            upper[0] = 2.0
        else:
            lower[-1] = 2.0
    D2 = sp.diags([lower, main, upper], [-1, 0, 1], format="csr") / h ** 2
    w = np.full(n_nodes, h)
    w[0] = w[-1] = 0.5 * h
    s = np.sqrt(w)
    S = sp.diags(s) @ D2 @ sp.diags(1 / s)
    idx = np.flatnonzero(active)
    return S[idx][:, idx].tocsr(), active


def build_hamiltonian(grid: Grid, mass=1.0, potential=None, gamma=None,
                      allow_complex=False) -> HamiltonianOperator:
    """Assemble ``H = -(1/2m) Lap + V`` on the grid.

    ``gamma`` overrides the region's Robin coefficients per segment
    (``inf`` for Dirichlet). Complex values raise unless ``allow_complex``
    is set, which exists for negative tests of the Hermiticity check.
    """
    region = grid.region
    nseg = len(region.segments)
    if gamma is None:
        gammas = tuple(region.gamma(k) for k in range(nseg))
    else:
        gammas = tuple(gamma) if np.ndim(gamma) else (gamma,) * nseg
        if len(gammas) != nseg:
            raise ValidationError(f"expected {nseg} gamma values, got {len(gammas)}")
    for g in gammas:
        if np.iscomplexobj(g) and np.imag(g) != 0 and not allow_complex:
            raise ValidationError("complex gamma breaks self-adjointness of H")
        if np.isnan(g):
            raise ValidationError("gamma is NaN")
    if not mass > 0:
        raise ValidationError("mass must be positive")

    potential = potential or Zero()
    pts = grid.points if grid.dim > 1 else grid.axes[0][..., None]
    V = np.asarray(potential.value(pts), dtype=float)
    if not np.all(np.isfinite(V)):
        raise ValidationError("potential has non-finite samples")

    ends = ((0, 1),) if grid.dim == 1 else _RECT_ENDS
    ops, masks = [], []
    for ax, (lo, hi) in enumerate(ends):
        S, act = _axis_operator(grid.shape[ax], grid.h, gammas[lo], gammas[hi])
        ops.append(S)
        masks.append(act)
    if grid.dim == 1:
        lap, active = ops[0], masks[0]
    else:
        lap = sp.kron(ops[0], sp.identity(ops[1].shape[0])) + \
            sp.kron(sp.identity(ops[0].shape[0]), ops[1])
        active = np.multiply.outer(masks[0], masks[1])
    H = (-0.5 / mass) * lap + sp.diags(V[active].astype(complex))
    return HamiltonianOperator(grid, float(mass), V, gammas, H.tocsr(), active,
                               np.sqrt(grid.weights))


def hermiticity_residual(H) -> float:
    """Largest entry of ``|H - H^dagger|``."""
    M = H.matrix if isinstance(H, HamiltonianOperator) else sp.csr_matrix(H)
    D = (M - M.conj().T).tocoo()
    return float(np.max(np.abs(D.data))) if D.nnz else 0.0


class CrankNicolson:
    """Cached factorization of ``1 + i dt H / 2``."""

    def __init__(self, H: HamiltonianOperator, dt):
        if not dt > 0:
            raise ValidationError("dt must be positive")
        self.H, self.dt = H, float(dt)
        n = H.matrix.shape[0]
        I = sp.identity(n, dtype=complex, format="csc")
        half = 0.5j * self.dt * H.matrix.tocsc()
        self.A = (I + half).tocsc()
        self.B = (I - half).tocsr()
        self.lu = spla.splu(self.A, permc_spec="MMD_AT_PLUS_A")

    def step_reduced(self, u):
        b = self.B @ u
        u1 = self.lu.solve(b)
        res = np.linalg.norm(self.A @ u1 - b) / max(np.linalg.norm(b), 1e-300)
        if res > SOLVE_TOL * 100:
            raise NumericalError(f"Crank-Nicolson solve residual {res:.3e}",
                                 invariant="linear_solve")
        return u1


def step_crank_nicolson(state: WaveState, H: HamiltonianOperator, dt) -> WaveState:
    """One Crank-Nicolson step of a physical grid state."""
    if state.grid is not H.grid:
        raise DomainError("state and Hamiltonian live on different grids")
    cn = CrankNicolson(H, dt)
    return embed_physical(H.grid, H.expand(cn.step_reduced(H.reduce(state.scalar()))))


@dataclass(eq=False)
class EvolutionRun:
    """Time series recorded at every step (index 0 is the initial state).

    Vector series have shape ``(T, d)``; ``force_segments`` is ``(T, nseg, d)``.
    """

    dt: float
    h: float
    mass: float
    times: np.ndarray
    x: np.ndarray
    p_R: np.ndarray
    p_I: np.ndarray
    energy: np.ndarray
    norm: np.ndarray
    flux: np.ndarray
    force: np.ndarray
    force_segments: np.ndarray
    grad_V: np.ndarray
    p_I_rate: np.ndarray
    final: WaveState | None = None
    meta: dict = field(default_factory=dict)

    def series(self):
        """Columns for CSV export: (name, 1D array)."""
        d = self.x.shape[1]
        axes = "xyz"[:d]
        cols = [("t", self.times)]
        cols += [(f"mean_{a}", self.x[:, i]) for i, a in enumerate(axes)]
        cols += [(f"p_R_{a}", self.p_R[:, i]) for i, a in enumerate(axes)]
        cols += [(f"p_I_{a}", self.p_I[:, i]) for i, a in enumerate(axes)]
        cols += [("energy", self.energy), ("norm", self.norm), ("flux", self.flux)]
        cols += [(f"F_B_{a}", self.force[:, i]) for i, a in enumerate(axes)]
        cols += [(f"grad_V_{a}", self.grad_V[:, i]) for i, a in enumerate(axes)]
        return cols


def evolve(state: WaveState, H: HamiltonianOperator, dt, steps, potential=None,
           drift_tol=1e-10, force_order=2) -> EvolutionRun:
    """Run ``steps`` Crank-Nicolson steps, recording observables each step.

    ``force_order`` is the stencil order used for the boundary force.

    Raises a numerical error naming ``norm_drift`` if the per-step norm drift
    exceeds ``drift_tol``.
    """
    if steps < 1:
        raise ValidationError("steps must be positive")
    potential = potential or Zero()
    grid, m = H.grid, H.mass
    cn = CrankNicolson(H, dt)
    u = H.reduce(state.scalar())
    rec = {k: [] for k in ("x", "pR", "pI", "E", "N", "flux", "F", "Fs", "gV", "pIr")}

    def record(psi_state, u):
        rec["x"].append(obs.expect_position(psi_state))
        g = obs.expect_gradient_vector(psi_state)
        rec["pR"].append(g.real)
        rec["pI"].append(obs.expect_pI_vector(psi_state))
        rec["E"].append(float(np.real(np.vdot(u, H.matrix @ u))))
        rec["N"].append(float(np.real(np.vdot(u, u))))
        rec["flux"].append(boundary_flux(psi_state, m))
        bf = obs.boundary_force(psi_state, m, order=force_order)
        rec["F"].append(bf.total)
        rec["Fs"].append(bf.per_segment)
        rec["gV"].append(obs.expect_grad_potential(psi_state, potential))
        rec["pIr"].append(obs.pI_rate(psi_state, m))

    current = state
    record(current, u)
    for i in range(steps):
        u_new = cn.step_reduced(u)
        drift = abs(np.linalg.norm(u_new) - np.linalg.norm(u))
        if drift > drift_tol:
            raise NumericalError(f"norm drift {drift:.3e} at step {i + 1}", invariant="norm_drift")
        u = u_new
        current = embed_physical(grid, H.expand(u))
        record(current, u)

    A = lambda key: np.asarray(rec[key])
    return EvolutionRun(
        dt=float(dt), h=grid.h, mass=m, times=dt * np.arange(steps + 1),
        x=A("x"), p_R=A("pR"), p_I=A("pI"), energy=A("E"), norm=A("N"), flux=A("flux"),
        force=A("F"), force_segments=A("Fs"), grad_V=A("gV"), p_I_rate=A("pIr"),
        final=current, meta={"force_order": force_order},
    )

import math

import numpy as np
import pytest

from boxmom import observables as obs
from boxmom.errors import DomainError, NumericalError, ValidationError
from boxmom.evolution import (CrankNicolson, build_hamiltonian, evolve, hermiticity_residual,
                              step_crank_nicolson)
from boxmom.geometry import Region
from boxmom.potentials import Harmonic
from boxmom.state import embed_physical, make_grid


def packet(grid, center, width, k):
    x = grid.axes[0]
    return embed_physical(grid, np.exp(-(x - center) ** 2 / (2 * width ** 2) + 1j * k * x)).normalize()


# ----------------------------------------------------------------- Hamiltonian


def test_particle_in_box_ground_energy():
    g = make_grid(Region.interval(0.0, math.pi), math.pi / 400)
    w, _ = build_hamiltonian(g).eigh(2)
    assert w[0] == pytest.approx(0.5, abs=1e-4)
    assert w[1] == pytest.approx(2.0, abs=1e-3)


def test_neumann_constant_ground_state():
    g = make_grid(Region.interval(0.0, 1.0, gamma="neumann"), 1 / 64)
    w, v = build_hamiltonian(g).eigh(1)
    assert abs(w[0]) < 1e-12
    assert np.ptp(np.abs(v[0])) < 1e-10


def test_robin_ground_energy_matches_transcendental_root():
    # gamma = 1 at both ends of [0, 1]: tan k = 2 k / (k^2 - 1)
    from scipy.optimize import brentq
    k = brentq(lambda k: math.tan(k) - 2 * k / (k * k - 1), 1.1, 1.5)
    errs = []
    for h in (1 / 64, 1 / 128):
        g = make_grid(Region.interval(0.0, 1.0, gamma=1.0), h)
        errs.append(abs(build_hamiltonian(g).eigh(1)[0][0] - 0.5 * k * k))
    assert errs[1] < 1e-4 and errs[0] / errs[1] == pytest.approx(4.0, rel=0.1)


def test_random_real_gamma_hermitian(rng):
    for _ in range(10):
        gam = list(rng.uniform(-2, 5, size=4))
        g = make_grid(Region.rectangle(1.0, 0.5, gamma=gam), 1 / 16)
        assert hermiticity_residual(build_hamiltonian(g, 1.3)) < 1e-12


def test_dirichlet_limit_hermitian_and_reduced():
    g = make_grid(Region.rectangle(1.0, 0.5), 1 / 16)
    H = build_hamiltonian(g)
    assert hermiticity_residual(H) < 1e-12
    assert H.matrix.shape[0] == (g.shape[0] - 2) * (g.shape[1] - 2)


def test_complex_gamma_rejected_and_detected():
    g = make_grid(Region.rectangle(1.0, 0.5, gamma=1.0), 1 / 16)
    with pytest.raises(ValidationError):
        build_hamiltonian(g, gamma=[1.0, 0.1j, 1.0, 1.0])
    H = build_hamiltonian(g, gamma=[1.0, 0.1j, 1.0, 1.0], allow_complex=True)
    assert hermiticity_residual(H) > 1e-3


def test_singular_potential_rejected():
    class Bad:
        def value(self, x):
            return np.full(np.shape(x)[:-1], np.inf)

    with pytest.raises(ValidationError):
        build_hamiltonian(make_grid(Region.interval(0, 1), 0.1), potential=Bad())


# -------------------------------------------------------------- Crank-Nicolson


def test_eigenstate_phase_rotation_third_order():
    g = make_grid(Region.interval(0.0, 1.0, gamma=0.7), 1 / 32)
    H = build_hamiltonian(g)
    w, v = H.eigh(3)
    E, psi = w[2], v[2]
    s = embed_physical(g, psi).normalize()
    errs = []
    for dt in (0.02, 0.01):
        out = step_crank_nicolson(s, H, dt)
        errs.append(np.max(np.abs(out.scalar() - np.exp(-1j * E * dt) * s.scalar())))
    assert errs[0] / errs[1] == pytest.approx(8.0, rel=0.05)


def test_grid_mismatch_rejected():
    r = Region.interval(0, 1)
    H = build_hamiltonian(make_grid(r, 0.1))
    with pytest.raises(DomainError):
        step_crank_nicolson(embed_physical(make_grid(r, 0.1), np.ones(11)), H, 0.1)
    with pytest.raises(ValidationError):
        CrankNicolson(H, 0.0)


def test_norm_and_energy_conservation_over_1000_steps(rng):
    g = make_grid(Region.rectangle(1.0, 0.5, gamma=[0.5, 2.0, "neumann", 1.0]), 1 / 16)
    H = build_hamiltonian(g, potential=Harmonic(2.0, (0.5, 0.25)))
    s = embed_physical(g, rng.normal(size=g.shape) + 1j * rng.normal(size=g.shape)).normalize()
    run = evolve(s, H, 0.01, 1000, Harmonic(2.0, (0.5, 0.25)))
    assert np.max(np.abs(run.norm - run.norm[0])) < 1e-8
    assert np.max(np.abs(run.energy - run.energy[0])) / abs(run.energy[0]) < 1e-8


def test_norm_drift_guard_names_invariant():
    g = make_grid(Region.interval(0, 1), 1 / 16)
    H = build_hamiltonian(g)
    with pytest.raises(NumericalError) as exc:
        evolve(packet(g, 0.5, 0.1, 3.0), H, 0.01, 2, drift_tol=-1.0)
    assert exc.value.invariant == "norm_drift"


def test_free_packet_moves_at_group_velocity():
    g = make_grid(Region.interval(0.0, 10.0), 0.01)
    H = build_hamiltonian(g, mass=1.0)
    s = packet(g, 3.0, 0.5, 2.0)
    run = evolve(s, H, 1e-3, 1000)
    p0 = run.p_R[0, 0]
    assert p0 == pytest.approx(2.0, abs=1e-3)
    assert np.max(np.abs(run.x[:, 0] - (3.0 + p0 * run.times))) < 1e-3


# ------------------------------------------------------------ Ehrenfest series


def test_stationary_state_residuals_vanish():
    g = make_grid(Region.interval(0.0, 1.0, gamma=1.0), 1 / 64)
    H = build_hamiltonian(g)
    s = embed_physical(g, H.eigh(1)[1][0]).normalize()
    run = evolve(s, H, 0.01, 20)
    assert np.max(obs.ehrenfest_position_residual(run, [1.0])) < 1e-8
    assert np.max(obs.ehrenfest_momentum_residual(run, [1.0])) < 1e-8
    # parity: the boundary force of the symmetric ground state is zero
    assert np.max(np.abs(run.force)) < 1e-6


def test_free_packet_mid_box_residuals_second_order():
    pos, mom = [], []
    for i in range(3):
        h, dt = 1 / (64 * 2 ** i), 4e-3 / 2 ** i
        g = make_grid(Region.interval(0.0, 1.0), h)
        run = evolve(packet(g, 0.5, 0.1, 2.0), build_hamiltonian(g, mass=10.0), dt, 25 * 2 ** i)
        pos.append(np.max(obs.ehrenfest_position_residual(run, [1.0])))
        mom.append(np.max(obs.ehrenfest_momentum_residual(run, [1.0])))
    assert pos[-1] < 1e-4 and mom[-1] < 1e-4
    assert np.all(np.log2(np.array(pos[:-1]) / pos[1:]) > 1.7)
    with pytest.raises(ValueError):
        obs.ehrenfest_position_residual(evolve(packet(g, 0.5, 0.1, 1.0), build_hamiltonian(g), 1e-3, 1), [1.0])


def test_harmonic_force_balance():
    m, w, x0 = 1.0, 2.0, 5.0
    V = Harmonic(w, (x0,), m)
    g = make_grid(Region.interval(0.0, 10.0), 0.01)
    H = build_hamiltonian(g, m, V)
    run = evolve(packet(g, 4.0, 0.5, 0.0), H, 1e-3, 500, V)
    dp = (run.p_R[2:, 0] - run.p_R[:-2, 0]) / (2 * run.dt)
    assert np.max(np.abs(dp + m * w ** 2 * (run.x[1:-1, 0] - x0))) < 1e-3
    assert np.max(obs.ehrenfest_momentum_residual(run, [1.0])) < 1e-3


def test_pI_rate_residual_second_order():
    errs = []
    for i in range(3):
        g = make_grid(Region.interval(0.0, 1.0, gamma=[0.5, 2.0]), 1 / (32 * 2 ** i))
        H = build_hamiltonian(g)
        _, v = H.eigh(2)
        s = embed_physical(g, v[0] + 1j * v[1]).normalize()
        run = evolve(s, H, 0.02 / 2 ** i, 10 * 2 ** i)
        errs.append(np.max(obs.pI_rate_residual(run, [1.0])))
    assert np.all(np.log2(np.array(errs[:-1]) / errs[1:]) > 1.7)

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from boxmom import observables as obs
from boxmom.errors import ConsistencyError, DomainError, ResolutionError
from boxmom.evolution import build_hamiltonian
from boxmom.geometry import Region
from boxmom.momentum_modes import build_mode
from boxmom.state import (FieldState, GaussianTerm, embed_physical, gaussian_packet, gaussian_state,
                          make_grid, mode_state, random_smooth_state)

from conftest import PENTAGON


def sine_state(L=1.0, n=1):
    k = n * math.pi / L
    return FieldState(
        Region.interval(0.0, L),
        psi=lambda x: math.sqrt(2 / L) * np.sin(k * x[..., 0]) + 0j,
        grad=lambda x: (math.sqrt(2 / L) * k * np.cos(k * x[..., 0]) + 0j)[..., None],
        laplacian=lambda x: -k * k * math.sqrt(2 / L) * np.sin(k * x[..., 0]) + 0j,
    )


def cos_product(a=1.0, b=0.5):
    """Real symmetric state on [-a, a] x [-b, b] vanishing on the boundary."""
    kx, ky = math.pi / (2 * a), math.pi / (2 * b)
    c = 1 / math.sqrt(a * b)
    return FieldState(
        Region.rectangle(2 * a, 2 * b, origin=(-a, -b)),
        psi=lambda x: c * np.cos(kx * x[..., 0]) * np.cos(ky * x[..., 1]) + 0j,
        grad=lambda x: c * np.stack([-kx * np.sin(kx * x[..., 0]) * np.cos(ky * x[..., 1]),
                                     -ky * np.cos(kx * x[..., 0]) * np.sin(ky * x[..., 1])], -1) + 0j,
    )


# ------------------------------------------------------------- <-i grad> split


def test_real_state_has_no_real_momentum(pentagon):
    s = gaussian_state(pentagon, [GaussianTerm(1.0, (1.0, 1.2), 0.4, (0.0, 0.0))]).normalize()
    for d in ([1, 0], [0, 1], [math.sqrt(0.5)] * 2):
        assert abs(obs.expect_gradient(s, d).real) < 1e-12


def test_dirichlet_ground_state_has_no_imaginary_part():
    assert abs(obs.expect_gradient(sine_state(), [1.0]).imag) < 1e-12
    g = make_grid(Region.interval(0.0, 1.0), 1 / 128)
    s = embed_physical(g, build_hamiltonian(g).eigh(1)[1][0]).normalize()
    assert abs(obs.expect_gradient(s, [1.0]).imag) < 1e-4


def test_offset_packet_imaginary_part_is_boundary_density():
    r = Region.interval(0.0, 1.0)
    s = gaussian_packet(r, 0.8, 0.15, 3.0)
    rho0, rho1 = np.abs(s(np.array([0.0, 1.0]))) ** 2
    oracle = -0.5 * (rho1 - rho0)
    assert abs(obs.expect_gradient(s, [1.0]).imag - oracle) < 1e-8
    assert abs(obs.expect_pI(s, [1.0]) - oracle) < 1e-12


def test_truncated_packet_pI_cross_check(rect):
    s = gaussian_packet(rect, (1.6, 0.4), 0.3, (1.0, -0.5))
    for d in ([1, 0], [0, 1]):
        assert abs(obs.expect_pI(s, d) - obs.expect_gradient(s, d).imag) < 1e-6


def test_constant_boundary_density_gives_zero_pI(pentagon):
    s = gaussian_state(pentagon, [GaussianTerm(1.0, (0.0, 0.0), 1e6, (1.3, -0.7))])
    assert np.max(np.abs(obs.expect_pI_vector(s))) < 1e-10
    assert abs(obs.expect_pI(sine_state(), [1.0])) < 1e-12


def test_grid_and_closed_form_pI_agree():
    r = Region.interval(0.0, 1.0)
    s = gaussian_packet(r, 0.8, 0.15, 3.0)
    g = s.on_grid(make_grid(r, 1 / 256))
    assert obs.expect_pI(g, [1.0]) == pytest.approx(obs.expect_pI(s, [1.0]), abs=1e-8)


# ------------------------------------------------------------------- spectral


def test_spectral_pR_of_real_state_vanishes(rect):
    s = gaussian_state(rect, [GaussianTerm(1.0, (1.2, 0.4), 0.35, (0.0, 0.0))]).normalize()
    for d in ([1, 0], [0, 1]):
        assert abs(obs.expect_pR_spectral(s, d).value) < 1e-8


def test_spectral_pR_of_plane_wave_is_its_momentum():
    r = Region.interval(0.0, 1.0)
    k = 2.5
    s = FieldState(r, psi=lambda x: np.exp(1j * k * x[..., 0]),
                   grad=lambda x: (1j * k * np.exp(1j * k * x[..., 0]))[..., None])
    assert abs(obs.expect_pR_spectral(s, [1.0], n_modes=128).value - k) < 1e-6


def test_spectral_pR_matches_gradient_route(rect):
    s = gaussian_packet(rect, (1.0, 0.5), 0.2, (2.0, 0.0))
    est = obs.expect_pR_spectral(s, [1, 0], n_lines=64, n_modes=64)
    assert abs(est.value - obs.expect_gradient(s, [1, 0]).real) < 1e-5
    assert not est.warning


@settings(max_examples=10)
@given(st.integers(0, 2 ** 31 - 1))
def test_decomposition_identity_random_states(seed):
    r = Region.convex_polygon(PENTAGON)
    s = random_smooth_state(r, np.random.default_rng(seed), n_terms=2, max_momentum=3.0)
    d = np.random.default_rng(seed + 1).normal(size=2)
    d /= np.linalg.norm(d)
    g = obs.expect_gradient(s, d)
    est = obs.expect_pR_spectral(s, d)
    assert abs(est.value - g.real) < max(1e-5, abs(est.tail))
    assert abs(obs.expect_pI(s, d) - g.imag) < 1e-5


# -------------------------------------------------------------- boundary force


def test_dirichlet_symmetric_eigenstate_net_force_zero():
    g = make_grid(Region.rectangle(1.0, 0.5), 1 / 32)
    s = embed_physical(g, build_hamiltonian(g).eigh(1)[1][0]).normalize()
    f = obs.boundary_force(s, order=4)
    assert np.max(np.abs(f.total)) < 1e-6
    # each wall pushes outward-pressure inward
    assert f.per_segment[1][0] < 0 and f.per_segment[3][0] > 0


def test_robin_ground_state_net_force_zero():
    g = make_grid(Region.interval(0.0, 1.0, gamma=1.0), 1 / 128)
    s = embed_physical(g, build_hamiltonian(g).eigh(1)[1][0]).normalize()
    assert abs(obs.boundary_force(s).total[0]) < 1e-6


@pytest.mark.parametrize("mass,L", [(1.0, 1.0), (2.0, 1.5)])
def test_dirichlet_wall_force_oracle(mass, L):
    oracle = -math.pi ** 2 / (mass * L ** 3)
    f = obs.boundary_force(sine_state(L), mass)
    right = 1  # interval segments are (left, right)
    assert f.per_segment[right][0] == pytest.approx(oracle, rel=1e-6)
    assert abs(f.total[0]) < 1e-8
    g = make_grid(Region.interval(0.0, L), L / 256)
    fg = obs.boundary_force(sine_state(L).on_grid(g), mass, order=4)
    assert fg.per_segment[right][0] == pytest.approx(oracle, rel=1e-6)


def test_coarse_grid_raises_resolution_error():
    g = make_grid(Region.interval(0.0, 1.0), 0.5)
    s = embed_physical(g, np.array([0, 1.0, 0])).normalize()
    with pytest.raises(ResolutionError) as exc:
        obs.boundary_force(s, order=4)
    assert exc.value.invariant == "resolution"


def test_non_physical_rejected():
    r = Region.interval(0.0, 1.0)
    s = mode_state(r, build_mode((0.0, 1.0, 0j, 0j), 1))
    with pytest.raises(DomainError):
        obs.expect_gradient(s, [1.0])
    with pytest.raises(DomainError):
        obs.boundary_force(s)


# ------------------------------------------------------------------ correlator


def test_correlator_factorizes_for_product_state(rect):
    s = gaussian_packet(rect, (1.0, 0.5), 0.2, (2.0, 0.0))
    c = obs.pR_position_correlator(s, [1, 0], [0, 1])
    oracle = obs.expect_gradient(s, [1, 0]).real * obs.expect_position(s)[1]
    assert abs(c.identity - oracle) < 1e-6
    assert abs(c.spectral - oracle) < 1e-6


def test_correlator_real_1d_state_has_no_anticommutator():
    r = Region.interval(0.0, 1.0)
    s = gaussian_state(r, [GaussianTerm(1.0, (0.4,), 0.2, (0.0,))]).normalize()
    c = obs.pR_position_correlator(s, [1.0], [1.0])
    assert abs(c.identity.real) < 1e-8 and abs(c.spectral.real) < 1e-8


def test_correlator_routes_agree(rng):
    for region in (Region.interval(0.0, 1.0, gamma=1.0, lam={"default": 0.3j}), Region.rectangle(2.0, 1.0)):
        s = random_smooth_state(region, rng, n_terms=2, max_momentum=3.0)
        d = [1.0] if region.dim == 1 else [1.0, 0.0]
        m = [1.0] if region.dim == 1 else [0.6, 0.8]
        c = obs.pR_position_correlator(s, d, m, n_modes=128)
        assert c.difference < 1e-5


def test_correlator_disagreement_raises(rect):
    s = gaussian_packet(rect, (1.0, 0.5), 0.1, (6.0, 0.0))
    with pytest.raises(ConsistencyError) as exc:
        obs.pR_position_correlator(s, [1, 0], [1, 0], n_modes=2, n_lines=4, tol=1e-12)
    assert exc.value.invariant == "correlator_routes"
    c = obs.pR_position_correlator(s, [1, 0], [1, 0], n_modes=2, n_lines=4, check=False)
    assert c.difference > 1e-12


# ----------------------------------------------------------------- uncertainty


def test_dirichlet_ground_state_has_slack():
    rep = obs.uncertainty_report(sine_state(), [1.0])
    assert rep["slack"] > 0.1
    assert abs(rep["gamma_boundary"]) < 1e-10
    assert abs(rep["n_dot_k"][0]) < 1e-12 and abs(rep["n_dot_k_xm"][0]) < 1e-12
    assert rep["lhs"] == pytest.approx(math.pi ** 2, rel=1e-10)
    assert rep.passed["inequality"] and rep.finite()


def test_boundary_bracket_reduces_for_vanishing_symmetric_state():
    s = cos_product()
    for m in ([1, 0], [0, 1], [0.6, 0.8]):
        rep = obs.uncertainty_report(s, m, spectral=False)
        b = rep["bracket_boundary"] ** 2 / (4 * rep["delta_xm"] ** 2)
        direct = (np.eye(2) @ np.asarray(m)) ** 2 / (4 * rep["delta_xm"] ** 2)
        assert np.max(np.abs(b - direct)) < 1e-8


@settings(max_examples=20)
@given(st.integers(0, 2 ** 31 - 1), st.sampled_from(["interval", "rectangle", "pentagon"]))
def test_uncertainty_inequality_random_states(seed, kind):
    region = {"interval": Region.interval(0.0, 1.0, gamma=[0.7, "neumann"]),
              "rectangle": Region.rectangle(2.0, 1.0, gamma=[1.0, 0.5, 2.0, "neumann"]),
              "pentagon": Region.convex_polygon(PENTAGON)}[kind]
    rng = np.random.default_rng(seed)
    s = random_smooth_state(region, rng, n_terms=2, max_momentum=3.0)
    m = [1.0] if region.dim == 1 else rng.normal(size=2)
    m = m / np.linalg.norm(m)
    rep = obs.uncertainty_report(s, m, n_modes=32, spectral=False)
    assert rep.finite()
    assert rep["slack"] >= -1e-8


def test_degenerate_spread_rejected():
    r = Region.interval(0.0, 1e-13)
    s = FieldState(r, psi=lambda x: np.ones(x.shape[:-1], complex),
                   grad=lambda x: np.zeros(x.shape, complex))
    with pytest.raises(DomainError):
        obs.uncertainty_report(s, [1.0], spectral=False)


def test_report_serializes():
    import json
    rep = obs.uncertainty_report(sine_state(), [1.0], n_modes=16)
    data = json.loads(rep.to_json())
    assert data["passed"]["inequality"] is True
    assert set(data["terms"]) >= {"lhs", "rhs", "slack", "delta_xm", "anticommutator_spectral"}

import math

import numpy as np
import pytest
import scipy.sparse.linalg as spla
from hypothesis import given, strategies as st

from boxmom import observables as obs
from boxmom.errors import DomainError, ResolutionError, ValidationError
from boxmom.evolution import build_hamiltonian
from boxmom.geometry import Region
from boxmom.state import (WaveState, axis_derivative, boundary_flux, embed_physical, fd_weights,
                          gaussian_packet, make_grid, probability_current, random_smooth_state)


def random_field(rng, shape):
    return rng.normal(size=shape) + 1j * rng.normal(size=shape)


# -------------------------------------------------------------------------- grids


def test_grid_nodes_on_boundary(rect):
    g = make_grid(rect, 0.25)
    assert g.shape == (9, 5)
    assert g.axes[0][0] == 0.0 and g.axes[0][-1] == 2.0 and g.axes[1][-1] == 1.0
    assert g.weights.sum() == pytest.approx(2.0)


def test_grid_rejects_incommensurate_spacing(rect):
    with pytest.raises(ValueError):
        make_grid(rect, 0.3)
    with pytest.raises(DomainError):
        make_grid(Region.convex_polygon([(0, 0), (1, 0), (0, 1)]), 0.1)


@pytest.mark.parametrize("deriv, order", [(1, 2), (1, 4), (2, 2), (2, 4)])
def test_axis_derivative_convergence_order(deriv, order):
    errs = []
    for n in (32, 64, 128):
        x = np.linspace(0, 1, n + 1)
        f = np.sin(3 * x) * np.exp(x)
        exact = (np.exp(x) * (np.sin(3 * x) + 3 * np.cos(3 * x)) if deriv == 1
                 else np.exp(x) * (6 * np.cos(3 * x) - 8 * np.sin(3 * x)))
        errs.append(np.max(np.abs(axis_derivative(f, 1 / n, 0, deriv, order) - exact)))
    rates = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(rates > order - 0.3)


def test_fd_weights_central_second_derivative():
    assert np.allclose(fd_weights([-1, 0, 1], 2), [1, -2, 1])


def test_coarse_grid_raises_resolution_error():
    with pytest.raises(ResolutionError) as exc:
        axis_derivative(np.ones(3), 0.5, 0, 2, 4)
    assert exc.value.invariant == "resolution"


# ------------------------------------------------------------------------ states


def test_embed_physical_norm_and_round_trip(rect, rng):
    g = make_grid(rect, 0.125)
    psi = random_field(rng, g.shape)
    psi /= math.sqrt(np.sum(g.weights * abs(psi) ** 2))
    s = embed_physical(g, psi)
    assert s.physical
    assert s.norm() == pytest.approx(1.0, abs=1e-14)
    assert np.max(np.abs(s.e - s.o)) == 0
    assert np.allclose(s.e * math.sqrt(2), psi, atol=1e-15)
    assert np.allclose(s.scalar(), psi, atol=1e-15)


def test_embed_rejects_bad_fields(rect):
    g = make_grid(rect, 0.5)
    with pytest.raises(ValueError):
        embed_physical(g, np.ones((2, 2)))
    with pytest.raises(ValidationError):
        embed_physical(g, np.full(g.shape, np.nan))
    with pytest.raises(ValidationError):
        embed_physical(g, np.zeros(g.shape)).normalize()


@given(seed=st.integers(0, 2 ** 32 - 1))
def test_normalize_idempotent(seed):
    rng = np.random.default_rng(seed)
    g = make_grid(Region.interval(0.0, 1.0), 1 / 16)
    s = embed_physical(g, random_field(rng, g.shape)).normalize()
    t = s.normalize()
    assert np.max(np.abs(t.e - s.e)) < 1e-15 and np.max(np.abs(t.o - s.o)) < 1e-15


def test_inner_product_properties(rng):
    g = make_grid(Region.rectangle(1.0, 0.5), 1 / 8)
    for _ in range(100):
        a = WaveState(g, random_field(rng, g.shape), random_field(rng, g.shape))
        b = WaveState(g, random_field(rng, g.shape), random_field(rng, g.shape))
        assert a.inner(b) == pytest.approx(np.conj(b.inner(a)), abs=1e-12)
        assert a.inner(a).real > 0 and abs(a.inner(a).imag) < 1e-12
        # physical states: doubled product = single-component product
        pa, pb = embed_physical(g, a.e), embed_physical(g, b.e)
        single = np.sum(g.weights * np.conj(a.e) * b.e)
        assert abs(pa.inner(pb) - single) < 1e-12


def test_nonphysical_state_has_no_current(rect):
    g = make_grid(rect, 0.25)
    s = WaveState(g, np.ones(g.shape, complex), np.zeros(g.shape, complex))
    with pytest.raises(DomainError):
        probability_current(s)


def test_embedded_pI_matches_single_component_boundary_integral(rect):
    st_ = gaussian_packet(rect, (1.5, 0.4), 0.35, (1.0, -2.0))
    expected = -0.5 * obs.boundary_moment(st_)
    assert np.allclose(obs.expect_pI_vector(st_), expected, atol=1e-14)
    assert obs.expect_pI(st_, (1.0, 0.0)) == pytest.approx(
        obs.expect_gradient(st_, (1.0, 0.0)).imag, abs=1e-8)


# ----------------------------------------------------------------------- current


def test_real_state_has_zero_current(rect, rng):
    g = make_grid(rect, 0.125)
    s = embed_physical(g, rng.normal(size=g.shape))
    assert all(np.all(j == 0) for j in probability_current(s).j)
    assert boundary_flux(s) == 0.0


def test_plane_wave_current_mid_interval():
    k, m = 3.0, 1.0
    errs = []
    for h in (1e-3, 5e-4):
        g = make_grid(Region.interval(0.0, 1.0), h)
        x = g.axes[0]
        env = np.exp(-(x - 0.5) ** 2 / 0.1)
        j = probability_current(embed_physical(g, env * np.exp(1j * k * x)), m).j[0]
        mid = np.abs(x - 0.5) < 0.1
        errs.append(np.max(np.abs(j[mid] - (k / m) * env[mid] ** 2)))
    assert errs[0] < 1e-4
    assert errs[0] / errs[1] == pytest.approx(4.0, rel=0.05)


def test_closed_form_current_matches_grid_current():
    r = Region.interval(0.0, 1.0)
    st_ = gaussian_packet(r, 0.4, 0.1, 5.0)
    g = make_grid(r, 1e-3)
    jg = probability_current(st_.on_grid(g)).j[0]
    jc = st_.current(g.axes[0][:, None])[:, 0]
    assert np.max(np.abs(jg - jc)) < 1e-3 * np.max(np.abs(jc))


@pytest.mark.parametrize("gamma", [0.5, [0.5, 2.0, "neumann", 1.0]])
def test_robin_flux_second_order(gamma):
    r = Region.rectangle(2.0, 1.0, gamma=gamma)
    fluxes = []
    hs = (1 / 16, 1 / 32, 1 / 64, 1 / 128)
    for h in hs:
        g = make_grid(r, h)
        H = build_hamiltonian(g)
        _, v = spla.eigsh(H.matrix.real, k=2, sigma=-1.0)
        s = embed_physical(g, H.expand(v[:, 0] + 1j * v[:, 1])).normalize()
        fluxes.append(boundary_flux(s))
    rates = np.log2(np.array(fluxes[:-1]) / np.array(fluxes[1:]))
    assert np.all(rates > 1.7)
    assert all(f <= 10.0 * h ** 2 for f, h in zip(fluxes, hs))


def test_field_state_flux_of_random_state_is_finite(pentagon, rng):
    s = random_smooth_state(pentagon, rng)
    assert s.norm() == pytest.approx(1.0, abs=1e-12)
    assert math.isfinite(boundary_flux(s))

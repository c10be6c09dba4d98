import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from boxmom.commutability import (classify_region, corner_arc_residual, joint_bc_residual,
                                  joint_ladders, joint_modes_rectangle,
                                  position_momentum_commutes)
from boxmom.errors import ValidationError
from boxmom.geometry import Region
from boxmom.momentum_modes import spectrum

lam_value = st.floats(-5, 5, allow_nan=False).map(lambda v: 1j * v)


def rotated_rectangle(deg, lx=2.0, ly=1.0):
    c, s = math.cos(math.radians(deg)), math.sin(math.radians(deg))
    pts = [(0, 0), (lx, 0), (lx, ly), (0, ly)]
    return Region.convex_polygon([(c * x - s * y, s * x + c * y) for x, y in pts])


# ---------------------------------------------------------------- joint modes


def test_zero_lambda_integer_ladder():
    modes = joint_modes_rectangle(Region.rectangle(math.pi, math.pi), (0, 0, 0, 0), (-3, 3), (-3, 3))
    mu = np.array([m.mu for m in modes])
    assert np.max(np.abs(mu - np.round(mu))) < 1e-12
    assert set(map(tuple, np.round(mu).astype(int))) == {(a, b) for a in range(-3, 4)
                                                       for b in range(-3, 4)}


def test_half_integer_x_ladder():
    modes = joint_modes_rectangle(Region.rectangle(1.0, 1.0), (0, 1j, 0, -1j), (0, 4), (0, 4))
    for m in modes:
        assert m.mu[0] == pytest.approx(math.pi * (m.n[0] + 0.5), abs=1e-12)
        assert m.mu[1] == pytest.approx(math.pi * m.n[1], abs=1e-12)


def test_real_lambda_rejected():
    with pytest.raises(ValidationError):
        joint_modes_rectangle(Region.rectangle(1.0, 1.0), (0.5, 0, 0, 0))
    with pytest.raises(ValidationError):
        joint_modes_rectangle(Region.rectangle(1.0, 1.0), variant="other")


@given(st.tuples(lam_value, lam_value, lam_value, lam_value))
def test_tensor_modes_satisfy_all_sides(lams):
    r = Region.rectangle(1.3, 0.7, origin=(0.2, -0.4),
                         lam={"y": [lams[0], 0, lams[2], 0], "x": [0, lams[1], 0, lams[3]]})
    for m in joint_modes_rectangle(r, lams, (-2, 2), (-2, 2)):
        res = joint_bc_residual(r, m)
        assert res.max < 1e-14 and res.l2 < 1e-14


def test_joint_ladders_match_1d_spectra():
    lams = (0.3j, -1.2j, 2.0j, 0.7j)
    r = Region.rectangle(1.5, 0.8, origin=(0.4, 0.1))
    sx, sy = joint_ladders(r, lams, n_max=8)
    ox = spectrum((0.4, 1.9, lams[3], lams[1]), 0, 8)
    oy = spectrum((0.1, 0.9, lams[0], lams[2]), 0, 8)
    assert np.array_equal(sx.k, ox.k) and np.array_equal(sy.k, oy.k)
    modes = joint_modes_rectangle(r, lams, (0, 8), (0, 8))
    assert max(abs(m.mu[0] - ox.k[m.n[0]]) for m in modes) == 0.0
    assert max(abs(m.mu[1] - oy.k[m.n[1]]) for m in modes) == 0.0


# ----------------------------------------------------------------- literal form


def test_literal_form_fails_on_x_sides():
    r = Region.rectangle(1.0, 1.0)
    for m in joint_modes_rectangle(r, (0.4j, 0.0, -0.3j, 0.9j), (0, 3), (1, 3),
                                   variant="literal_c2"):
        res = joint_bc_residual(r, m)
        assert res.per_direction[0][0] > 0.1
        assert np.nanmax(res.per_segment[[1, 3]]) > 0.1


def test_literal_residual_monotone_in_transverse_momentum():
    r = Region.rectangle(1.0, 1.0)
    lams = (0.4j, 0.2j, -0.3j, 0.9j)
    modes = joint_modes_rectangle(r, lams, (1, 1), (0, 7), variant="literal_c2")
    # x sides only: their residual is driven by the transverse (y) momentum
    modes = sorted(modes, key=lambda m: abs(m.mu[1]))
    vals = [joint_bc_residual(r, m, directions=((1.0, 0.0),)).max_c1 for m in modes]
    assert np.all(np.diff(vals) > 0)


# ------------------------------------------------------------ rounded corners


@pytest.mark.parametrize("r", [0.05, 0.1])
def test_rounded_corner_residual(r):
    reg = Region.rounded_rectangle(1.0, 1.0, r)
    for m in joint_modes_rectangle(reg, (0, 0, 0, 0), (0, 3), (0, 3)):
        if m.mu_norm == 0:
            continue
        assert corner_arc_residual(reg, m) > 0.05


def test_corner_residual_needs_arcs():
    r = Region.rectangle(1.0, 1.0)
    with pytest.raises(ValidationError):
        corner_arc_residual(r, joint_modes_rectangle(r, (0, 0, 0, 0))[1])


# -------------------------------------------------------------- classification


def test_rectangle_is_separable(rect):
    v = classify_region(rect)
    assert v.verdict == "separable_parallelepiped"
    assert v.residual_max < 1e-14
    assert v.evidence["literal_c2_max"] > 0.1


def test_rotated_rectangle_is_incompatible():
    v = classify_region(rotated_rectangle(10.0))
    assert v.verdict == "incompatible_bc"
    assert len(v.evidence["both_conditions_segments"]) == 4


@pytest.mark.parametrize("r", [1e-3, 1e-2, 1e-1])
def test_rounding_breaks_separability(r):
    v = classify_region(Region.rounded_rectangle(2.0, 1.0, r))
    assert v.verdict == "incompatible_bc"
    assert sorted(v.evidence["both_conditions_segments"]) == [1, 3, 5, 7]


def test_pentagon_is_incompatible(pentagon):
    assert classify_region(pentagon).verdict == "incompatible_bc"


def test_mismatched_lambdas_reported():
    reg = rotated_rectangle(10.0)
    reg = Region.convex_polygon([tuple(v) for v in reg.params["vertices"]],
                                lam={"x": 0.5j, "y": -0.5j})
    v = classify_region(reg)
    assert v.evidence["lambda_mismatch_segments"] == [0, 1, 2, 3]


def test_trivial_domains(rect):
    assert classify_region(Region.interval(0, 1), ((1.0,), (1.0,))).verdict == "trivial_domain"
    assert classify_region(rect, ((1, 0), (-1, 0))).verdict == "trivial_domain"


# ---------------------------------------------------------- position-momentum


def test_orthogonal_position_momentum_commute(rng):
    w = position_momentum_commutes((1, 0), (0, 1), Region.rectangle(2.0, 1.0), rng)
    assert w.commutes and len(w.commutator_norms) == 10
    assert np.max(w.commutator_norms) < 1e-8


def test_parallel_position_momentum_do_not_commute(rng):
    w = position_momentum_commutes((1, 0), (1, 0), Region.rectangle(2.0, 1.0), rng, n_states=3)
    assert not w.commutes
    assert w.deviation < 1e-8 * np.max(w.state_norms) + 1e-8


def test_diagonal_pair_commutator_scale(rng, pentagon):
    s = math.sqrt(0.5)
    w = position_momentum_commutes((1, 0), (s, s), pentagon, rng, n_states=3)
    assert not w.commutes and w.dot == pytest.approx(s)
    assert np.allclose(w.commutator_norms, w.state_norms * s, rtol=1e-8)

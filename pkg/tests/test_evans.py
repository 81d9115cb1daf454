import math

import numpy as np
import pytest

from modelpot import model
from modelpot.elliptic import assemble
from modelpot.evans import (PreconditionError, check_combination, dyadic_weights, evans_green_combination,
                            evans_implies_parabolic_check, evans_radial, level_radius, properness_check,
                            truncated_energy_check)
from modelpot.model import DomainError


@pytest.fixture(scope="module")
def planar_combination():
    return evans_green_combination(model.euclidean(2), 1.0, 4.0)


def test_radial_potential_in_the_plane():
    E = evans_radial(model.euclidean(2), 1.0)
    r = np.array([0.5, 1.0, math.e, 100.0])
    assert np.allclose(E(r), [0.0, 0.0, 1 / (2 * math.pi), math.log(100.0) / (2 * math.pi)], rtol=1e-10)


def test_radial_potential_on_a_cylinder_grows_linearly():
    E = evans_radial(model.cylinder(2), 1.0)
    r = np.array([2.0, 5.0, 50.0])
    assert np.allclose(E(r), (r - 1) / (2 * math.pi), rtol=1e-9)


@pytest.mark.parametrize("M", [model.hyperbolic(2), model.euclidean(3)])
def test_radial_potential_needs_a_parabolic_manifold(M):
    with pytest.raises(PreconditionError):
        evans_radial(M, 1.0)
    with pytest.raises(PreconditionError):
        evans_green_combination(M, 1.0, 4.0)


def test_radial_potential_argument_checks():
    with pytest.raises(DomainError):
        evans_radial(model.euclidean(2), -1.0)


def test_level_radius_inverts_the_potential():
    E = evans_radial(model.euclidean(2), 2.0)
    for c in (0.1, 1.0, 5.0):
        r = level_radius(E, c)
        assert E(r)[0] == pytest.approx(c, rel=1e-10)
        assert r == pytest.approx(2.0 * math.exp(2 * math.pi * c), rel=1e-10)


def test_log_radius_evaluation_agrees_with_radius():
    E = evans_radial(model.cylinder(2), 1.0)
    assert E.at_log_radius(math.log(30.0)) == pytest.approx(E(30.0)[0], rel=1e-10)
    assert E.at_log_radius(-1.0) == 0.0


def test_properness_reaches_every_target():
    rep = properness_check(evans_radial(model.euclidean(2), 1.0))
    assert rep.reached and rep.monotone
    assert all(np.diff(rep.log_radii) > 0)


def test_properness_on_a_cylinder_is_fast():
    cyl = properness_check(evans_radial(model.cylinder(2), 1.0))
    flat = properness_check(evans_radial(model.euclidean(2), 1.0))
    assert cyl.reached
    # linear growth passes E = 1000 near r = 2000 pi; log growth needs log r near 2000 pi
    assert cyl.log_radii[-1] <= 16.0 < flat.log_radii[-1]


@pytest.mark.parametrize("M", [model.euclidean(2), model.cylinder(2)])
def test_truncated_energy_equals_the_level(M):
    rep = truncated_energy_check(evans_radial(M, 1.0), [0.5, 1.0, 2.0])
    assert rep.ok
    assert np.allclose(rep.ratios, 1.0, atol=2e-2)


def test_dyadic_weights():
    assert np.allclose(dyadic_weights(3), [4 / 7, 2 / 7, 1 / 7])
    assert dyadic_weights(5).sum() == pytest.approx(1.0)


def test_combination_vanishes_on_k_and_grows(planar_combination):
    E = planar_combination
    rep = check_combination(E, evans_radial(model.euclidean(2), 1.0, check=False))
    assert rep.ok, rep.issues
    assert rep.boundary_ratio <= 1e-8
    assert rep.agreement < 2e-2
    assert E.meta["stable"]


def test_combination_is_harmonic_off_the_poles(planar_combination):
    E = planar_combination
    g = E.field.grid
    A = assemble(E.manifold, g)
    flux = A.stiffness @ E.field.values
    rr = g.radii
    skip = (rr <= E.R_K * (1 + 1e-12)) | (rr >= E.truncation * (1 - 1e-12))
    poles = np.zeros(g.size, bool)
    for rho, th in E.poles:
        poles[g.index(g.radial.index_of(rho), int(round(th / g.dtheta)))] = True
    free = ~skip & ~poles
    assert np.max(np.abs(flux[free])) < 1e-10 * np.max(np.abs(flux[poles]))
    # the charges add up to unit total flux
    assert np.sum(flux[poles]) == pytest.approx(1.0, rel=1e-10)


def test_combination_argument_checks():
    M = model.euclidean(2)
    with pytest.raises(DomainError):
        evans_green_combination(M, 1.0, 0.5, check=False)
    with pytest.raises(DomainError):
        evans_green_combination(M, 1.0, 4.0, weights=[0.5, 0.5], check=False)
    with pytest.raises(DomainError):
        evans_green_combination(M, 1.0, 4.0, n_theta=12, check=False)


def test_pointwise_evaluation_needs_the_radial_form(planar_combination):
    with pytest.raises(DomainError):
        planar_combination(2.0)


def test_boundedness_on_a_hyperbolic_manifold():
    rep = evans_implies_parabolic_check(model.euclidean(3), 1.0, [4.0, 16.0, 64.0])
    assert rep.bounded
    assert rep.sup_values[-1] < rep.sup_values[0]


def test_unbounded_growth_on_a_parabolic_control():
    rep = evans_implies_parabolic_check(model.euclidean(2), 1.0, [4.0, 16.0, 64.0],
                                        require_hyperbolic=False)
    assert not rep.bounded
    assert np.all(np.diff(rep.sup_values) > 0)
    with pytest.raises(PreconditionError):
        evans_implies_parabolic_check(model.euclidean(2), 1.0, [4.0, 16.0])

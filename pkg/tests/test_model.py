import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from modelpot import model
from modelpot.model import (DomainError, ModelManifold, PolarGrid, RadialGrid,
                            cumulative_radial_integral, radial_integral, sphere_area)


@pytest.mark.parametrize("k, area", [(1, 2 * math.pi), (2, 4 * math.pi), (3, 2 * math.pi**2)])
def test_unit_sphere_area(k, area):
    assert model.unit_sphere_area(k) == pytest.approx(area, rel=1e-14)


def test_sigma_of_builtin_warps():
    r = np.array([0.1, 1.0, 3.0])
    assert np.allclose(model.euclidean(2).sigma(r), r)
    assert np.allclose(model.hyperbolic(2, k=2.0).sigma(r), np.sinh(2 * r) / 2)
    assert np.allclose(model.polynomial([0.5]).sigma(r), r * (1 + 0.5 * r))
    cyl = model.cylinder(2, r0=2.0)
    assert cyl.sigma(np.array([5.0]))[0] == pytest.approx(2.0)


def test_cylinder_profile_is_c1_at_r0():
    M = model.cylinder(2, r0=1.0)
    h = 1e-6
    left = (M.sigma(np.array([1.0]))[0] - M.sigma(np.array([1.0 - h]))[0]) / h
    assert abs(left) < 1e-5
    assert M.sigma(np.array([1.0 - h]))[0] == pytest.approx(1.0, abs=1e-10)


@pytest.mark.parametrize("M, a, b, exact", [
    (model.euclidean(2), 1.0, math.e, 1.0),
    (model.euclidean(3), 1.0, 2.0, 0.5),
    (model.euclidean(3), 1.0, math.inf, 1.0),
    (model.hyperbolic(2), 1.0, 10.0, math.log(math.tanh(5.0) / math.tanh(0.5))),
    (model.hyperbolic(2), 1.0, math.inf, -math.log(math.tanh(0.5))),
    (model.polynomial([0.5]), 1.0, math.inf, math.log(3.0)),
])
def test_radial_integral_closed_forms(M, a, b, exact):
    assert radial_integral(M, a, b) == pytest.approx(exact, rel=1e-9)


@pytest.mark.parametrize("M", [model.euclidean(2), model.cylinder(2)])
def test_radial_integral_diverges_on_parabolic(M):
    assert math.isinf(radial_integral(M, 1.0, math.inf))


@settings(max_examples=40, deadline=None)
@given(st.floats(0.05, 5.0), st.floats(1.01, 10.0), st.floats(1.01, 10.0),
       st.sampled_from(["euclidean-2", "euclidean-3", "hyperbolic-2", "cylinder-2"]))
def test_radial_integral_is_additive(a, f1, f2, name):
    M = {"euclidean-2": model.euclidean(2), "euclidean-3": model.euclidean(3),
         "hyperbolic-2": model.hyperbolic(2), "cylinder-2": model.cylinder(2)}[name]
    b, c = a * f1, a * f1 * f2
    whole = radial_integral(M, a, c)
    assert radial_integral(M, a, b) + radial_integral(M, b, c) == pytest.approx(whole, rel=1e-10)


def test_cumulative_matches_quadrature():
    M = model.hyperbolic(3)
    r = np.array([1.0, 1.5, 2.0, 4.0])
    cum = cumulative_radial_integral(M, r)
    assert cum[0] == 0.0
    for x, v in zip(r[1:], cum[1:]):
        assert v == pytest.approx(radial_integral(M, 1.0, x), rel=1e-10)


def test_sphere_area_and_domain():
    M = model.hyperbolic(2)
    assert sphere_area(M, 1.0) == pytest.approx(2 * math.pi * math.sinh(1.0))
    with pytest.raises(DomainError):
        sphere_area(M, 0.0)
    trunc = model.euclidean(2, r_max=3.0)
    with pytest.raises(DomainError):
        sphere_area(trunc, 3.0)


def test_log_radius_evaluation_beyond_float_range():
    M = model.euclidean(2)
    # integral of dr/r between e^1000 and e^2000
    assert model.radial_integral_log(M, 1000.0, 2000.0) == pytest.approx(1000.0, rel=1e-10)


@pytest.mark.parametrize("kwargs", [dict(dim=1), dict(dim=2.5), dict(dim=2, kind="torus"),
                                    dict(dim=2, kind="hyperbolic", params=(-1.0,)),
                                    dict(dim=2, r_max=-1.0)])
def test_invalid_manifold(kwargs):
    with pytest.raises(DomainError):
        ModelManifold(**kwargs)


def test_nonpositive_warp_rejected():
    with pytest.raises(DomainError):
        model.polynomial([-1.0])


def test_radial_grid_contains_breakpoints():
    g = RadialGrid.annulus(1.0, 10.0, 40, "geometric", breakpoints=[2.0, 5.0])
    for r in (1.0, 2.0, 5.0, 10.0):
        assert g.nodes[g.index_of(r)] == r
    assert np.all(g.faces[:-1] < g.nodes) and np.all(g.nodes < g.faces[1:])
    with pytest.raises(DomainError):
        g.index_of(3.3)


def test_ball_grid_reaches_origin():
    g = RadialGrid.ball(2.0, 32)
    assert g.has_pole and g.faces[0] == 0.0
    assert g.nodes[-1] == 2.0
    with pytest.raises(DomainError):
        RadialGrid.ball(2.0, 32, "geometric")


def test_polar_grid_layout():
    g = PolarGrid(RadialGrid.annulus(1.0, 2.0, 4), 8)
    assert g.size == 5 * 8
    assert g.index(2, 9) == 2 * 8 + 1
    x, y = g.cartesian()
    assert np.allclose(np.hypot(x, y), g.radii)
    with pytest.raises(DomainError):
        PolarGrid(g.radial, 6)


def test_field_is_read_only():
    g = RadialGrid.annulus(1.0, 2.0, 4)
    f = model.Field(g, np.arange(5.0))
    with pytest.raises(ValueError):
        f.values[0] = 1.0
    with pytest.raises(DomainError):
        model.Field(g, np.arange(4.0))

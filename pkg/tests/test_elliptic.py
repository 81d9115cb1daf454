import math

import numpy as np
import pytest

from modelpot import model
from modelpot.elliptic import (BoundaryCondition, SolverError, UnsupportedConfiguration, assemble,
                               dirichlet_energy, dirichlet_pairing, dirichlet_solve,
                               harmonic_measure_matrix, harmonic_projection, harnack_constant,
                               perron_iterates, perron_solve)
from modelpot.model import DomainError, PolarGrid, RadialGrid


def _annulus(M, a, b, n, spacing="uniform"):
    G = RadialGrid.annulus(a, b, n, spacing)
    return G, assemble(M, G)


def _log_error(n):
    G, A = _annulus(model.euclidean(2), 1.0, 2.0, n)
    u = dirichlet_solve(A, BoundaryCondition([0, G.size - 1], [0.0, 1.0]))
    return np.max(np.abs(u.values - np.log(G.nodes) / math.log(2.0)))


def test_stiffness_is_symmetric_with_zero_row_sums():
    G = PolarGrid(RadialGrid.annulus(1.0, 3.0, 8), 8)
    A = assemble(model.hyperbolic(2), G)
    S = A.stiffness
    assert abs(S - S.T).max() < 1e-12 * abs(S).max()
    assert np.allclose(np.asarray(S.sum(axis=1)).ravel(), 0.0, atol=1e-12 * abs(S).max())
    assert np.all(A.weights().data > 0)


def test_constants_are_harmonic():
    G = PolarGrid(RadialGrid.annulus(0.5, 2.0, 10), 8)
    A = assemble(model.euclidean(2), G)
    assert np.max(np.abs(A.apply(np.full(G.size, 3.0)))) < 1e-10


def test_radial_harmonic_function_second_order():
    e64, e128 = _log_error(64), _log_error(128)
    assert e128 < 1e-5
    assert e64 / e128 > 3.0


def test_cg_agrees_with_direct():
    G, A = _annulus(model.euclidean(3), 1.0, 4.0, 200)
    bc = BoundaryCondition([0, G.size - 1], [2.0, -1.0])
    d = dirichlet_solve(A, bc).values
    c = dirichlet_solve(A, bc, method="cg").values
    assert np.max(np.abs(d - c)) < 1e-8


def test_angular_mode_on_polar_grid():
    # (r + 1/r) cos(theta) is harmonic in the plane
    G = PolarGrid(RadialGrid.annulus(1.0, 2.0, 64), 64)
    A = assemble(model.euclidean(2), G)
    x, y = G.cartesian()
    r = np.hypot(x, y)
    exact = x * (1 + 1 / r**2)
    bnodes = np.flatnonzero((G.radii == 1.0) | (G.radii == 2.0))
    u = dirichlet_solve(A, BoundaryCondition(bnodes, exact[bnodes]))
    assert np.max(np.abs(u.values - exact)) < 5e-3


def test_polar_grid_needs_dimension_two():
    G = PolarGrid(RadialGrid.annulus(1.0, 2.0, 4), 8)
    with pytest.raises(UnsupportedConfiguration):
        assemble(model.euclidean(3), G)


def test_overflowing_warp_is_reported():
    G = RadialGrid.annulus(1.0, 2000.0, 32)
    with pytest.raises(DomainError):
        assemble(model.hyperbolic(2), G)


def test_maximum_principle():
    rng = np.random.default_rng(3)
    G = PolarGrid(RadialGrid.annulus(1.0, 3.0, 12), 16)
    A = assemble(model.hyperbolic(2), G)
    bnodes = np.flatnonzero((G.radii == 1.0) | (G.radii == 3.0))
    for _ in range(5):
        vals = rng.normal(size=bnodes.size)
        u = dirichlet_solve(A, BoundaryCondition(bnodes, vals)).values
        assert u.max() <= vals.max() + 1e-12
        assert u.min() >= vals.min() - 1e-12


def test_dirichlet_principle():
    rng = np.random.default_rng(4)
    G, A = _annulus(model.euclidean(2), 1.0, 3.0, 40)
    bc = BoundaryCondition([0, G.size - 1], [1.0, 0.0])
    u = dirichlet_solve(A, bc).values
    for _ in range(10):
        v = u + np.r_[0.0, rng.normal(size=G.size - 2), 0.0]
        assert dirichlet_energy(A, v) > dirichlet_energy(A, u)
        # orthogonality of the harmonic part to compactly supported perturbations
        assert abs(dirichlet_pairing(A, u, v - u)) < 1e-10


def test_perron_iterates_increase_to_solution():
    G = PolarGrid(RadialGrid.annulus(1.0, 2.0, 6), 8)
    A = assemble(model.euclidean(2), G)
    bnodes = np.flatnonzero((G.radii == 1.0) | (G.radii == 2.0))
    x, _ = G.cartesian()
    bc = BoundaryCondition(bnodes, x[bnodes])
    start = np.full(G.size, -2.0)
    prev = start
    for u, _ in perron_iterates(A, bc, start, tol=1e-11):
        assert np.all(u.values >= prev - 1e-13)
        prev = u.values.copy()
    direct = dirichlet_solve(A, bc).values
    assert np.max(np.abs(prev - direct)) < 1e-9
    assert np.max(np.abs(perron_solve(A, bc, start).values - direct)) < 1e-9


def test_perron_rejects_bad_start():
    G, A = _annulus(model.euclidean(2), 1.0, 2.0, 10)
    bc = BoundaryCondition([0, G.size - 1], [0.0, 0.0])
    bump = np.zeros(G.size)
    bump[5] = -1.0  # a local minimum is superharmonic there
    with pytest.raises(DomainError):
        next(perron_iterates(A, bc, bump))
    with pytest.raises(DomainError):
        next(perron_iterates(A, bc, np.full(G.size, 1.0)))


def test_perron_sweep_budget():
    G, A = _annulus(model.euclidean(2), 1.0, 2.0, 50)
    bc = BoundaryCondition([0, G.size - 1], [1.0, 0.0])
    with pytest.raises(SolverError):
        perron_solve(A, bc, np.zeros(G.size), tol=1e-14, max_sweeps=3)


def test_boundary_condition_validation():
    with pytest.raises(DomainError):
        BoundaryCondition([0, 0], [1.0, 2.0])
    with pytest.raises(DomainError):
        BoundaryCondition([0, 1], [1.0, math.nan])
    G, A = _annulus(model.euclidean(2), 1.0, 2.0, 4)
    with pytest.raises(DomainError):
        dirichlet_solve(A, BoundaryCondition([0, 99], [0.0, 1.0]))


def test_harmonic_measure_is_a_probability():
    G = PolarGrid(RadialGrid.annulus(1.0, 3.0, 10), 16)
    A = assemble(model.euclidean(2), G)
    bnodes = np.flatnonzero((G.radii == 1.0) | (G.radii == 3.0))
    pts = np.flatnonzero(G.radii == G.radial.nodes[5])
    xi, order = harmonic_measure_matrix(A, bnodes, pts)
    assert np.all(xi > 0)
    assert np.allclose(xi.sum(axis=0), 1.0, atol=1e-12)
    f = np.cos(np.arange(order.size))
    u = dirichlet_solve(A, BoundaryCondition(order, f)).values
    assert np.allclose(xi.T @ f, u[pts], atol=1e-12)
    with pytest.raises(DomainError):
        harmonic_measure_matrix(A, bnodes, bnodes[:2])


def test_harnack_constant_bounds_positive_harmonic_fields():
    rng = np.random.default_rng(5)
    G = PolarGrid(RadialGrid.annulus(1.0, 4.0, 12), 16)
    A = assemble(model.euclidean(2), G)
    bnodes = np.flatnonzero((G.radii == 1.0) | (G.radii == 4.0))
    K = np.flatnonzero((G.radii > 1.7) & (G.radii < 3.3))
    lam = harnack_constant(A, bnodes, K)
    assert lam >= 1.0
    for _ in range(10):
        u = dirichlet_solve(A, BoundaryCondition(bnodes, rng.exponential(size=bnodes.size))).values
        assert u[K].max() <= lam * u[K].min() * (1 + 1e-12)


def test_harmonic_projection_pythagoras():
    G = PolarGrid(RadialGrid.annulus(0.5, 50.0, 64, "geometric"), 16)
    A = assemble(model.euclidean(2), G)
    x, y = G.cartesian()
    f = np.tanh(x) * np.exp(-0.01 * y**2)
    proj = harmonic_projection(A, f, [10.0, 20.0, 40.0], inner=0.5)
    assert abs(proj.residual) < 1e-8 * dirichlet_energy(A, f)
    with pytest.raises(DomainError):
        harmonic_projection(A, f, [20.0, 10.0])
    with pytest.raises(DomainError):
        harmonic_projection(A, f, [100.0])

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from modelpot import model
from modelpot.capacity import node_capacity
from modelpot.elliptic import BoundaryCondition, assemble, dirichlet_solve
from modelpot.equilibrium import (DiscreteMeasure, chebyshev_constant, energy, equilibrium_measure,
                                  harmonic_measure, kernel_matrix, project_simplex, random_simplex,
                                  transfinite_diameter)
from modelpot.model import DomainError, PolarGrid, RadialGrid


@pytest.fixture(scope="module")
def disk():
    G = PolarGrid(RadialGrid.ball(2.0, 12, "uniform", breakpoints=[1.0]), 8)
    A = assemble(model.euclidean(2), G)
    outer = np.flatnonzero(G.radii == 2.0)
    K = np.flatnonzero(G.radii <= 1.0)
    KM = kernel_matrix(A, K, outer)
    return G, A, outer, K, KM


def test_measure_invariants():
    with pytest.raises(DomainError):
        DiscreteMeasure(np.array([0, 1]), np.array([1.5, -0.5]))
    with pytest.raises(DomainError):
        DiscreteMeasure(np.array([0, 1]), np.array([0.5, 0.6]))
    with pytest.raises(DomainError):
        DiscreteMeasure(np.array([1, 1]), np.array([0.5, 0.5]))
    mu = DiscreteMeasure.normalized([3, 4], [1.0, 3.0])
    assert mu.to_rows() == [(3, 0.25), (4, 0.75)]
    assert DiscreteMeasure.zero().mass == 0.0


def test_energy_is_symmetric_and_positive(disk):
    _, _, _, K, KM = disk
    rng = np.random.default_rng(0)
    for a, b in zip(random_simplex(rng, K.size, 20), random_simplex(rng, K.size, 20)):
        mu, nu = DiscreteMeasure(K, a), DiscreteMeasure(K, b)
        assert energy(mu, nu, KM) == pytest.approx(energy(nu, mu, KM), rel=1e-12)
        assert energy(mu, mu, KM) > 0
    assert energy(DiscreteMeasure.zero(), DiscreteMeasure.point(int(K[0])), KM) == 0.0


def test_kernel_matrix_rejects_boundary_poles(disk):
    _, A, outer, K, _ = disk
    with pytest.raises(DomainError):
        kernel_matrix(A, np.r_[K[:2], outer[:1]], outer)
    with pytest.raises(DomainError):
        kernel_matrix(A, np.r_[K[:2], K[:1]], outer)
    with pytest.raises(DomainError):
        kernel_matrix(A, [], outer)


def test_kernel_matrix_cache_round_trip(disk, tmp_path):
    _, A, outer, K, KM = disk
    a = kernel_matrix(A, K, outer, cache_dir=tmp_path)
    assert len(list(tmp_path.glob("*.npz"))) == 1
    b = kernel_matrix(A, K, outer, cache_dir=tmp_path)
    assert a.key == b.key == KM.key
    assert np.array_equal(a.matrix, b.matrix) and np.array_equal(a.columns, b.columns)


def test_single_node_equilibrium(disk):
    _, _, _, K, KM = disk
    res = equilibrium_measure(K[:1], KM)
    assert res.epsilon == KM.matrix[0, 0]
    assert res.measure.to_rows() == [(int(K[0]), 1.0)]


def test_equilibrium_minimizes_energy(disk):
    _, _, _, K, KM = disk
    res = equilibrium_measure(K, KM)
    assert res.converged and res.psd
    rng = np.random.default_rng(1)
    for w in random_simplex(rng, K.size, 100):
        assert res.epsilon <= energy(DiscreteMeasure(K, w), DiscreteMeasure(K, w), KM) + 1e-12


def test_equilibrium_energy_decreases_with_the_set(disk):
    G, _, _, K, KM = disk
    small = K[G.radii[K] <= G.radial.nodes[4]]
    assert equilibrium_measure(K, KM).epsilon <= equilibrium_measure(small, KM).epsilon + 1e-12


def test_equilibrium_matches_capacity_on_a_ball():
    G = RadialGrid.ball(4.0, 64, "uniform", breakpoints=[1.0])
    A = assemble(model.euclidean(3), G)
    K = np.flatnonzero(G.nodes <= 1.0)
    KM = kernel_matrix(A, K, [G.size - 1])
    res = equilibrium_measure(K, KM)
    # all mass sits on the outermost node of K
    assert res.measure.support.tolist() == [int(K[-1])]
    cap = node_capacity(A, K, [G.size - 1]).cap_energy
    assert res.epsilon * cap == pytest.approx(1.0, rel=1e-10)


def test_far_field_is_a_monopole():
    G = RadialGrid.ball(4.0, 64)
    A = assemble(model.euclidean(3), G)
    K = np.arange(10)
    KM = kernel_matrix(A, K, [G.size - 1])
    mu = DiscreteMeasure(K, random_simplex(np.random.default_rng(2), K.size, 1)[0])
    far = np.arange(10, G.size)
    assert np.allclose(KM.potential(mu)[far], KM.columns[far, 0], rtol=1e-10)


def test_harmonic_measure_reproduces_boundary_data(disk):
    G, A, outer, _, _ = disk
    bnd = np.r_[np.flatnonzero(G.radii == G.radial.nodes[0]), outer]
    z0 = G.index(6, 3)
    xi = harmonic_measure(A, bnd, z0)
    assert xi.mass == 1.0 and not xi.degenerate
    f = np.sin(np.arange(G.size))
    u = dirichlet_solve(A, BoundaryCondition(xi.support, f[xi.support])).values
    assert float(xi.weights @ f[xi.support]) == pytest.approx(u[z0], abs=1e-8)


def test_harmonic_measure_is_rotation_equivariant(disk):
    G, A, outer, _, _ = disk
    a = harmonic_measure(A, outer, G.index(5, 0)).weights
    b = harmonic_measure(A, outer, G.index(5, 3)).weights
    assert np.allclose(np.roll(a, 3), b, atol=1e-12)


def test_harmonic_measure_of_a_boundary_point(disk):
    _, A, outer, _, _ = disk
    xi = harmonic_measure(A, outer, int(outer[2]))
    assert xi.degenerate and xi.to_rows() == [(int(outer[2]), 1.0)]


def test_transfinite_diameter_modes(disk):
    G, _, _, K, KM = disk
    ring = K[G.radii[K] == G.radial.nodes[5]]
    brute = transfinite_diameter(ring, KM, 3)
    ex = transfinite_diameter(ring, KM, 3, mode="exchange")
    assert ex.value == pytest.approx(brute.value, rel=1e-12)
    assert len(set(brute.points.tolist())) == 3
    with pytest.raises(DomainError):
        transfinite_diameter(ring, KM, 1)
    with pytest.raises(DomainError):
        transfinite_diameter(ring, KM, ring.size + 1)


def test_chebyshev_constant_modes(disk):
    G, _, _, K, KM = disk
    ring = K[G.radii[K] == G.radial.nodes[5]]
    for n in (1, 2, 3):
        brute = chebyshev_constant(ring, KM, n)
        greedy = chebyshev_constant(ring, KM, n, mode="greedy")
        assert greedy.value <= brute.value + 1e-12
        assert math.isfinite(brute.value)
    with pytest.raises(DomainError):
        chebyshev_constant(ring, KM, 0)


def test_transfinite_diameter_is_at_least_equilibrium_energy(disk):
    G, _, _, K, KM = disk
    ring = K[G.radii[K] == G.radial.nodes[5]]
    eps = equilibrium_measure(ring, KM).epsilon
    Z = KM.matrix[np.ix_(KM.positions(ring), KM.positions(ring))]
    # the uniform measure on any n points has energy >= eps; drop the diagonal terms
    for n in (2, 4, 8):
        rho = transfinite_diameter(ring, KM, n, mode="exchange").value
        assert rho >= (n * eps - np.max(np.diag(Z))) / (n - 1) - 1e-12


@settings(max_examples=60, deadline=None)
@given(arrays(np.float64, st.integers(1, 12), elements=st.floats(-10, 10)))
def test_projection_lands_on_the_simplex_and_is_closest(v):
    x = project_simplex(v)
    assert np.all(x >= 0) and x.sum() == pytest.approx(1.0, abs=1e-12)
    rng = np.random.default_rng(0)
    for y in random_simplex(rng, v.size, 20):
        assert np.sum((v - x) ** 2) <= np.sum((v - y) ** 2) + 1e-9

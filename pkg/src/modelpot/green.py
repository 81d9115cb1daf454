"""
Green kernels by exhaustion, with unit-flux normalization.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .capacity import DIVERGENCE_GUARD, ConsistencyError, node_capacity, power_tail
from .elliptic import assemble
from .model import DomainError, Field, PolarGrid, RadialGrid

FLUX_TOL = 1e-3
CONVERGENCE_TOL = 1e-6
MONOTONE_TOL = 1e-8


@dataclass(frozen=True, eq=False)
class GreenKernel:
    pole: int
    field: Field
    boundary: np.ndarray
    scale: float
    raw_flux: float

    @property
    def values(self):
        return self.field.values


def _pole_index(A, pole):
    if pole is None:
        grid = A.grid
        if not (isinstance(grid, RadialGrid) and grid.has_pole):
            raise DomainError("a centre pole needs a radial grid that reaches r = 0")
        return 0
    return int(pole)


def green_on_domain(A, pole, boundary):
    """Green kernel of the domain bounded by the ``boundary`` nodes.

    Solves S G = e_pole with G = 0 on the boundary; in Laplacian form this
    is Delta G = -delta_pole / V_pole. ``pole=None`` on a radial ball grid
    puts the pole at r = 0 (node 0's cell contains the origin). The total
    flux of grad G out of the domain is measured and G rescaled so that it
    is exactly -1; ``scale`` records the factor.
    """
    p = _pole_index(A, pole)
    boundary = np.unique(np.asarray(boundary, dtype=int))
    if p in set(boundary.tolist()):
        raise DomainError("the pole lies on the boundary")
    if not 0 <= p < A.size:
        raise DomainError("pole index out of range")
    solver = A.interior_solver(boundary)
    rhs = np.zeros(solver.interior.size)
    rhs[np.searchsorted(solver.interior, p)] = 1.0
    g = np.zeros(A.size)
    g[solver.interior] = solver.solve(rhs)
    raw = -float(np.sum((A.stiffness @ g)[solver.interior]))
    scale = -1.0 / raw
    return GreenKernel(p, Field(A.grid, g * scale), boundary, scale, raw)


def flux_through(A, kernel, region):
    """Outward flux of grad G through the boundary of the node set ``region``."""
    return -float(np.sum((A.stiffness @ kernel.values)[np.asarray(region, dtype=int)]))


@dataclass
class GreenExhaustion:
    radii: np.ndarray
    kernels: list
    grid: RadialGrid
    probe_values: np.ndarray
    limit: float
    sup_change: float
    verdict: str


def green_exhaustion(M, radii, probe, resolution=512, r_min=None, spacing="geometric"):
    """Radial Green kernels G_n(., 0) of the balls B_{R_n}, pole at the origin.

    All levels share one ball grid containing every ladder radius and the
    probe radius. The sequence must be pointwise nondecreasing. Verdict:
    ``converges`` when the last two levels differ by at most 1e-6 on the
    first ball; ``diverges`` when the probe values, extrapolated along the
    ladder with ``power_tail``, exceed the growth guard 1e6; otherwise
    ``inconclusive``.
    """
    radii = np.asarray(radii, dtype=float)
    if radii.size < 2 or np.any(np.diff(radii) <= 0):
        raise DomainError("need at least two increasing radii")
    if not 0 < probe < radii[0]:
        raise DomainError("the probe must lie inside the first ball")
    if r_min is None:
        r_min = min(probe, radii[0]) * 1e-3
    grid = RadialGrid.ball(radii[-1], resolution, spacing, breakpoints=[probe, *radii], r_min=r_min)
    A = assemble(M, grid)
    ip = grid.index_of(probe)
    first = grid.nodes < radii[0]
    kernels = []
    for R in radii:
        outer = np.flatnonzero(grid.nodes >= grid.nodes[grid.index_of(R)])
        kernels.append(green_on_domain(A, None, outer))
    for a, b in zip(kernels[:-1], kernels[1:]):
        drop = a.values - b.values
        if np.max(drop) > MONOTONE_TOL * max(1.0, np.max(np.abs(b.values))):
            raise ConsistencyError("Green kernels decreased along the exhaustion")
    probe_values = np.array([k.values[ip] for k in kernels])
    sup_change = float(np.max(np.abs(kernels[-1].values[first] - kernels[-2].values[first])))
    limit = float(probe_values[-1])
    if radii.size >= 3:
        limit, _ = power_tail(radii, probe_values)
    if sup_change <= CONVERGENCE_TOL:
        verdict = "converges"
    elif limit > DIVERGENCE_GUARD:
        verdict = "diverges"
    else:
        verdict = "inconclusive"
    return GreenExhaustion(radii, kernels, grid, probe_values, limit, sup_change, verdict)


def green_symmetry_check(A, p, q, boundary):
    """Relative asymmetry |G(p,q) - G(q,p)| / max of the two."""
    if int(p) == int(q):
        raise DomainError("p and q must differ")
    gp = green_on_domain(A, p, boundary)
    gq = green_on_domain(A, q, boundary)
    a, b = gp.values[int(q)], gq.values[int(p)]
    return abs(a - b) / max(abs(a), abs(b), 1e-300)


@dataclass
class Sandwich:
    min_boundary: float
    inverse_capacity: float
    max_boundary: float
    slack: float
    holds: bool
    capacity: object
    kernel: GreenKernel


def _disk_grid(M, R_K, R_Omega, resolution, n_theta):
    radial = RadialGrid.ball(R_Omega, resolution, "uniform", breakpoints=[R_K])
    if n_theta is None:
        return radial
    return PolarGrid(radial, n_theta)


def cap_green_sandwich(M, R_K, R_Omega, pole=None, resolution=128, n_theta=None):
    """min over dK of G <= 1 / Cap(K, Omega) <= max over dK of G.

    K is the ball of radius R_K, Omega the ball of radius R_Omega and dK
    the nodes of K adjacent to the complement. ``pole=None`` puts the pole
    at the origin of a radial grid; otherwise pass ``(r, theta)`` together
    with ``n_theta`` for an m = 2 polar grid.
    """
    if not 0 < R_K < R_Omega:
        raise DomainError("need 0 < R_K < R_Omega")
    if pole is not None and n_theta is None:
        raise DomainError("an off-centre pole needs a polar grid (n_theta)")
    grid = _disk_grid(M, R_K, R_Omega, resolution, n_theta)
    A = assemble(M, grid)
    radii = grid.radii
    r_k = grid.radial.nodes[grid.radial.index_of(R_K)] if n_theta else grid.nodes[grid.index_of(R_K)]
    inner = np.flatnonzero(radii <= r_k)
    outer = np.flatnonzero(radii >= radii.max())
    if pole is None:
        p = None
    else:
        r_p, th_p = pole
        if not r_p < R_K:
            raise DomainError("the pole must be interior to K")
        i = int(np.argmin(np.abs(grid.radial.nodes - r_p)))
        j = int(round(th_p / grid.dtheta)) % n_theta
        p = grid.index(i, j)
        if radii[p] >= r_k:
            raise DomainError("the pole must be interior to K")
    report = node_capacity(A, inner, outer, R_K, R_Omega)
    if not report.valid:
        raise DomainError(f"invalid capacity report: {report.issues}")
    kernel = green_on_domain(A, p, outer)
    dK = A.boundary_of(inner)
    g = kernel.values[dK]
    lo, hi = float(g.min()), float(g.max())
    inv = 1.0 / report.cap_energy
    slack = 1e-6 * hi
    holds = lo <= inv + slack and inv <= hi + slack
    return Sandwich(lo, inv, hi, slack, holds, report, kernel)

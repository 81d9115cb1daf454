"""
Condenser capacity, capacity by exhaustion, and the parabolic/hyperbolic verdict.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .elliptic import BoundaryCondition, assemble, dirichlet_energy, dirichlet_solve
from .model import DomainError, Field, RadialGrid, radial_integral

AGREEMENT_TOL = 1e-4
MONOTONE_TOL = 1e-6
PARABOLIC_RATIO = 1e-3
DIVERGENCE_GUARD = 1e6


class ConsistencyError(RuntimeError):
    """A computed sequence violates a property it must have."""


@dataclass(frozen=True)
class Condenser:
    """Radial condenser: K the closed ball of radius ``inner``, Omega the ball of radius ``outer``."""

    manifold: object
    inner: float
    outer: float

    def __post_init__(self):
        if not 0 < self.inner < self.outer:
            raise DomainError(f"need 0 < inner < outer, got {self.inner}, {self.outer}")
        if self.outer > self.manifold.r_max:
            raise DomainError("outer radius beyond r_max")


@dataclass
class CapacityReport:
    cap_energy: float
    cap_flux: float
    potential: Field
    agreement: float
    h: float
    width: int
    issues: list = field(default_factory=list)
    manifold: str = ""
    inner: object = None
    outer: object = None

    @property
    def valid(self):
        return not self.issues

    @property
    def capacity(self):
        return self.cap_energy

    def to_record(self):
        return {
            "manifold": self.manifold,
            "K": self.inner,
            "Omega": self.outer,
            "cap_energy": self.cap_energy,
            "cap_flux": self.cap_flux,
            "agreement": self.agreement,
            "h": self.h,
            "valid": self.valid,
        }


def _graph_distance(A, sources, targets):
    W = A.weights()
    seen = np.zeros(A.size, bool)
    seen[sources] = True
    frontier = seen.copy()
    goal = np.zeros(A.size, bool)
    goal[targets] = True
    d = 0
    while frontier.any():
        if (frontier & goal).any():
            return d
        reach = (W @ frontier.astype(float)) > 0
        frontier = reach & ~seen
        seen |= frontier
        d += 1
    return math.inf


def node_capacity(A, inner_nodes, outer_nodes, inner_label=None, outer_label=None):
    """Capacity of the node set K relative to the outer boundary nodes.

    The potential u is 1 on K, 0 on the outer nodes and discretely harmonic
    in between. The energy estimate is D(u); the flux estimate is the net
    flow w (u_i - u_j) across all edges leaving K, i.e. the edges of the
    first cell ring outside K.
    """
    inner_nodes = np.unique(np.asarray(inner_nodes, dtype=int))
    outer_nodes = np.unique(np.asarray(outer_nodes, dtype=int))
    if inner_nodes.size == 0 or outer_nodes.size == 0:
        raise DomainError("K and the outer boundary must be nonempty")
    if np.intersect1d(inner_nodes, outer_nodes).size:
        raise DomainError("K is not contained in the open domain")
    bc = BoundaryCondition(np.concatenate([inner_nodes, outer_nodes]),
                           np.concatenate([np.ones(inner_nodes.size), np.zeros(outer_nodes.size)]))
    u = dirichlet_solve(A, bc)
    energy = dirichlet_energy(A, u)
    flux = float(np.sum((A.stiffness @ u.values)[inner_nodes]))
    agreement = abs(energy - flux) / max(abs(energy), abs(flux), 1e-300)
    width = _graph_distance(A, inner_nodes, outer_nodes)
    issues = []
    if width < 2:
        issues.append(f"condenser gap is {width} cell(s) wide; at least 2 are needed")
    if agreement > AGREEMENT_TOL:
        issues.append(f"energy and flux estimates disagree by {agreement:.2e}")
    if energy < 0 or flux < 0:
        issues.append("negative capacity estimate")
    radial = getattr(A.grid, "radial", A.grid)
    h = float(np.max(np.diff(radial.nodes)))
    return CapacityReport(energy, flux, u, agreement, h, width, issues, A.manifold.name,
                          inner_label, outer_label)


def condenser_capacity(c, resolution=256, spacing="uniform"):
    """Capacity of a radial condenser on an annulus grid with ``resolution`` cells."""
    M = c.manifold
    grid = RadialGrid.annulus(c.inner, c.outer, max(int(resolution), 1), spacing)
    A = assemble(M, grid)
    return node_capacity(A, [0], [grid.size - 1], c.inner, c.outer)


def power_tail(x, y):
    """Extrapolate an increasing sequence y_n measured at radii x_n.

    Models the last three levels as y = y_inf - b x^(-alpha). When the
    increments shrink no faster than in the alpha -> 0 (logarithmic) case,
    the sequence is taken to diverge and ``inf`` is returned. Returns
    ``(limit, alpha)``.
    """
    x1, x2, x3 = (float(v) for v in x[-3:])
    y1, y2, y3 = (float(v) for v in y[-3:])
    d1, d2 = y2 - y1, y3 - y2
    if d2 <= 0:
        return y3, math.inf
    if d1 <= 0:
        return math.inf, -math.inf
    q = d2 / d1
    l21, l32 = math.log(x2 / x1), math.log(x3 / x2)

    def ratio(a):
        return math.exp(-a * l21) * math.expm1(-a * l32) / math.expm1(-a * l21)

    if q >= (l32 / l21) * (1 - 1e-12):
        return math.inf, 0.0
    hi = 1.0
    while ratio(hi) > q:
        hi *= 2
        if hi > 1e4:
            return y3, math.inf
    a = brentq(lambda s: ratio(s) - q, min(1e-14, hi / 2), hi, xtol=1e-15, rtol=1e-14)
    return y3 + d2 / math.expm1(a * l32), a


@dataclass
class Exhaustion:
    radii: np.ndarray
    reports: list
    capacities: np.ndarray
    limit: float | None
    bracket: tuple
    alpha: float | None

    @property
    def first(self):
        return float(self.capacities[0])


def exhaustion_capacity(M, R_K, radii, resolution=512, spacing="geometric"):
    """Cap(B_{R_K}) as the limit of Cap(B_{R_K}, B_{R_n}).

    All levels share one grid whose nodes include every ladder radius, so
    the capacity sequence is exactly nonincreasing in the discrete setting.
    The limit extrapolates the condenser resistances 1/Cap_n over the last
    three levels with ``power_tail``; with fewer levels only the bracket
    [0, Cap_N] is reported.
    """
    radii = np.asarray(radii, dtype=float)
    if radii.size == 0 or np.any(np.diff(radii) <= 0):
        raise DomainError("exhaustion radii must be strictly increasing")
    if radii[0] <= R_K:
        raise DomainError("the first exhaustion radius must exceed the radius of K")
    grid = RadialGrid.annulus(R_K, radii[-1], resolution, spacing, breakpoints=radii)
    A = assemble(M, grid)
    reports = []
    for R in radii:
        outer = np.flatnonzero(grid.nodes >= grid.nodes[grid.index_of(R)])
        reports.append(node_capacity(A, [0], outer, R_K, float(R)))
    caps = np.array([r.cap_energy for r in reports])
    if np.any(caps[1:] > caps[:-1] * (1 + MONOTONE_TOL)):
        raise ConsistencyError(f"capacity sequence is not nonincreasing: {caps}")
    limit, alpha = None, None
    if caps.size >= 3:
        res_inf, alpha = power_tail(radii, 1.0 / caps)
        limit = 0.0 if math.isinf(res_inf) else 1.0 / res_inf
    return Exhaustion(radii, reports, caps, limit, (0.0, float(caps[-1])), alpha)


def analytic_parabolic(M, R_K, guard=DIVERGENCE_GUARD):
    """Quadrature test: does the integral of sigma^(1-m) from R_K to r_max diverge?"""
    I = radial_integral(M, R_K, M.r_max)
    return I > guard, I


@dataclass
class Classification:
    verdict: str
    evidence: dict

    def __str__(self):
        return self.verdict


def classify(M, R_K, radii, resolution=512):
    """Parabolic or hyperbolic, by two tests that must agree.

    Numeric: the extrapolated Cap(B_{R_K}) falls below 1e-3 of the first
    condenser capacity. Analytic: the radial integral to r_max exceeds the
    divergence guard. Disagreement, or too few levels to extrapolate,
    gives ``inconclusive``.
    """
    ex = exhaustion_capacity(M, R_K, radii, resolution)
    analytic, integral = analytic_parabolic(M, R_K)
    evidence = {
        "manifold": M.name,
        "R_K": R_K,
        "radii": [float(r) for r in radii],
        "capacities": [float(c) for c in ex.capacities],
        "limit": ex.limit,
        "tail_exponent": ex.alpha,
        "radial_integral": integral,
        "analytic_parabolic": bool(analytic),
    }
    if ex.limit is None:
        evidence["numeric_parabolic"] = None
        return Classification("inconclusive", evidence)
    numeric = ex.limit < PARABOLIC_RATIO * ex.first
    evidence["numeric_parabolic"] = bool(numeric)
    if numeric != analytic:
        return Classification("inconclusive", evidence)
    return Classification("parabolic" if numeric else "hyperbolic", evidence)

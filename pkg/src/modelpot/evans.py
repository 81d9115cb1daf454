"""
Evans potentials on parabolic model manifolds: the closed radial form and
the convex combination of Green kernels of the exterior of a compact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field

import numpy as np
from scipy.optimize import brentq

from .capacity import classify
from .elliptic import assemble, dirichlet_energy
from .model import (DomainError, Field, PolarGrid, RadialGrid, radial_integral,
                    radial_integral_log)

STABILITY_TOL = 1e-4
ENERGY_TOL = 2e-2
BOUNDED_TOL = 1e-2
DEFAULT_RING_FACTORS = (1.0, 2.0, 4.0)
POLES_PER_RING = 8


class PreconditionError(DomainError):
    """The manifold does not have the type a construction requires."""


def dyadic_weights(levels):
    w = 0.5 ** np.arange(1, levels + 1)
    return w / w.sum()


def _require(M, R_K, verdict):
    ladder = R_K * 2.0 ** np.arange(1, 8)
    ladder = ladder[ladder < M.r_max]
    c = classify(M, R_K, ladder)
    if c.verdict != verdict:
        raise PreconditionError(f"{M.name} classifies as {c.verdict}, need {verdict}")
    return c


@dataclass
class EvansPotential:
    manifold: object
    R_K: float
    construction: str
    field: Field | None = None
    weights: np.ndarray | None = None
    poles: np.ndarray | None = None
    truncation: float | None = None
    meta: dict = dc_field(default_factory=dict)

    def __call__(self, r):
        """E at radius r (radial construction only)."""
        if self.construction != "radial-closed-form":
            raise DomainError("pointwise evaluation needs the radial construction")
        r = np.atleast_1d(np.asarray(r, dtype=float))
        out = np.array([radial_integral(self.manifold, self.R_K, x) if x > self.R_K else 0.0
                        for x in r])
        return out / self.manifold.omega

    def at_log_radius(self, t):
        """E at r = exp(t), usable far beyond floating-point radii."""
        tk = math.log(self.R_K)
        if t <= tk:
            return 0.0
        return radial_integral_log(self.manifold, tk, t) / self.manifold.omega

    def on_grid(self, grid):
        return Field(grid, self(grid.radii))

    def profile(self):
        """(r, E) pairs: the mean over each circle for gridded potentials."""
        g = self.field.grid
        if isinstance(g, PolarGrid):
            v = self.field.values.reshape(g.radial.size, g.n_theta)
            return g.radial.nodes, v.mean(axis=1)
        return g.nodes, self.field.values

    def to_record(self):
        rec = {"manifold": self.manifold.name, "R_K": self.R_K, "construction": self.construction}
        if self.weights is not None:
            rec["weights"] = [float(w) for w in self.weights]
        if self.poles is not None:
            rec["poles"] = [[float(a) for a in p] for p in self.poles]
        if self.truncation is not None:
            rec["truncation"] = self.truncation
        rec.update(self.meta)
        return rec


def evans_radial(M, R_K, check=True):
    """E(r) = radial_integral(R_K, r) / omega, harmonic off B_{R_K} with unit flux.

    Zero on the sphere of radius R_K and unbounded exactly when the
    manifold is parabolic, which is required (``check=False`` skips the
    classification).
    """
    if not 0 < R_K < M.r_max:
        raise DomainError("need 0 < R_K < r_max")
    if check:
        _require(M, R_K, "parabolic")
    return EvansPotential(M, float(R_K), "radial-closed-form")


def level_radius(E, c):
    """Radius where the radial Evans potential reaches c, found in log-radius."""
    tk = math.log(E.R_K)
    hi = tk + 1.0
    while E.at_log_radius(hi) < c:
        hi = tk + 2 * (hi - tk)
        if hi > 690:
            raise DomainError(f"level {c} is beyond representable radii")
    return math.exp(brentq(lambda t: E.at_log_radius(t) - c, tk, hi, xtol=1e-14, rtol=1e-15))


@dataclass
class ProperReport:
    targets: list
    log_radii: list
    values: list
    monotone: bool
    reached: bool


def properness_check(E, targets=(1.0, 10.0, 100.0, 1000.0), max_doublings=14):
    """Find, along a log-radius ladder, where E first exceeds each target.

    The ladder is t_k = log R_K + 2^k (k = -2 .. max_doublings - 1),
    integrated piece by piece in log-radius so radii far beyond floating
    point range are reachable.
    """
    tk = math.log(E.R_K)
    ladder = tk + 2.0 ** np.arange(-2, max_doublings)
    if math.isfinite(E.manifold.r_max):
        ladder = ladder[ladder < math.log(E.manifold.r_max)]
    M = E.manifold
    steps = [radial_integral_log(M, a, b) for a, b in zip(np.r_[tk, ladder[:-1]], ladder)]
    values = np.cumsum(steps) / M.omega
    finite = np.isfinite(values)
    if not finite.all():
        # keep the first overflowing level; it already exceeds every target
        stop = int(np.argmin(finite)) + 1
        ladder, values = ladder[:stop], values[:stop]
    monotone = bool(np.all(np.diff(values[np.isfinite(values)]) >= 0))
    found = []
    for N in targets:
        hit = np.flatnonzero(values > N)
        found.append(float(ladder[hit[0]]) if hit.size else math.nan)
    return ProperReport(list(targets), found, values.tolist(), monotone,
                        not any(math.isnan(x) for x in found))


@dataclass
class EnergyReport:
    levels: list
    energies: list
    ratios: list
    bound_holds: bool
    equality_holds: bool | None

    @property
    def ok(self):
        return self.bound_holds and self.equality_holds in (None, True)


def truncated_energy_check(E, levels, resolution=2048):
    """D(min(E, c)) for each level c.

    The bound D <= c (1 + 2%) always applies; for the radial construction
    the unit-flux normalization also gives equality within 2%.
    """
    levels = [float(c) for c in levels]
    if E.construction == "radial-closed-form":
        rc = [level_radius(E, c) for c in levels if c > 0]
        grid = RadialGrid.annulus(E.R_K, 2 * max(rc), resolution, "geometric", breakpoints=rc)
        A = assemble(E.manifold, grid)
        values = E(grid.nodes)
        equality = True
    else:
        A = assemble(E.manifold, E.field.grid)
        values = E.field.values
        equality = None
    energies, ratios = [], []
    for c in levels:
        d = dirichlet_energy(A, np.minimum(values, c))
        energies.append(d)
        ratios.append(d / c if c > 0 else 0.0)
    bound = all(d <= c * (1 + ENERGY_TOL) for d, c in zip(energies, levels))
    if equality is not None:
        equality = all(abs(r - 1) <= ENERGY_TOL for r, c in zip(ratios, levels) if c > 0)
    return EnergyReport(levels, energies, ratios, bound, equality)


def _pole_nodes(grid, radii):
    """Node indices of the poles on rings at the given radii."""
    if isinstance(grid, PolarGrid):
        stride = grid.n_theta // POLES_PER_RING
        poles, where = [], []
        for rho in radii:
            i = grid.radial.index_of(rho)
            for j in range(POLES_PER_RING):
                poles.append(grid.index(i, j * stride))
                where.append((rho, j * stride * grid.dtheta))
        return np.array(poles), np.array(where)
    idx = np.array([grid.index_of(rho) for rho in radii])
    return idx, np.array([(rho, 0.0) for rho in radii])


def _exterior_grid(M, R_K, radii, R_T, n_theta, per_unit_log):
    cells = max(16, int(math.ceil(per_unit_log * math.log(2 * R_T / R_K))))
    radial = RadialGrid.annulus(R_K, 2 * R_T, cells, "geometric", breakpoints=[*radii, R_T])
    if M.dim == 2:
        return PolarGrid(radial, n_theta)
    return radial


def _combination(A, grid, poles, ring_weights, boundary):
    solver = A.interior_solver(boundary)
    rhs = np.zeros((solver.interior.size, poles.size))
    rhs[np.searchsorted(solver.interior, poles), np.arange(poles.size)] = 1.0
    cols = np.zeros((A.size, poles.size))
    cols[solver.interior] = solver.solve(rhs)
    per_pole = np.repeat(ring_weights, poles.size // ring_weights.size) / (poles.size // ring_weights.size)
    return cols @ per_pole


def _truncation_candidates(rho_max, count=10):
    k = np.arange(count)
    return 2 * rho_max * 2.0 ** (2.0 ** k - 1)


def evans_green_combination(M, R_K, rho1, ring_factors=DEFAULT_RING_FACTORS, weights=None,
                            n_theta=32, check=True, require_parabolic=True):
    """E = sum_k t_k G(., p_k): Green kernels of the exterior of B_{R_K}.

    Poles sit on rings of radii rho1 * ring_factors (8 per ring for m = 2,
    one shell per ring for radial grids), with dyadic ring weights
    renormalized to sum 1. Kernels vanish on the sphere of radius R_K and
    on an outer truncation R_T. R_T runs through 2 rho_max * 2^(2^k - 1)
    and the first value for which doubling R_T moves E by at most 1e-4
    (relative, on r <= rho_max) is kept; if none is stable the last one
    is used and the instability reported in ``meta``.
    """
    radii = rho1 * np.asarray(ring_factors, dtype=float)
    if not R_K < radii[0] or np.any(np.diff(radii) <= 0):
        raise DomainError("pole rings must be increasing and outside K")
    if check:
        _require(M, R_K, "parabolic" if require_parabolic else "hyperbolic")
    t = dyadic_weights(radii.size) if weights is None else np.asarray(weights, dtype=float)
    if t.size != radii.size or abs(t.sum() - 1) > 1e-12 or np.any(t < 0):
        raise DomainError("ring weights must be a convex combination, one per ring")
    if M.dim == 2 and n_theta % POLES_PER_RING:
        raise DomainError(f"n_theta must be a multiple of {POLES_PER_RING}")
    per_unit_log = n_theta / (2 * math.pi) if M.dim == 2 else 64.0
    rho_max = radii[-1]
    E = None
    history = []
    for R_T in _truncation_candidates(rho_max):
        if 2 * R_T >= M.r_max or M.sigma(np.array([2 * R_T]))[0] > 1e140:
            break
        grid = _exterior_grid(M, R_K, radii, R_T, n_theta, per_unit_log)
        A = assemble(M, grid)
        rr = grid.radii
        inner = np.flatnonzero(rr <= R_K * (1 + 1e-12))
        at_T = np.flatnonzero(rr >= R_T * (1 - 1e-12))
        at_2T = np.flatnonzero(rr >= rr.max() * (1 - 1e-12))
        poles, where = _pole_nodes(grid, radii)
        e1 = _combination(A, grid, poles, t, np.concatenate([inner, at_T]))
        e2 = _combination(A, grid, poles, t, np.concatenate([inner, at_2T]))
        probe = rr <= rho_max * (1 + 1e-12)
        change = float(np.max(np.abs(e2[probe] - e1[probe])) / np.max(np.abs(e2[probe])))
        history.append((float(R_T), change))
        E = (grid, e1, R_T, where, change)
        if change <= STABILITY_TOL:
            break
    if E is None:
        raise DomainError("no admissible truncation radius")
    grid, values, R_T, where, change = E
    meta = {"truncation_history": history, "stable": change <= STABILITY_TOL,
            "n_theta": n_theta if M.dim == 2 else None}
    return EvansPotential(M, float(R_K), "green-combination", Field(grid, values), t, where,
                          float(R_T), meta)


def sphere_minima(E):
    """(radius, min of E over the sphere) for every grid circle/shell."""
    g = E.field.grid
    if isinstance(g, PolarGrid):
        v = E.field.values.reshape(g.radial.size, g.n_theta)
        return g.radial.nodes, v.min(axis=1), v.max(axis=1)
    return g.nodes, E.field.values, E.field.values


@dataclass
class CombinationReport:
    boundary_ratio: float
    monotone_inside: bool
    agreement: float
    stable: bool
    issues: list

    @property
    def ok(self):
        return not self.issues


def check_combination(E, reference=None, agreement_tol=2e-2):
    """Boundary value, monotone sphere minima up to the outer pole ring and
    pointwise agreement with a reference radial potential inside the
    innermost ring (1 < r/R_K and r <= rho_1 / 2)."""
    issues = []
    r, lo, hi = sphere_minima(E)
    vmax = float(np.max(E.field.values))
    on_K = np.abs(hi[np.isclose(r, E.R_K, rtol=1e-12)])
    ratio = float(on_K.max() / vmax) if on_K.size else 0.0
    if ratio > 1e-6:
        issues.append(f"E on the boundary of K is {ratio:.2e} of max E")
    rho = E.poles[:, 0]
    upto = r <= rho.max() * (1 + 1e-12)
    monotone = bool(np.all(np.diff(lo[upto]) >= -1e-12 * vmax))
    if not monotone:
        issues.append("sphere minima decrease inside the pole rings")
    agreement = math.nan
    if reference is not None:
        rr = E.field.grid.radii
        sel = (rr > E.R_K * (1 + 1e-12)) & (rr <= rho.min() / 2)
        ref = reference(rr[sel])
        agreement = float(np.max(np.abs(E.field.values[sel] - ref) / ref))
        if agreement > agreement_tol:
            issues.append(f"combination differs from the reference by {agreement:.3%}")
    stable = bool(E.meta.get("stable", True))
    if not stable:
        issues.append("outer truncation not stable at 1e-4")
    return CombinationReport(ratio, monotone, agreement, stable, issues)


@dataclass
class BoundednessReport:
    scales: list
    sup_values: list
    bounded: bool
    truncations: list


def evans_implies_parabolic_check(M, R_K, scales, ring_factors=DEFAULT_RING_FACTORS, n_theta=32,
                                  require_hyperbolic=True):
    """Run the combination scheme with pole rings pushed outward.

    For each innermost ring radius rho_1 in ``scales`` the scheme yields
    E_s; S_s is the max of E_s over r <= rho_1, the region the poles have
    swept past. On a hyperbolic manifold these stay bounded: the last
    value is within 1% of (or below) the one before. On a parabolic
    manifold S_s grows like the radial Evans potential.
    """
    if require_hyperbolic:
        _require(M, R_K, "hyperbolic")
    sups, truncs = [], []
    for rho1 in scales:
        E = evans_green_combination(M, R_K, rho1, ring_factors, n_theta=n_theta, check=False)
        rr = E.field.grid.radii
        sups.append(float(np.max(E.field.values[rr <= rho1 * (1 + 1e-12)])))
        truncs.append(E.truncation)
    bounded = sups[-1] <= sups[-2] * (1 + BOUNDED_TOL)
    return BoundednessReport(list(scales), sups, bool(bounded), truncs)

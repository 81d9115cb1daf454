"""
Acceptance checks at desk scale, shared by the ``suite`` command and the
test suite. Every tolerance below is fixed; nothing is tuned per run.
"""

from __future__ import annotations

import filecmp
import math
import shutil
import tempfile
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import model
from .capacity import Condenser, classify, condenser_capacity, exhaustion_capacity
from .elliptic import (BoundaryCondition, assemble, dirichlet_energy, dirichlet_solve,
                       harmonic_projection, harnack_constant)
from .equilibrium import (chebyshev_constant, equilibrium_measure, equilibrium_potential_check,
                          kernel_matrix, transfinite_diameter)
from .evans import (check_combination, evans_green_combination, evans_implies_parabolic_check,
                    evans_radial, properness_check, truncated_energy_check)
from .green import cap_green_sandwich, green_exhaustion
from .io import Table, write_csv, write_json
from .model import PolarGrid, RadialGrid, radial_integral

# criterion 1
CAP_REL_TOL = 1e-2
CAP_AGREE_TOL = 1e-4
# criterion 3
GREEN_LIMIT_TOL = 1e-2
GREEN_LADDER_TOL = 1e-4
# criterion 4
SANDWICH_SLACK = 1e-6
COLLAPSE_TOL = 1e-4
# criterion 5
PYTHAGORAS_TOL = 1e-8
# criterion 6
HARNACK_SLACK = 5e-2
# criterion 7
EPS_CAP_TOL = 2e-2
POTENTIAL_BOUND_TOL = 1e-2
POTENTIAL_MATCH_TOL = 2e-2
# criterion 8
CHAIN_SLACK = 5e-2
EXCHANGE_CHECK_LIMIT = 100_000
# criterion 9
EVANS_PROFILE_TOL = 1e-3
EVANS_ENERGY_TOL = 2e-2
EVANS_BOUNDARY_TOL = 1e-8
EVANS_TARGET = 1e3
COMBINATION_TOL = 2e-2
# criterion 10
SPREAD_TOL = 1e-3
ORTHOGONALITY_TOL = 1e-6

TITLES = {
    1: "capacity oracle",
    2: "parabolic/hyperbolic classification",
    3: "Green exhaustion",
    4: "capacity-Green sandwich",
    5: "Dirichlet principle",
    6: "maximum principle and Harnack",
    7: "equilibrium measure",
    8: "transfinite diameter / Chebyshev ordering",
    9: "Evans potential",
    10: "harmonic projection",
    11: "determinism",
}


def bundled_manifolds():
    return {
        "euclidean-2": model.euclidean(2),
        "euclidean-3": model.euclidean(3),
        "hyperbolic-2": model.hyperbolic(2),
        "cylinder-2": model.cylinder(2),
    }


# verdicts stated for the bundled manifolds; the quadrature oracle must agree
STATED_TYPES = {"euclidean-2": "parabolic", "euclidean-3": "hyperbolic",
                "hyperbolic-2": "hyperbolic", "cylinder-2": "parabolic"}


@dataclass
class CriterionResult:
    number: int
    passed: bool
    metrics: dict
    tables: dict = field(default_factory=dict)
    checks: dict = field(default_factory=dict)
    seconds: float = 0.0

    @property
    def title(self):
        return TITLES[self.number]

    def line(self):
        status = "PASS" if self.passed else "FAIL"
        failed = [k for k, v in self.checks.items() if not v]
        tail = f"  failed: {', '.join(failed)}" if failed else ""
        return f"[{status}] criterion {self.number:2d}: {self.title}{tail}"


def _rng(seed, number):
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(number)]))


def _finish(number, checks, metrics, tables):
    return CriterionResult(number, all(checks.values()), metrics, tables, checks)


def criterion_1(seed):
    M = model.euclidean(3)
    oracle = M.omega / radial_integral(M, 1.0, 2.0)
    t = Table(["cells", "cap_energy", "cap_flux", "oracle", "relative_error", "agreement"])
    for cells in (32, 64, 128, 256):
        rep = condenser_capacity(Condenser(M, 1.0, 2.0), cells)
        t.add(cells, rep.cap_energy, rep.cap_flux, oracle, abs(rep.cap_energy - oracle) / oracle,
              rep.agreement)
    rel = abs(rep.cap_energy - oracle) / oracle
    checks = {"within 1% of 8 pi": rel <= CAP_REL_TOL,
              "oracle equals 8 pi": abs(oracle - 8 * math.pi) <= 1e-9 * oracle,
              "energy/flux agreement": rep.agreement <= CAP_AGREE_TOL,
              "report valid": rep.valid}
    return _finish(1, checks, {"capacity": rep.cap_energy, "oracle": oracle, "relative_error": rel,
                               "agreement": rep.agreement}, {"capacity": t})


def criterion_2(seed):
    ladder = 2.0 ** np.arange(1, 8)
    t = Table(["manifold", "verdict", "oracle", "stated", "limit", "first", "radial_integral"])
    checks = {}
    for name, M in bundled_manifolds().items():
        c = classify(M, 1.0, ladder, resolution=512)
        oracle = "parabolic" if math.isinf(radial_integral(M, 1.0, math.inf)) else "hyperbolic"
        ev = c.evidence
        t.add(name, c.verdict, oracle, STATED_TYPES[name], ev["limit"], ev["capacities"][0],
              ev["radial_integral"])
        checks[f"{name} matches oracle"] = c.verdict == oracle == STATED_TYPES[name]
    return _finish(2, checks, {}, {"classification": t})


def criterion_3(seed):
    target = 1 / (4 * math.pi)
    M3 = model.euclidean(3)
    oracle = radial_integral(M3, 1.0, math.inf) / M3.omega
    a = green_exhaustion(M3, [1e3, 1e4, 1e5, 1e6], 1.0)
    b = green_exhaustion(M3, [2e3, 2e4, 2e5, 2e6], 1.0)
    c = green_exhaustion(model.euclidean(2), [1e3, 1e4, 1e5, 1e6], 1.0)
    t = Table(["manifold", "ladder", "R", "probe_value"])
    for name, ex, lab in (("euclidean-3", a, "A"), ("euclidean-3", b, "B"), ("euclidean-2", c, "A")):
        for R, v in zip(ex.radii, ex.probe_values):
            t.add(name, lab, R, v)
    ladder_gap = abs(a.limit - b.limit) / abs(a.limit)
    closed = np.log(c.radii) / (2 * math.pi)
    checks = {"m=3 converges": a.verdict == "converges" and b.verdict == "converges",
              "m=3 limit within 1% of 1/4pi": abs(a.limit - target) <= GREEN_LIMIT_TOL * target,
              "oracle equals 1/4pi": abs(oracle - target) <= 1e-9 * target,
              "ladders agree": ladder_gap <= GREEN_LADDER_TOL,
              "m=2 diverges": c.verdict == "diverges",
              "m=2 probe grows like log R / 2pi":
                  float(np.max(np.abs(c.probe_values - closed) / closed)) <= 1e-3}
    return _finish(3, checks, {"limit_A": a.limit, "limit_B": b.limit, "ladder_gap": ladder_gap,
                               "m2_extrapolated": c.limit, "m2_probe": list(c.probe_values)},
                   {"probe_values": t})


def criterion_4(seed):
    rng = _rng(seed, 4)
    names = list(bundled_manifolds())
    mans = bundled_manifolds()
    t = Table(["case", "manifold", "R_K", "R_Omega", "pole_r", "pole_theta", "min_dK", "inv_cap",
               "max_dK", "holds"])
    checks = {}
    s = cap_green_sandwich(model.euclidean(3), 1.0, 2.0, resolution=256)
    t.add(0, "euclidean-3", 1.0, 2.0, 0.0, 0.0, s.min_boundary, s.inverse_capacity, s.max_boundary,
          s.holds)
    checks["B1 in B2 (m=3) collapses to 1/(8 pi)"] = (
        s.holds and (s.max_boundary - s.min_boundary) <= COLLAPSE_TOL * s.inverse_capacity
        and abs(s.inverse_capacity - 1 / (8 * math.pi)) <= 1e-2 / (8 * math.pi))
    worst_collapse = 0.0
    for k in range(1, 11):
        name = names[int(rng.integers(len(names)))]
        M = mans[name]
        R_K = float(rng.uniform(0.5, 1.5))
        R_O = R_K * float(rng.uniform(1.5, 4.0))
        off = M.dim == 2 and k % 2 == 0
        if off:
            pole = (R_K * float(rng.uniform(0.1, 0.8)), float(rng.uniform(0, 2 * math.pi)))
            s = cap_green_sandwich(M, R_K, R_O, pole=pole, resolution=48, n_theta=16)
        else:
            pole = (0.0, 0.0)
            s = cap_green_sandwich(M, R_K, R_O, resolution=128)
        t.add(k, name, R_K, R_O, pole[0], pole[1], s.min_boundary, s.inverse_capacity,
              s.max_boundary, s.holds)
        ok = s.holds and s.min_boundary <= s.inverse_capacity + SANDWICH_SLACK * s.max_boundary \
            and s.inverse_capacity <= s.max_boundary * (1 + SANDWICH_SLACK)
        if off:
            ok = ok and s.min_boundary < s.inverse_capacity < s.max_boundary
        else:
            gap = (s.max_boundary - s.min_boundary) / s.inverse_capacity
            worst_collapse = max(worst_collapse, gap)
            ok = ok and gap <= COLLAPSE_TOL
        checks[f"condenser {k}"] = bool(ok)
    return _finish(4, checks, {"worst_collapse_gap": worst_collapse}, {"sandwich": t})


def _test_domains():
    """Annular domains used by the Dirichlet-principle and maximum-principle checks."""
    out = []
    for name, M in bundled_manifolds().items():
        if M.dim == 2:
            g = PolarGrid(RadialGrid.annulus(1.0, 3.0, 24, "uniform"), 16)
            bnd = np.concatenate([g.ring(0), g.ring(g.radial.size - 1)])
        else:
            g = RadialGrid.annulus(1.0, 3.0, 64, "uniform")
            bnd = np.array([0, g.size - 1])
        out.append((name, assemble(M, g), bnd))
    return out


def criterion_5(seed):
    rng = _rng(seed, 5)
    domains = _test_domains()
    t = Table(["trial", "manifold", "D_f", "D_u", "D_f_minus_u", "relative_defect"])
    worst, dominated = 0.0, True
    for trial in range(50):
        name, A, bnd = domains[trial % len(domains)]
        r = A.grid.radii
        theta = getattr(A.grid, "angles", np.zeros(A.size))
        f = (rng.normal() + rng.normal() * np.cos(theta + rng.uniform(0, 6.3)) * r
             + 0.3 * rng.normal(size=A.size))
        u = dirichlet_solve(A, BoundaryCondition(bnd, f[bnd]))
        Df, Du, Dh = dirichlet_energy(A, f), dirichlet_energy(A, u), dirichlet_energy(A, f - u.values)
        defect = abs(Df - Du - Dh) / Df
        worst = max(worst, defect)
        dominated &= Du <= Df * (1 + 1e-12)
        t.add(trial, name, Df, Du, Dh, defect)
    checks = {"Pythagoras defect <= 1e-8 D(f)": worst <= PYTHAGORAS_TOL,
              "harmonic extension minimizes energy": bool(dominated)}
    return _finish(5, checks, {"worst_defect": worst}, {"dirichlet": t})


def criterion_6(seed):
    rng = _rng(seed, 6)
    domains = _test_domains()
    t = Table(["trial", "manifold", "bc_min", "bc_max", "u_min", "u_max", "violations"])
    total = 0
    for trial in range(100):
        name, A, bnd = domains[trial % len(domains)]
        vals = rng.uniform(-1, 1, bnd.size) * rng.uniform(0.1, 10)
        u = dirichlet_solve(A, BoundaryCondition(bnd, vals)).values
        tol = 1e-12 * np.max(np.abs(vals))
        v = int(np.sum(u > vals.max() + tol) + np.sum(u < vals.min() - tol))
        total += v
        t.add(trial, name, vals.min(), vals.max(), u.min(), u.max(), v)
    g = PolarGrid(RadialGrid.annulus(1.0, 4.0, 24, "uniform"), 16)
    A = assemble(model.euclidean(2), g)
    bnd = np.concatenate([g.ring(0), g.ring(g.radial.size - 1)])
    K = np.flatnonzero((g.radii >= 1.75) & (g.radii <= 3.25))
    lam = harnack_constant(A, bnd, K)
    h = Table(["trial", "ratio", "Lambda"])
    worst = 0.0
    for trial in range(20):
        vals = rng.exponential(size=bnd.size) * (rng.uniform(size=bnd.size) < 0.3) + 1e-3
        u = dirichlet_solve(A, BoundaryCondition(bnd, vals)).values[K]
        ratio = float(u.max() / u.min())
        worst = max(worst, ratio)
        h.add(trial, ratio, lam)
    checks = {"no max-principle violations": total == 0,
              "Harnack ratios bounded by Lambda": worst <= lam * (1 + HARNACK_SLACK)}
    return _finish(6, checks, {"violations": total, "Lambda": lam, "worst_ratio": worst},
                   {"maximum_principle": t, "harnack": h})


def criterion_7(seed):
    M = model.euclidean(3)
    R = 1000.0
    g = RadialGrid.ball(R, 256, "geometric", breakpoints=[1.0], r_min=1e-2)
    A = assemble(M, g)
    K = np.flatnonzero(g.nodes <= 1.0 * (1 + 1e-12))
    KM = kernel_matrix(A, K, [g.size - 1])
    eq = equilibrium_measure(K, KM)
    cap = exhaustion_capacity(M, 1.0, [10.0, 100.0, 1e3, 1e4]).limit
    cond = condenser_capacity(Condenser(M, 1.0, R), resolution=512, spacing="geometric")
    probes = np.flatnonzero((g.nodes > 1.0 * (1 + 1e-12)) & (g.nodes < R))
    u = np.interp(np.log(g.nodes[probes]), np.log(cond.potential.grid.nodes), cond.potential.values)
    rep = equilibrium_potential_check(eq.measure, eq.epsilon, KM, u, probes,
                                      POTENTIAL_BOUND_TOL, POTENTIAL_MATCH_TOL)
    G_nu = KM.potential(eq.measure)
    t = Table.columns(r=g.nodes, G_nu=G_nu, eps_u=np.interp(np.log(g.nodes),
                      np.log(cond.potential.grid.nodes), cond.potential.values,
                      left=1.0) * eq.epsilon)
    m = Table(["node", "r", "weight"])
    for i, w in eq.measure.to_rows():
        m.add(i, g.nodes[i], w)
    on_sphere = float(sum(w for i, w in eq.measure.to_rows() if abs(g.nodes[i] - 1.0) < 1e-12))
    prod = eq.epsilon * cap
    checks = {"optimizer converged": eq.converged,
              "epsilon * Cap(B1) = 1 within 2%": abs(prod - 1) <= EPS_CAP_TOL,
              "G_nu <= epsilon (1 + 1%)": rep.max_potential <= eq.epsilon * (1 + POTENTIAL_BOUND_TOL),
              "G_nu = epsilon u within 2% off K": rep.max_relative_error <= POTENTIAL_MATCH_TOL,
              "measure lives on the unit sphere": on_sphere >= 1 - 1e-8}
    return _finish(7, checks, {"epsilon": eq.epsilon, "capacity": cap, "product": prod,
                               "max_potential": rep.max_potential,
                               "match_error": rep.max_relative_error, "mass_on_sphere": on_sphere},
                   {"potential": t, "measure": m})


def _ring_instance(M, a, R, n_theta, cells):
    rg = RadialGrid.ball(R, cells, "geometric", breakpoints=[a], r_min=a * 1e-3)
    g = PolarGrid(rg, n_theta)
    A = assemble(M, g)
    K = g.ring(rg.index_of(a))
    return K, kernel_matrix(A, K, g.ring(rg.size - 1))


def criterion_8(seed):
    K, KM = _ring_instance(model.euclidean(2), 1e-4, 1.0, 20, 64)
    eq = equilibrium_measure(K, KM)
    ns = range(2, 7)
    rho = {n: transfinite_diameter(K, KM, n, "brute").value for n in ns}
    tau = {n: chebyshev_constant(K, KM, n, "brute").value for n in range(1, 7)}
    t = Table(["n", "rho_brute", "rho_exchange", "tau_brute", "tau_greedy", "epsilon"])
    exchange_ok = True
    for n in ns:
        ex = transfinite_diameter(K, KM, n, "exchange").value
        exchange_ok &= abs(ex - rho[n]) <= 1e-12 * abs(rho[n])
        t.add(n, rho[n], ex, tau[n], chebyshev_constant(K, KM, n, "greedy").value, eq.epsilon)
    K2, KM2 = _ring_instance(model.hyperbolic(2), 0.5, 2.0, 16, 64)
    for n in ns:
        if math.comb(K2.size, n) <= EXCHANGE_CHECK_LIMIT:
            a = transfinite_diameter(K2, KM2, n, "brute").value
            b = transfinite_diameter(K2, KM2, n, "exchange").value
            exchange_ok &= abs(a - b) <= 1e-12 * abs(a)
    superadd = all((n + m) * tau[n + m] >= n * tau[n] + m * tau[m] - 1e-12 * tau[n + m]
                   for n in range(1, 6) for m in range(1, 7 - n))
    rho_est, tau_est = rho[6], max(tau.values())
    checks = {"rho_n nondecreasing": all(rho[n + 1] >= rho[n] for n in range(2, 6)),
              "tau superadditive": superadd,
              "tau_n >= rho_n": all(tau[n] >= rho[n] for n in ns),
              "tau estimate >= rho estimate": tau_est >= rho_est * (1 - CHAIN_SLACK),
              "rho estimate >= epsilon within 5%": rho_est >= eq.epsilon * (1 - CHAIN_SLACK),
              "exchange equals brute force": bool(exchange_ok)}
    return _finish(8, checks, {"epsilon": eq.epsilon, "rho_6": rho_est, "tau_best": tau_est,
                               "rho_over_eps": rho_est / eq.epsilon}, {"ordering": t})


def criterion_9(seed):
    M = model.euclidean(2)
    E = evans_radial(M, 1.0)
    r = np.geomspace(1.0, math.exp(2 * math.pi), 65)
    vals = E(r)
    closed = np.log(r) / (2 * math.pi)
    prof_err = float(np.max(np.abs(vals - closed)))
    levels = [0.25, 0.5, 1.0, 2.0]
    energy = truncated_energy_check(E, levels)
    proper = properness_check(E, targets=(1.0, 10.0, 100.0, EVANS_TARGET))
    comb = evans_green_combination(M, 1.0, 4.0)
    crep = check_combination(comb, E, COMBINATION_TOL)
    bounded = {}
    for name, sc in (("euclidean-3", [4.0, 16.0, 64.0]), ("hyperbolic-2", [2.0, 4.0, 8.0])):
        bounded[name] = evans_implies_parabolic_check(bundled_manifolds()[name], 1.0, sc)
    control = evans_implies_parabolic_check(M, 1.0, [4.0, 16.0, 64.0], require_hyperbolic=False)
    rr, mean = comb.profile()
    sel = rr <= 64.0
    tables = {"radial_profile": Table.columns(r=r, E=vals, closed_form=closed),
              "truncated_energy": Table.columns(c=levels, D=energy.energies, ratio=energy.ratios),
              "combination_profile": Table.columns(r=rr[sel], E_mean=mean[sel],
                                                   E_radial=E(rr[sel]))}
    b = Table(["manifold", "rho1", "sup_E"])
    for name, rep in [*bounded.items(), ("euclidean-2 (control)", control)]:
        for s, v in zip(rep.scales, rep.sup_values):
            b.add(name, s, v)
    tables["boundedness"] = b
    checks = {"radial profile = log r / 2pi within 1e-3": prof_err <= EVANS_PROFILE_TOL,
              "E(e^2pi) = 1 within 1e-6": abs(float(E(math.exp(2 * math.pi))[0]) - 1) <= 1e-6,
              "D(E ^ c) = c within 2%": all(abs(x - 1) <= EVANS_ENERGY_TOL for x in energy.ratios),
              "E vanishes on dK": abs(float(E(1.0)[0])) <= EVANS_BOUNDARY_TOL,
              "E exceeds 1e3 on the ladder": proper.reached and proper.monotone,
              "combination agrees within 2%": crep.ok,
              "bounded on euclidean-3": bounded["euclidean-3"].bounded,
              "bounded on hyperbolic-2": bounded["hyperbolic-2"].bounded,
              "parabolic control unbounded": not control.bounded}
    return _finish(9, checks, {"profile_error": prof_err, "energy_ratios": energy.ratios,
                               "log_radius_for_1e3": proper.log_radii[-1],
                               "combination_agreement": crep.agreement,
                               "truncation": comb.truncation}, tables)


def criterion_10(seed):
    rng = _rng(seed, 10)
    rg = RadialGrid.ball(1e4, 160, "geometric", breakpoints=[10.0, 100.0, 1e3], r_min=1e-2)
    g = PolarGrid(rg, 16)
    A = assemble(model.euclidean(2), g)
    r, th = g.radii, g.angles
    truncs = [10.0, 100.0, 1e3, 1e4]
    t = Table(["field", "manifold", "spread", "change", "orthogonality_defect"])
    spreads = []
    for k in range(10):
        c, b = rng.uniform(-1, 1, 2)
        amp, ph = rng.uniform(-1, 1, 3), rng.uniform(0, 2 * math.pi, 3)
        f = c + b * np.tanh(r) + sum(amp[j] * np.cos((j + 1) * th + ph[j]) for j in range(3)) \
            / (1 + np.log1p(r))
        f = f / np.max(np.abs(f))
        p = harmonic_projection(A, f, truncs)
        spreads.append(p.spread)
        t.add(k, "euclidean-2", p.spread, p.change, p.residual / dirichlet_energy(A, f))
    rg3 = RadialGrid.ball(1e4, 256, "geometric", breakpoints=[10.0, 100.0, 1e3], r_min=1e-2)
    A3 = assemble(model.euclidean(3), rg3)
    defects = []
    for k in range(10):
        c, b, d = rng.uniform(-1, 1, 3)
        s = rng.uniform(0.5, 3)
        f = c + b * np.tanh(rg3.nodes / s) + d * np.sin(rg3.nodes) / (1 + rg3.nodes)
        p = harmonic_projection(A3, f, truncs)
        defects.append(abs(p.residual) / dirichlet_energy(A3, f))
        t.add(10 + k, "euclidean-3", p.spread, p.change, defects[-1])
    gh = PolarGrid(RadialGrid.ball(20.0, 128, "uniform"), 16)
    Ah = assemble(model.hyperbolic(2), gh)
    rh, thh = gh.radii, gh.angles
    f = np.tanh(rh) * np.cos(thh) + 0.3 * np.sin(2 * thh) * np.tanh(rh / 2)
    ph = harmonic_projection(Ah, f, [5.0, 10.0, 15.0, 20.0])
    hdef = abs(ph.residual) / dirichlet_energy(Ah, f)
    t.add(20, "hyperbolic-2", ph.spread, ph.change, hdef)
    checks = {"parabolic projections constant within 1e-3": max(spreads) <= SPREAD_TOL,
              "m=3 orthogonality within 1e-6": max(defects) <= ORTHOGONALITY_TOL,
              "hyperbolic-2 orthogonality within 1e-6": hdef <= ORTHOGONALITY_TOL}
    return _finish(10, checks, {"max_spread": max(spreads), "max_defect_m3": max(defects),
                                "hyperbolic2_spread": ph.spread, "hyperbolic2_defect": hdef},
                   {"projection": t})


CRITERIA = {1: criterion_1, 2: criterion_2, 3: criterion_3, 4: criterion_4, 5: criterion_5,
            6: criterion_6, 7: criterion_7, 8: criterion_8, 9: criterion_9, 10: criterion_10}


def run_criterion(number, seed):
    t0 = time.perf_counter()
    res = CRITERIA[number](seed)
    res.seconds = time.perf_counter() - t0
    return res


def write_criterion(out, res):
    out = Path(out)
    for name, table in res.tables.items():
        write_csv(out / f"c{res.number:02d}_{name}.csv", table)
    write_json(out / f"c{res.number:02d}.json",
               {"criterion": res.number, "title": res.title, "passed": res.passed,
                "checks": res.checks, "metrics": res.metrics, "seconds": res.seconds})


def _csv_files(root):
    return sorted(p.relative_to(root) for p in Path(root).glob("*.csv"))


def compare_csv_trees(a, b):
    """Names of CSV files that differ between two output directories."""
    fa, fb = _csv_files(a), _csv_files(b)
    diff = sorted(set(map(str, fa)) ^ set(map(str, fb)))
    for rel in set(fa) & set(fb):
        if not filecmp.cmp(Path(a) / rel, Path(b) / rel, shallow=False):
            diff.append(str(rel))
    return sorted(diff)


def run_suite(out, seed, numbers=None, echo=None):
    """Evaluate the criteria, write CSVs, records and the manifest.

    Criterion 11 re-runs criteria 1-10 into a scratch directory with the
    same seed and requires byte-identical CSV output.
    """
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    numbers = sorted(numbers or [*CRITERIA, 11])
    results = []
    for n in numbers:
        if n == 11:
            continue
        res = run_criterion(n, seed)
        write_criterion(out, res)
        results.append(res)
        if echo:
            echo(res.line())
    if 11 in numbers:
        t0 = time.perf_counter()
        scratch = Path(tempfile.mkdtemp(prefix="modelpot-rerun-"))
        try:
            for n in range(1, 11):
                write_criterion(scratch, run_criterion(n, seed))
            ref = out / ".first_run"
            ref.mkdir(exist_ok=True)
            for n in range(1, 11):
                if n not in numbers:
                    write_criterion(ref, run_criterion(n, seed))
            for src in _csv_files(out):
                shutil.copy(out / src, ref / src)
            diff = compare_csv_trees(ref, scratch)
            shutil.rmtree(ref)
        finally:
            shutil.rmtree(scratch, ignore_errors=True)
        res = _finish(11, {"byte-identical CSVs on rerun": not diff},
                      {"differing_files": diff, "files_compared": len(_csv_files(out))}, {})
        res.seconds = time.perf_counter() - t0
        write_criterion(out, res)
        results.append(res)
        if echo:
            echo(res.line())
    manifest = {"seed": seed, "all_passed": all(r.passed for r in results),
                "criteria": [{"criterion": r.number, "title": r.title, "passed": r.passed,
                              "checks": r.checks} for r in results],
                "tolerances": tolerances()}
    write_json(out / "manifest.json", manifest)
    return results


def tolerances():
    return {k: v for k, v in globals().items() if k.isupper() and isinstance(v, (int, float))}

"""
Command-line driver.

    modelpot classify --config euclidean2
    modelpot suite --config acceptance --out results/ --seed 7

Each run writes CSV tables, a JSON run record and a pass/fail manifest to
``<out>/<command>/``. Exit status: 0 when every asserted invariant
passes, 1 when one fails, 2 for usage, configuration or precondition
errors and 3 when a numerical stage fails.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
import time
from importlib import resources
from pathlib import Path

import numpy as np

from . import __version__
from .acceptance import run_suite
from .capacity import Condenser, classify, condenser_capacity
from .config import ConfigError, load_config, validate_resolution
from .elliptic import assemble
from .equilibrium import (chebyshev_constant, equilibrium_measure, kernel_matrix,
                          transfinite_diameter)
from .evans import (check_combination, evans_green_combination, evans_radial, properness_check,
                    truncated_energy_check)
from .green import green_exhaustion
from .io import Table, write_csv, write_json
from .model import DomainError, PolarGrid, RadialGrid, radial_integral

COMMANDS = ("classify", "capacity", "green", "equilibrium", "transfinite", "evans", "suite")
OUT_ENV = "MODELPOT_OUT"
EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_SOLVER = 0, 1, 2, 3


class StageError(RuntimeError):
    def __init__(self, stage, exc):
        self.stage = stage
        super().__init__(f"stage {stage!r} failed: {type(exc).__name__}: {exc}")


class Run:
    """Collects tables, checks and outputs for one command."""

    def __init__(self, command, cfg):
        self.command = command
        self.cfg = cfg
        self.tables = {}
        self.checks = {}
        self.outputs = {}
        self.inputs = {}
        self.tolerances = {}

    def stage(self, name, fn, *args, **kw):
        try:
            return fn(*args, **kw)
        except (ConfigError, KeyboardInterrupt):
            raise
        except Exception as exc:  # numerical failure: report which stage
            raise StageError(name, exc) from exc

    @property
    def passed(self):
        return all(self.checks.values())


def bundled_path(name):
    return resources.files("modelpot") / "data" / name


def resolve_config(arg):
    p = Path(arg)
    if p.exists():
        return p
    for cand in (arg, f"{arg}.cfg"):
        b = bundled_path(cand)
        if b.is_file():
            return Path(str(b))
    return p


def _manifold(run):
    if run.cfg.manifold is None:
        raise ConfigError("missing [manifold] section", None, run.cfg.source)
    return run.cfg.manifold


def _resolution(run, section, default):
    n = run.cfg.grid_resolution(section, default)
    validate_resolution(n, run.cfg if run.cfg.resolution is None else None, section)
    run.inputs["resolution"] = n
    return n


def cmd_classify(run):
    cfg, M = run.cfg, _manifold(run)
    R_K = cfg.number("classify", "R_K", 1.0)
    radii = cfg.numbers("classify", "radii")
    n = _resolution(run, "classify", 512)
    run.inputs.update(R_K=R_K, radii=radii)
    c = run.stage("classify", classify, M, R_K, radii, n)
    run.tables["capacities"] = Table.columns(R=radii, capacity=c.evidence["capacities"])
    run.outputs.update(verdict=c.verdict, **c.evidence)
    run.checks["verdict conclusive"] = c.verdict != "inconclusive"
    if cfg.has("classify", "expect"):
        run.checks["verdict matches expectation"] = c.verdict == cfg.get("classify", "expect").strip()


def cmd_capacity(run):
    cfg, M = run.cfg, _manifold(run)
    inner, outer = cfg.number("capacity", "inner"), cfg.number("capacity", "outer")
    if not inner < outer:
        raise cfg.error("capacity", "outer", "need inner < outer")
    n = _resolution(run, "capacity", 256)
    spacing = cfg.get("capacity", "spacing", "uniform")
    run.inputs.update(inner=inner, outer=outer, spacing=spacing)
    rep = run.stage("capacity", condenser_capacity, Condenser(M, inner, outer), n, spacing)
    oracle = M.omega / radial_integral(M, inner, outer)
    g = rep.potential.grid
    run.tables["potential"] = Table.columns(r=g.nodes, u=rep.potential.values)
    run.outputs.update(rep.to_record(), oracle=oracle,
                       relative_error=abs(rep.cap_energy - oracle) / oracle, issues=rep.issues)
    run.tolerances.update(agreement=1e-4, oracle=1e-2)
    run.checks["report valid"] = rep.valid
    run.checks["matches quadrature oracle within 1%"] = run.outputs["relative_error"] <= 1e-2


def cmd_green(run):
    cfg, M = run.cfg, _manifold(run)
    radii = cfg.numbers("green", "radii")
    probe = cfg.number("green", "probe", 1.0)
    n = _resolution(run, "green", 512)
    run.inputs.update(radii=radii, probe=probe)
    ex = run.stage("green exhaustion", green_exhaustion, M, radii, probe, n)
    run.tables["probe"] = Table.columns(R=ex.radii, value=ex.probe_values)
    run.tables["kernel"] = Table.columns(r=ex.grid.nodes, theta=np.zeros(ex.grid.size),
                                         value=ex.kernels[-1].values)
    run.outputs.update(verdict=ex.verdict, limit=ex.limit, sup_change=ex.sup_change)
    run.checks["verdict conclusive"] = ex.verdict != "inconclusive"
    if cfg.has("green", "expect"):
        run.checks["verdict matches expectation"] = ex.verdict == cfg.get("green", "expect").strip()


def cmd_equilibrium(run):
    cfg, M = run.cfg, _manifold(run)
    a = cfg.number("equilibrium", "compact_radius", 1.0)
    R = cfg.number("equilibrium", "ambient_radius", 1000.0)
    if not a < R:
        raise cfg.error("equilibrium", "ambient_radius", "need compact_radius < ambient_radius")
    n = _resolution(run, "equilibrium", 256)
    run.inputs.update(compact_radius=a, ambient_radius=R)
    g = RadialGrid.ball(R, n, "geometric", breakpoints=[a], r_min=a * 1e-2)
    A = assemble(M, g)
    K = np.flatnonzero(g.nodes <= a * (1 + 1e-12))
    KM = run.stage("kernel matrix", kernel_matrix, A, K, [g.size - 1])
    eq = run.stage("equilibrium", equilibrium_measure, K, KM)
    cap = run.stage("capacity", condenser_capacity, Condenser(M, a, R), 2 * n, "geometric")
    G_nu = KM.potential(eq.measure)
    run.tables["measure"] = Table.columns(node=eq.measure.support, r=g.nodes[eq.measure.support],
                                          weight=eq.measure.weights)
    run.tables["potential"] = Table.columns(r=g.nodes, G_nu=G_nu)
    prod = eq.epsilon * cap.cap_energy
    run.outputs.update(epsilon=eq.epsilon, capacity=cap.cap_energy, product=prod,
                       iterations=eq.iterations, converged=eq.converged)
    run.tolerances.update(product=2e-2, bound=1e-2)
    run.checks["optimizer converged"] = eq.converged
    run.checks["epsilon * Cap = 1 within 2%"] = abs(prod - 1) <= 2e-2
    run.checks["G_nu <= epsilon (1 + 1%)"] = float(G_nu.max()) <= eq.epsilon * 1.01


def cmd_transfinite(run):
    cfg, M = run.cfg, _manifold(run)
    if M.dim != 2:
        raise cfg.error("manifold", "dim", "transfinite runs on a polar grid and needs dim = 2")
    a = cfg.number("transfinite", "ring_radius", 1e-4)
    R = cfg.number("transfinite", "disk_radius", 1.0)
    nt = cfg.integer("transfinite", "n_theta", 20)
    n_max = cfg.integer("transfinite", "n_max", 6)
    cells = _resolution(run, "transfinite", 64)
    run.inputs.update(ring_radius=a, disk_radius=R, n_theta=nt, n_max=n_max)
    rg = RadialGrid.ball(R, cells, "geometric", breakpoints=[a], r_min=a * 1e-3)
    g = PolarGrid(rg, nt)
    A = assemble(M, g)
    K = g.ring(rg.index_of(a))
    KM = run.stage("kernel matrix", kernel_matrix, A, K, g.ring(rg.size - 1))
    eq = run.stage("equilibrium", equilibrium_measure, K, KM)
    t = Table(["n", "rho_brute", "rho_exchange", "tau_brute", "tau_greedy"])
    rho, tau = {}, {}
    for n in range(2, n_max + 1):
        rho[n] = run.stage("transfinite", transfinite_diameter, K, KM, n, "brute").value
        tau[n] = run.stage("chebyshev", chebyshev_constant, K, KM, n, "brute").value
        t.add(n, rho[n], transfinite_diameter(K, KM, n, "exchange").value, tau[n],
              chebyshev_constant(K, KM, n, "greedy").value)
    run.tables["ordering"] = t
    run.outputs.update(epsilon=eq.epsilon, rho=rho, tau=tau)
    run.checks["rho_n nondecreasing"] = all(rho[n + 1] >= rho[n] for n in range(2, n_max))
    run.checks["tau_n >= rho_n"] = all(tau[n] >= rho[n] for n in rho)


def cmd_evans(run):
    cfg, M = run.cfg, _manifold(run)
    R_K = cfg.number("evans", "R_K", 1.0)
    levels = cfg.numbers("evans", "levels", [0.25, 0.5, 1.0, 2.0])
    rho1 = cfg.number("evans", "rho1", 4.0 * R_K)
    nt = cfg.integer("evans", "n_theta", 32)
    run.inputs.update(R_K=R_K, levels=levels, rho1=rho1, n_theta=nt)
    E = run.stage("evans radial", evans_radial, M, R_K)
    n = _resolution(run, "evans", 2048)
    energy = run.stage("truncated energy", truncated_energy_check, E, levels, n)
    proper = run.stage("properness", properness_check, E)
    comb = run.stage("green combination", evans_green_combination, M, R_K, rho1, n_theta=nt,
                     check=False)
    crep = check_combination(comb, E)
    r = np.geomspace(R_K, R_K * 1e3, 97)
    run.tables["radial_profile"] = Table.columns(r=r, E=E(r))
    rr, mean = comb.profile()
    sel = rr <= 16 * rho1
    run.tables["combination_profile"] = Table.columns(r=rr[sel], E_mean=mean[sel])
    run.tables["truncated_energy"] = Table.columns(c=levels, D=energy.energies)
    run.outputs.update(energy_ratios=energy.ratios, combination=comb.to_record(),
                       agreement=crep.agreement, properness_log_radii=proper.log_radii)
    run.tolerances.update(energy=2e-2, agreement=2e-2)
    run.checks["D(E ^ c) = c within 2%"] = energy.ok
    run.checks["E proper on the ladder"] = proper.reached and proper.monotone
    run.checks["combination consistent"] = crep.ok


HANDLERS = {"classify": cmd_classify, "capacity": cmd_capacity, "green": cmd_green,
            "equilibrium": cmd_equilibrium, "transfinite": cmd_transfinite, "evans": cmd_evans}


def _out_root(args, cfg):
    return Path(args.out or cfg.out or os.environ.get(OUT_ENV) or "modelpot-out")


def _record(run, seconds):
    return {"command": run.command, "version": __version__, "seed": run.cfg.seed,
            "config": run.cfg.to_record(), "inputs": run.inputs, "outputs": run.outputs,
            "tolerances": run.tolerances, "checks": run.checks, "passed": run.passed,
            "tables": sorted(f"{k}.csv" for k in run.tables), "seconds": seconds}


def execute(command, args, stdout=None):
    stdout = stdout or sys.stdout
    cfg = load_config(resolve_config(args.config))
    if args.seed is not None:
        cfg.seed = args.seed
    if args.resolution is not None:
        cfg.resolution = validate_resolution(args.resolution)
    out = _out_root(args, cfg) / command
    if command == "suite":
        numbers = None
        if cfg.has("suite", "criteria"):
            numbers = [int(x) for x in cfg.numbers("suite", "criteria")]
        results = run_suite(out, cfg.seed, numbers, echo=lambda s: print(s, file=stdout))
        ok = all(r.passed for r in results)
        print(f"{sum(r.passed for r in results)}/{len(results)} criteria passed; output in {out}",
              file=stdout)
        return EXIT_OK if ok else EXIT_FAIL
    run = Run(command, cfg)
    t0 = time.perf_counter()
    HANDLERS[command](run)
    for name, table in run.tables.items():
        write_csv(out / f"{name}.csv", table)
    rec = _record(run, time.perf_counter() - t0)
    write_json(out / "record.json", rec)
    write_json(out / "manifest.json", {"command": command, "seed": cfg.seed, "passed": run.passed,
                                       "checks": run.checks})
    for k, v in run.checks.items():
        print(f"[{'PASS' if v else 'FAIL'}] {k}", file=stdout)
    if "verdict" in run.outputs:
        print(f"verdict: {run.outputs['verdict']}", file=stdout)
    return EXIT_OK if run.passed else EXIT_FAIL


def build_parser():
    p = argparse.ArgumentParser(prog="modelpot",
                                description="Potential theory on rotationally symmetric model manifolds.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        s = sub.add_parser(name)
        s.add_argument("--config", required=name != "suite", default="acceptance" if name == "suite" else None,
                       help="config file, or the name of a bundled config")
        s.add_argument("--out", help=f"output root (default: ${OUT_ENV} or ./modelpot-out)")
        s.add_argument("--resolution", type=int, help="override the grid resolution (cells)")
        s.add_argument("--seed", type=int, help="seed for randomized checks (unsigned 64-bit)")
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.seed is not None and not 0 <= args.seed < 2**64:
        parser.error("--seed must be an unsigned 64-bit integer")
    try:
        return execute(args.command, args)
    except ConfigError as exc:
        print(f"modelpot: config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except StageError as exc:
        print(f"modelpot: {exc}", file=sys.stderr)
        return EXIT_USAGE if isinstance(exc.__cause__, DomainError) else EXIT_SOLVER
    except DomainError as exc:
        print(f"modelpot: invalid input: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())

"""
Measures on node sets, Green energy, equilibrium measures, harmonic measure,
transfinite diameter and Chebyshev constant.
"""

from __future__ import annotations

import hashlib
import itertools
import json
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .model import DomainError, Field

MASS_TOL = 1e-12
PGD_TOL = 1e-8
PGD_MAX_ITER = 100_000
BRUTE_LIMIT = 1_000_000
SWAP_LIMIT = 10_000
POLISH_EVERY = 50


@dataclass(frozen=True, eq=False)
class DiscreteMeasure:
    support: np.ndarray
    weights: np.ndarray
    mass: float = 1.0
    degenerate: bool = False

    def __post_init__(self):
        s = np.asarray(self.support, dtype=int)
        w = np.asarray(self.weights, dtype=float)
        if s.shape != w.shape or s.ndim != 1:
            raise DomainError("support and weights must be 1-D of equal length")
        if np.unique(s).size != s.size:
            raise DomainError("support indices must be distinct")
        if np.any(w < 0):
            raise DomainError("weights must be nonnegative")
        if abs(w.sum() - self.mass) > MASS_TOL * max(1.0, abs(self.mass)):
            raise DomainError(f"weights sum to {w.sum()!r}, expected mass {self.mass!r}")
        s.setflags(write=False)
        w.setflags(write=False)
        object.__setattr__(self, "support", s)
        object.__setattr__(self, "weights", w)

    @classmethod
    def point(cls, node):
        return cls(np.array([node]), np.array([1.0]))

    @classmethod
    def zero(cls):
        return cls(np.array([], dtype=int), np.array([]), 0.0)

    @classmethod
    def normalized(cls, support, weights):
        """Measure with the given support; weights rescaled to unit mass."""
        w = np.asarray(weights, dtype=float)
        w = w / w.sum()
        return cls(support, w, float(w.sum()))

    def to_rows(self):
        return [(int(i), float(w)) for i, w in zip(self.support, self.weights)]


@dataclass(frozen=True, eq=False)
class KernelMatrix:
    """G(x_i, x_j) over a candidate node set.

    ``columns[:, j]`` is the whole kernel field G(., x_j) on the grid.
    ``diagonal`` names the policy for G(x, x): ``self-cell`` means the
    value of the kernel with pole at x read at x itself.
    """

    nodes: np.ndarray
    matrix: np.ndarray
    columns: np.ndarray
    diagonal: str = "self-cell"
    key: str = ""

    @property
    def size(self):
        return self.nodes.size

    def positions(self, support):
        lookup = {int(n): k for k, n in enumerate(self.nodes)}
        try:
            return np.array([lookup[int(s)] for s in support], dtype=int)
        except KeyError as exc:
            raise DomainError(f"node {exc.args[0]} is not in the kernel node set") from None

    def off_diagonal(self):
        """Copy of the matrix with +inf on the diagonal (the kernel's pole)."""
        G = self.matrix.copy()
        np.fill_diagonal(G, np.inf)
        return G

    def potential(self, mu):
        """G_mu on every grid node."""
        if mu.support.size == 0:
            return np.zeros(self.columns.shape[0])
        return self.columns[:, self.positions(mu.support)] @ mu.weights


def _cache_key(A, nodes, boundary):
    grid = A.grid
    radial = getattr(grid, "radial", grid)
    h = hashlib.sha256()
    h.update(json.dumps(A.manifold.to_record(), sort_keys=True, default=str).encode())
    h.update(radial.nodes.tobytes())
    h.update(radial.faces.tobytes())
    h.update(str(getattr(grid, "n_theta", 0)).encode())
    h.update(np.asarray(nodes, dtype=np.int64).tobytes())
    h.update(b"|")
    h.update(np.asarray(boundary, dtype=np.int64).tobytes())
    return h.hexdigest()


def kernel_matrix(A, nodes, boundary, cache_dir=None):
    """Green kernels of the domain with zero data on ``boundary``, poles at ``nodes``.

    One multi-right-hand-side solve of S_II X = E. When ``cache_dir`` is
    given the result is stored as ``<sha256>.npz`` keyed by manifold, grid,
    boundary and node set.
    """
    nodes = np.asarray(nodes, dtype=int)
    boundary = np.unique(np.asarray(boundary, dtype=int))
    if nodes.size == 0:
        raise DomainError("empty node set")
    if np.unique(nodes).size != nodes.size:
        raise DomainError("node set has repeated entries")
    if np.intersect1d(nodes, boundary).size:
        raise DomainError("kernel poles must be interior")
    key = _cache_key(A, nodes, boundary)
    path = None
    if cache_dir is not None:
        path = Path(cache_dir) / f"{key}.npz"
        if path.exists():
            with np.load(path) as z:
                return KernelMatrix(z["nodes"], z["matrix"], z["columns"], str(z["diagonal"]), key)
    solver = A.interior_solver(boundary)
    pos = np.searchsorted(solver.interior, nodes)
    rhs = np.zeros((solver.interior.size, nodes.size))
    rhs[pos, np.arange(nodes.size)] = 1.0
    cols = np.zeros((A.size, nodes.size))
    cols[solver.interior] = solver.solve(rhs)
    G = cols[nodes]
    asym = np.max(np.abs(G - G.T)) / np.max(np.abs(G))
    if asym > 1e-9:
        raise DomainError(f"kernel matrix is not symmetric (relative {asym:.2e})")
    G = (G + G.T) / 2
    KM = KernelMatrix(nodes, G, cols, "self-cell", key)
    if path is not None:
        path.parent.mkdir(parents=True, exist_ok=True)
        np.savez(path, nodes=nodes, matrix=G, columns=cols, diagonal=KM.diagonal)
    return KM


def energy(mu, nu, KM):
    """Mutual energy sum_ij mu_i nu_j G(x_i, x_j)."""
    if mu.support.size == 0 or nu.support.size == 0:
        return 0.0
    i, j = KM.positions(mu.support), KM.positions(nu.support)
    return float(mu.weights @ KM.matrix[np.ix_(i, j)] @ nu.weights)


def project_simplex(v):
    """Euclidean projection onto the probability simplex (sort-based)."""
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1.0
    k = np.arange(1, v.size + 1)
    rho = np.flatnonzero(u - css / k > 0)[-1]
    return np.maximum(v - css[rho] / (rho + 1), 0.0)


def _polish(Q, x):
    """Primal active-set steps on the current support of x.

    Solves the equality-constrained problem on the support; if the
    minimizer leaves the simplex, moves to the first face hit and drops
    that node. Energy never increases.
    """
    x = x.copy()
    for _ in range(x.size):
        S = np.flatnonzero(x > 0)
        k = S.size
        KKT = np.zeros((k + 1, k + 1))
        KKT[:k, :k] = 2 * Q[np.ix_(S, S)]
        KKT[:k, k] = KKT[k, :k] = 1.0
        rhs = np.zeros(k + 1)
        rhs[k] = 1.0
        try:
            sol = np.linalg.solve(KKT, rhs)
        except np.linalg.LinAlgError:
            return x
        y = np.zeros_like(x)
        y[S] = sol[:k]
        if np.all(y[S] >= 0):
            return y
        d = y - x
        neg = S[d[S] < 0]
        ratios = -x[neg] / d[neg]
        j = int(np.argmin(ratios))
        x = x + ratios[j] * d
        x[neg[j]] = 0.0
        x = np.maximum(x, 0.0)
        x /= x.sum()
    return x


@dataclass
class EquilibriumResult:
    measure: DiscreteMeasure
    epsilon: float
    iterations: int
    gradient_norm: float
    converged: bool
    psd: bool
    history: list = field(default_factory=list)


def equilibrium_measure(K, KM, tol=PGD_TOL, max_iter=PGD_MAX_ITER):
    """Minimize <mu, mu> over unit measures on the nodes K.

    Projected gradient from the uniform measure, step 1/L with L the
    largest eigenvalue of the restricted kernel, backtracked (Armijo) when
    the step fails to decrease the energy. Every ``POLISH_EVERY`` steps an
    active-set correction on the current support is accepted if it lowers
    the energy; near-flat directions otherwise stall plain descent. Stops
    once the gradient mapping |x - P(x - s grad)| / s drops to ``tol``
    times the kernel scale.
    """
    K = np.asarray(K, dtype=int)
    idx = KM.positions(K)
    Q = KM.matrix[np.ix_(idx, idx)]
    n = K.size
    if n == 1:
        mu = DiscreteMeasure.point(K[0])
        return EquilibriumResult(mu, float(Q[0, 0]), 0, 0.0, True, True)
    evals = np.linalg.eigvalsh(Q)
    P = np.eye(n) - 1.0 / n
    tangent = np.linalg.eigvalsh(P @ Q @ P)
    psd = bool(tangent.min() >= -1e-10 * evals.max())
    if not psd:
        warnings.warn("kernel matrix is not positive semidefinite on the simplex", RuntimeWarning)
    L = float(evals.max())
    scale = float(np.max(np.abs(Q)))
    x = np.full(n, 1.0 / n)
    f = x @ Q @ x
    it, gnorm, converged = 0, math.inf, False
    for it in range(1, max_iter + 1):
        if it % POLISH_EVERY == 0:
            y = _polish(Q, x)
            fy = y @ Q @ y
            if fy <= f:
                x, f = y, fy
        g = 2 * Q @ x
        step = 1.0 / (2 * L)
        while True:
            y = project_simplex(x - step * g)
            fy = y @ Q @ y
            d = y - x
            if fy <= f + g @ d + (d @ d) / (2 * step) + 1e-15 * scale:
                break
            step /= 2
        gnorm = float(np.linalg.norm(d) / step)
        x, f = y, fy
        if gnorm <= tol * scale:
            converged = True
            break
    x = np.where(x > 1e-14, x, 0.0)
    keep = np.flatnonzero(x)
    mu = DiscreteMeasure.normalized(K[keep], x[keep])
    eps = energy(mu, mu, KM)
    return EquilibriumResult(mu, eps, it, gnorm, converged, psd)


@dataclass
class PotentialReport:
    epsilon: float
    max_potential: float
    max_ratio_on_support: float
    max_relative_error: float
    issues: list

    @property
    def ok(self):
        return not self.issues


def equilibrium_potential_check(nu, epsilon, KM, u_values, probes, bound_tol=1e-2, match_tol=2e-2):
    """Compare G_nu with epsilon * u.

    ``u_values`` are capacity-potential values at the ``probes`` nodes
    (computed independently). Checks G_nu <= epsilon (1 + bound_tol) on
    every grid node and |G_nu - epsilon u| <= match_tol * epsilon at the
    probes. Failures are listed, not raised.
    """
    G_nu = KM.potential(nu)
    issues = []
    top = float(G_nu.max())
    if top > epsilon * (1 + bound_tol):
        issues.append(f"G_nu reaches {top:.6g} > epsilon (1 + {bound_tol})")
    on_support = float(np.max(G_nu[nu.support]) / epsilon)
    probes = np.asarray(probes, dtype=int)
    err = np.abs(G_nu[probes] - epsilon * np.asarray(u_values, dtype=float)) / epsilon
    worst = float(err.max()) if err.size else 0.0
    if worst > match_tol:
        issues.append(f"G_nu differs from epsilon u by {worst:.3e} epsilon")
    return PotentialReport(epsilon, top, on_support, worst, issues)


def harmonic_measure(A, boundary, z0):
    """Representing weights xi with u(z0) = sum_b xi(b) f(b) for harmonic u.

    One adjoint solve: xi = -S_BI S_II^{-1} e_z0, by symmetry of S. A
    point z0 on the boundary yields the point mass there, flagged as
    degenerate.
    """
    boundary = np.unique(np.asarray(boundary, dtype=int))
    z0 = int(z0)
    if z0 in set(boundary.tolist()):
        return DiscreteMeasure(np.array([z0]), np.array([1.0]), 1.0, degenerate=True)
    solver = A.interior_solver(boundary)
    e = np.zeros(solver.interior.size)
    e[np.searchsorted(solver.interior, z0)] = 1.0
    g = solver.solve(e)
    xi = -(solver.S_IB.T @ g)
    xi = np.where(xi > 0, xi, 0.0)
    total = xi.sum()
    if abs(total - 1) > 1e-8:
        raise DomainError(f"harmonic measure has mass {total!r}")
    return DiscreteMeasure(boundary, xi / total)


@dataclass
class Configuration:
    n: int
    value: float
    points: np.ndarray
    mode: str
    swaps: int = 0

    def to_record(self):
        return {"n": self.n, "value": self.value, "points": [int(p) for p in self.points],
                "mode": self.mode, "swaps": self.swaps}


def _check_candidates(K, n, lo=2):
    if n < lo:
        raise DomainError(f"need n >= {lo}")
    if len(K) < n:
        raise DomainError(f"candidate set has {len(K)} nodes, fewer than n = {n}")


def _chunks(it, size=20_000):
    while True:
        block = list(itertools.islice(it, size))
        if not block:
            return
        yield np.array(block, dtype=int)


def _pair_sum(G, conf):
    n = conf.shape[1]
    total = np.zeros(conf.shape[0])
    for a in range(n):
        for b in range(a + 1, n):
            total += G[conf[:, a], conf[:, b]]
    return total


def _rho_brute(G, n):
    best, arg = math.inf, None
    for block in _chunks(itertools.combinations(range(G.shape[0]), n)):
        s = _pair_sum(G, block)
        k = int(np.argmin(s))
        if s[k] < best:
            best, arg = float(s[k]), block[k]
    return best, arg


def _rho_exchange(G, n):
    m = G.shape[0]
    off = G.copy()
    np.fill_diagonal(off, np.inf)
    i, j = np.unravel_index(np.argmin(off), off.shape)
    chosen = [int(min(i, j)), int(max(i, j))]
    while len(chosen) < n:
        s = off[:, chosen].sum(axis=1)
        chosen.append(int(np.argmin(s)))
    chosen = np.array(chosen)
    swaps = 0
    scale = float(np.max(np.abs(G)))
    Z = G.copy()
    np.fill_diagonal(Z, 0.0)
    while swaps < SWAP_LIMIT:
        inside = np.zeros(m, bool)
        inside[chosen] = True
        S = Z[:, chosen].sum(axis=1)
        best, move = 0.0, None
        for a, p in enumerate(chosen):
            without = S - Z[:, p]
            gain = without - without[p]
            gain[inside] = np.inf
            c = int(np.argmin(gain))
            if gain[c] < best - 1e-13 * scale:
                best, move = float(gain[c]), (a, c)
        if move is None:
            break
        chosen[move[0]] = move[1]
        swaps += 1
    chosen = np.sort(chosen)
    return float(_pair_sum(G, chosen[None, :])[0]), chosen, swaps


def transfinite_diameter(K, KM, n, mode="brute"):
    """rho_n: minimal mean pairwise kernel value over n distinct points of K."""
    K = np.asarray(K, dtype=int)
    _check_candidates(K, n)
    idx = KM.positions(K)
    G = KM.matrix[np.ix_(idx, idx)]
    pairs = math.comb(n, 2)
    if mode == "brute":
        if math.comb(K.size, n) > BRUTE_LIMIT:
            raise DomainError("too many configurations for brute force")
        total, arg = _rho_brute(G, n)
        return Configuration(n, total / pairs, K[arg], mode)
    if mode == "exchange":
        total, arg, swaps = _rho_exchange(G, n)
        return Configuration(n, total / pairs, K[arg], mode, swaps)
    raise DomainError(f"unknown mode {mode!r}")


def _tau_brute(Ginf, n):
    best, arg = -math.inf, None
    for block in _chunks(itertools.combinations_with_replacement(range(Ginf.shape[0]), n)):
        s = Ginf[:, block].sum(axis=2).min(axis=0)
        k = int(np.argmax(s))
        if s[k] > best:
            best, arg = float(s[k]), block[k]
    return best, arg


def _tau_greedy(Ginf, n):
    inner = Ginf.min(axis=0)
    chosen = [int(np.argmax(inner))]
    while len(chosen) < n:
        f = Ginf[:, chosen].sum(axis=1)
        chosen.append(int(np.argmin(f)))
    chosen = np.array(chosen)
    return float(Ginf[:, chosen].sum(axis=1).min()), chosen


def chebyshev_constant(K, KM, n, mode="brute"):
    """tau_n: (1/n) sup over n points of inf over K of sum_i G(., p_i).

    Configurations may repeat points; G(p, p) is taken as +inf, the value
    of the kernel at its pole. Greedy mode picks each new point where the
    potential of the points already chosen is smallest, which gives a
    lower estimate.
    """
    K = np.asarray(K, dtype=int)
    _check_candidates(K, n, lo=1)
    idx = KM.positions(K)
    Ginf = KM.matrix[np.ix_(idx, idx)].copy()
    np.fill_diagonal(Ginf, np.inf)
    if mode == "brute":
        if math.comb(K.size + n - 1, n) > BRUTE_LIMIT:
            raise DomainError("too many configurations for brute force")
        total, arg = _tau_brute(Ginf, n)
    elif mode == "greedy":
        total, arg = _tau_greedy(Ginf, n)
    else:
        raise DomainError(f"unknown mode {mode!r}")
    return Configuration(n, total / n, K[np.sort(arg)], mode)


def random_simplex(rng, n, count):
    """``count`` measures drawn uniformly from the probability simplex."""
    return rng.dirichlet(np.ones(n), size=count)


def measure_field(grid, mu, KM):
    return Field(grid, KM.potential(mu))

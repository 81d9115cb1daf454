"""
Finite-volume Laplace-Beltrami operator and the elliptic solvers built on it.

Stencil. Node i owns the cell between its two faces. For two neighbouring
nodes the edge weight is

    radial edge (i, i+1):   w = omega * sigma(f)^(m-1) / (r_{i+1} - r_i)
    angular edge (m = 2):   w = V_i / (sigma(r_i)^2 * dtheta^2)

where f is the shared face, omega the unit-sphere area (dtheta on a polar
grid) and V_i the cell volume, omega * int sigma^(m-1) dr over the cell.
The stiffness matrix S = D - W (W the weights, D their row sums) is
symmetric positive semidefinite, and the Laplacian is -S / V. Faces on the
outside of the grid carry no flux, including the face at r = 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse import csgraph
from scipy.sparse.linalg import cg, splu, spsolve_triangular

from .model import DomainError, Field, PolarGrid, RadialGrid


class SolverError(RuntimeError):
    """A linear or iterative solve did not produce an acceptable answer."""


class UnsupportedConfiguration(DomainError):
    pass


_GL_X, _GL_W = np.polynomial.legendre.leggauss(8)


def _cell_volumes(M, faces, omega):
    lo, hi = faces[:-1], faces[1:]
    mid, half = (hi + lo) / 2, (hi - lo) / 2
    r = mid[:, None] + half[:, None] * _GL_X[None, :]
    return omega * half * (M.weight(r) @ _GL_W)


@dataclass(frozen=True, eq=False)
class Operator:
    """Discrete Laplace-Beltrami operator on a grid.

    ``stiffness`` is the symmetric matrix S; ``volumes`` the cell volumes.
    The Laplacian of a field f is ``-(S f) / volumes``.
    """

    manifold: object
    grid: object
    stiffness: sp.csr_matrix
    volumes: np.ndarray
    _cache: dict = field(default_factory=dict, repr=False)

    @property
    def size(self):
        return self.grid.size

    @property
    def laplacian(self):
        return sp.diags(-1.0 / self.volumes) @ self.stiffness

    def apply(self, f):
        """Discrete Laplacian of f at every node."""
        values = _values(self, f)
        return -(self.stiffness @ values) / self.volumes

    def weights(self):
        """Off-diagonal edge weights as a sparse matrix (nonnegative)."""
        W = -self.stiffness.copy()
        W.setdiag(0.0)
        W.eliminate_zeros()
        return W.tocsr()

    def neighbors(self, i):
        row = self.stiffness.getrow(i)
        return np.array([j for j in row.indices if j != i])

    def boundary_of(self, nodes):
        """Nodes of ``nodes`` that have a neighbour outside ``nodes``."""
        mask = np.zeros(self.size, bool)
        mask[np.asarray(nodes)] = True
        W = self.weights()
        outside = W @ (~mask).astype(float)
        return np.flatnonzero(mask & (outside > 0))

    def interior_solver(self, boundary):
        """Cached factorization of S restricted to the non-boundary nodes."""
        boundary = np.unique(np.asarray(boundary, dtype=int))
        key = boundary.tobytes()
        if key not in self._cache:
            self._cache[key] = _InteriorSolver(self, boundary)
        return self._cache[key]


def _values(A, f):
    if isinstance(f, Field):
        if f.grid is not A.grid:
            raise DomainError("field lives on a different grid")
        return f.values
    v = np.asarray(f, dtype=float)
    if v.shape[0] != A.size:
        raise DomainError(f"expected {A.size} values, got {v.shape[0]}")
    return v


class _InteriorSolver:
    def __init__(self, A, boundary):
        self.A = A
        self.boundary = boundary
        mask = np.ones(A.size, bool)
        mask[boundary] = False
        self.interior = np.flatnonzero(mask)
        S = A.stiffness
        self.S_II = S[self.interior][:, self.interior].tocsc()
        self.S_IB = S[self.interior][:, boundary].tocsr()
        self.diag = self.S_II.diagonal()
        self._lu = None
        self._check_components()

    def _check_components(self):
        if self.interior.size == 0:
            return
        if self.boundary.size == 0:
            raise SolverError("no boundary nodes: the Dirichlet problem has no unique solution")
        ncomp, labels = csgraph.connected_components(self.A.weights(), directed=False)
        anchored = set(labels[self.boundary])
        if any(lab not in anchored for lab in labels[self.interior]):
            raise SolverError("a connected component has no boundary node: no unique solution")

    @property
    def lu(self):
        if self._lu is None:
            self._lu = splu(self.S_II)
        return self._lu

    def solve(self, rhs, method="direct"):
        """Solve S_II x = rhs (rhs over interior nodes, 1-D or 2-D)."""
        if self.interior.size == 0:
            return np.zeros_like(rhs)
        if method == "direct":
            return self.lu.solve(np.asarray(rhs, dtype=float))
        if method == "cg":
            return self._cg(rhs)
        raise DomainError(f"unknown method {method!r}")

    def _cg(self, rhs):
        rhs = np.asarray(rhs, dtype=float)
        if rhs.ndim == 2:
            return np.column_stack([self._cg(c) for c in rhs.T])
        n = self.interior.size
        maxiter = int(50 * math.sqrt(n))
        M = sp.diags(1.0 / self.diag)
        x, info = cg(self.S_II, rhs, rtol=1e-13, atol=0.0, maxiter=maxiter, M=M)
        if info != 0:
            raise SolverError(f"conjugate gradients stopped after {maxiter} iterations without converging")
        return x

    def residual(self, x, rhs):
        """Largest nodal defect |(S_II x - rhs)_i| / S_ii."""
        if self.interior.size == 0:
            return 0.0
        r = self.S_II @ x - rhs
        if r.ndim == 2:
            r = r / self.diag[:, None]
        else:
            r = r / self.diag
        return float(np.max(np.abs(r)))


def assemble(M, G):
    """Finite-volume operator for manifold M on a RadialGrid or PolarGrid."""
    if isinstance(G, RadialGrid):
        omega = M.omega
        r, f = G.nodes, G.faces
        w = omega * M.weight(f[1:-1]) / np.diff(r)
        n = G.size
        i = np.arange(n - 1)
        W = sp.coo_matrix((np.concatenate([w, w]), (np.concatenate([i, i + 1]), np.concatenate([i + 1, i]))),
                          shape=(n, n))
        volumes = _cell_volumes(M, f, omega)
    elif isinstance(G, PolarGrid):
        if M.dim != 2:
            raise UnsupportedConfiguration("polar grids are only supported for dimension 2")
        rad, nt, dth = G.radial, G.n_theta, G.dtheta
        nr = rad.size
        cell_vol = _cell_volumes(M, rad.faces, dth)
        sig = M.sigma(rad.nodes)
        w_rad = dth * M.sigma(rad.faces[1:-1]) / np.diff(rad.nodes)
        w_ang = cell_vol / (sig**2 * dth**2)
        rows, cols, vals = [], [], []
        ii, jj = np.meshgrid(np.arange(nr - 1), np.arange(nt), indexing="ij")
        a = (ii * nt + jj).ravel()
        b = ((ii + 1) * nt + jj).ravel()
        wr = np.repeat(w_rad, nt)
        rows += [a, b]
        cols += [b, a]
        vals += [wr, wr]
        ii, jj = np.meshgrid(np.arange(nr), np.arange(nt), indexing="ij")
        a = (ii * nt + jj).ravel()
        b = (ii * nt + (jj + 1) % nt).ravel()
        wa = np.repeat(w_ang, nt)
        rows += [a, b]
        cols += [b, a]
        vals += [wa, wa]
        n = G.size
        W = sp.coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n))
        volumes = np.repeat(cell_vol, nt)
    else:
        raise UnsupportedConfiguration(f"unsupported grid type {type(G).__name__}")
    W = W.tocsr()
    if not (np.all(np.isfinite(W.data)) and np.all(np.isfinite(volumes))):
        raise DomainError(f"the warp of {M.name} overflows on this grid; reduce the outer radius")
    S = (sp.diags(np.asarray(W.sum(axis=1)).ravel()) - W).tocsr()
    S.sort_indices()
    return Operator(M, G, S, volumes)


@dataclass(frozen=True, eq=False)
class BoundaryCondition:
    """Dirichlet data: prescribed values on a set of boundary nodes."""

    nodes: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=int).ravel()
        values = np.broadcast_to(np.asarray(self.values, dtype=float), nodes.shape).copy()
        if np.unique(nodes).size != nodes.size:
            raise DomainError("boundary nodes must be distinct")
        if not np.all(np.isfinite(values)):
            raise DomainError("boundary values must be finite")
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "values", values)

    @property
    def sup(self):
        return float(np.max(np.abs(self.values))) if self.values.size else 0.0


def dirichlet_solve(A, bc, method="direct"):
    """Harmonic field with the given boundary values.

    Solves S_II u_I = -S_IB u_B. ``method="direct"`` uses a sparse LU
    factorization (cached per boundary set), ``method="cg"`` Jacobi-
    preconditioned conjugate gradients capped at 50*sqrt(n) iterations.
    The nodal residual is checked against 1e-10 * max|bc|.
    """
    if bc.nodes.size and (bc.nodes.min() < 0 or bc.nodes.max() >= A.size):
        raise DomainError("boundary node index out of range")
    solver = A.interior_solver(bc.nodes)
    order = np.argsort(bc.nodes)
    uB = bc.values[order]
    rhs = -(solver.S_IB @ uB)
    uI = solver.solve(rhs, method)
    res = solver.residual(uI, rhs)
    if res > 1e-10 * max(bc.sup, 1e-300) and res > 0:
        raise SolverError(f"Dirichlet solve residual {res:.3e} exceeds 1e-10 * max|bc|")
    u = np.empty(A.size)
    u[solver.boundary] = uB
    u[solver.interior] = uI
    return Field(A.grid, u)


def perron_iterates(A, bc, sub0, tol=1e-10, max_sweeps=1_000_000):
    """Yield successive Gauss-Seidel harmonic lifts starting from ``sub0``.

    Each sweep replaces, in lexicographic node order, the value at every
    interior node by the weighted average of its neighbours. Started from
    a subharmonic minorant of the data the iterates increase monotonically
    to the discrete harmonic solution.
    """
    u = np.array(_values(A, sub0), dtype=float)
    solver = A.interior_solver(bc.nodes)
    order = np.argsort(bc.nodes)
    uB = bc.values[order]
    S = A.stiffness
    lap = S @ u
    scale = max(np.max(np.abs(u)), bc.sup, 1e-300) * np.max(A.stiffness.diagonal())
    if np.any(lap[solver.interior] > 1e-12 * scale):
        raise DomainError("starting field is not subharmonic at every interior node")
    if np.any(u[solver.boundary] > uB + 1e-12 * max(bc.sup, 1e-300)):
        raise DomainError("starting field exceeds the boundary data")
    u[solver.boundary] = uB
    S_II = solver.S_II.tocsr()
    lower = sp.tril(S_II, format="csr")
    upper = sp.triu(S_II, k=1, format="csr")
    b = -(solver.S_IB @ uB)
    x = u[solver.interior]
    for sweep in range(1, max_sweeps + 1):
        new = spsolve_triangular(lower, b - upper @ x, lower=True)
        change = float(np.max(np.abs(new - x))) if x.size else 0.0
        if np.any(new < x - 1e-13 * max(1.0, bc.sup)):
            raise SolverError(f"sweep {sweep} decreased the iterate; the lift is not monotone")
        x = new
        u[solver.interior] = x
        yield Field(A.grid, u), change
        if change <= tol:
            return
    raise SolverError(f"Perron relaxation did not settle in {max_sweeps} sweeps")


def perron_solve(A, bc, sub0, tol=1e-10, max_sweeps=1_000_000):
    """Perron solution by monotone harmonic lifting (see ``perron_iterates``)."""
    if isinstance(sub0, Field) and sub0.grid is not A.grid:
        raise DomainError("starting field lives on a different grid")
    last = None
    for last, _ in perron_iterates(A, bc, sub0, tol, max_sweeps):
        pass
    if last is None:
        return Field(A.grid, _values(A, sub0))
    return last


def dirichlet_pairing(A, f, g):
    """Discrete Dirichlet form sum over edges of w (f_i - f_j)(g_i - g_j)."""
    return float(_values(A, f) @ (A.stiffness @ _values(A, g)))


def dirichlet_energy(A, f):
    return dirichlet_pairing(A, f, f)


@dataclass
class Projection:
    """Outcome of the harmonic projection by exhaustion."""

    field: Field
    levels: list
    residual: float
    change: float
    spread: float
    converged: bool
    monitor: np.ndarray


def harmonic_projection(A, f, truncations, inner=None, tol=1e-4):
    """Harmonic part of f, as the limit of harmonic replacements on balls.

    For each truncation radius R the field u_R equals f at nodes with
    r >= R (and at r <= ``inner`` when an inner compact is held fixed) and
    is discretely harmonic elsewhere. The last level is returned as the
    projection. Convergence is judged on the nodes inside the first
    truncation: the last two levels must differ by at most
    ``tol * max|f|`` there. ``residual`` is D(f) - D(pi f) - D(f - pi f).
    """
    fv = _values(A, f)
    radii = A.grid.radii
    truncations = list(truncations)
    if not truncations or np.any(np.diff(truncations) <= 0):
        raise DomainError("truncation radii must be increasing")
    if truncations[-1] > radii.max():
        raise DomainError("truncation beyond the grid")
    lo = -np.inf if inner is None else inner
    monitor = np.flatnonzero((radii < truncations[0]) & (radii > lo))
    levels = []
    for R in truncations:
        fixed = np.flatnonzero((radii >= R * (1 - 1e-12)) | (radii <= lo))
        levels.append(dirichlet_solve(A, BoundaryCondition(fixed, fv[fixed])))
    proj = levels[-1]
    change = 0.0
    if len(levels) > 1:
        change = float(np.max(np.abs(levels[-1].values[monitor] - levels[-2].values[monitor])))
    sup = float(np.max(np.abs(fv)))
    h = fv - proj.values
    residual = dirichlet_energy(A, fv) - dirichlet_energy(A, proj) - dirichlet_energy(A, h)
    vals = proj.values[monitor]
    spread = float(vals.max() - vals.min()) if vals.size else 0.0
    return Projection(proj, levels, residual, change, spread, change <= tol * sup, monitor)


def harmonic_measure_matrix(A, boundary, points):
    """Harmonic measures of ``boundary`` seen from each node in ``points``.

    Column k holds the weights for points[k], rows follow sorted boundary
    order. Uses one solve per point: xi = -S_BI S_II^{-1} e_z.
    """
    solver = A.interior_solver(boundary)
    pos = np.searchsorted(solver.interior, points)
    if np.any(solver.interior[np.minimum(pos, solver.interior.size - 1)] != points):
        raise DomainError("points must be interior (non-boundary) nodes")
    E = np.zeros((solver.interior.size, len(points)))
    E[pos, np.arange(len(points))] = 1.0
    W = solver.solve(E)
    return -(solver.S_IB.T @ W), solver.boundary


def harnack_constant(A, boundary, compact):
    """Smallest Lambda with sup_K u <= Lambda inf_K u for positive harmonic u.

    Every positive harmonic field is a positive combination of the
    harmonic measures of single boundary nodes, so the constant is the
    worst ratio over those extremal fields.
    """
    xi, _ = harmonic_measure_matrix(A, boundary, np.asarray(compact))
    if np.any(xi <= 0):
        raise SolverError("harmonic measure vanishes somewhere on the compact; no Harnack bound")
    return float(np.max(xi.max(axis=1) / xi.min(axis=1)))

"""
Rotationally symmetric model manifolds and the grids the solvers run on.

A model manifold of dimension m carries the metric

    ds^2 = dr^2 + sigma(r)^2 dtheta^2

around a pole. Everything radial reduces to the weight sigma(r)^(m-1),
so the two metric primitives here are the geodesic sphere area and the
radial integral of sigma^(1-m).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate
from scipy.special import gamma

WARP_KINDS = ("euclidean", "hyperbolic", "cylinder", "polynomial")

# beyond this the integral is reported as +inf
OVERFLOW_GUARD = 1e150
# log-radius used to stand in for r = infinity (e^690 ~ 1e300)
FAR_LOG_RADIUS = 690.0


class DomainError(ValueError):
    """Raised when an argument lies outside the domain of an operation."""


def unit_sphere_area(k):
    """Surface measure of the unit k-sphere in R^(k+1)."""
    return 2.0 * math.pi ** ((k + 1) / 2.0) / gamma((k + 1) / 2.0)


def _cylinder_profile(x):
    # x + x^3 - x^4: value 1 and slope 0 at x = 1, slope 1 at x = 0
    return x + x**3 - x**4


@dataclass(frozen=True)
class ModelManifold:
    """Model manifold with pole.

    Parameters
    ----------
    dim : int
        Dimension m >= 2.
    kind : str
        One of ``euclidean`` (sigma = r), ``hyperbolic`` (sigma = sinh(k r)/k),
        ``cylinder`` (sigma grows like r and is frozen at r0 for r >= r0) or
        ``polynomial`` (sigma = r + c2 r^2 + ...).
    params : tuple of float
        ``hyperbolic``: (k,); ``cylinder``: (r0,); ``polynomial``: the
        coefficients (c2, c3, ...) of r^2, r^3, ...
    r_max : float
        Truncation radius; ``math.inf`` for unbounded manifolds.
    name : str
        Identifier carried into reports.
    """

    dim: int
    kind: str = "euclidean"
    params: tuple = ()
    r_max: float = math.inf
    name: str = ""

    def __post_init__(self):
        if int(self.dim) != self.dim or self.dim < 2:
            raise DomainError(f"dimension must be an integer >= 2, got {self.dim}")
        if self.kind not in WARP_KINDS:
            raise DomainError(f"unknown warp kind {self.kind!r}; expected one of {WARP_KINDS}")
        object.__setattr__(self, "params", tuple(float(p) for p in self.params))
        if not self.r_max > 0:
            raise DomainError("r_max must be positive")
        if self.kind == "hyperbolic" and (len(self.params) != 1 or self.params[0] <= 0):
            raise DomainError("hyperbolic warp takes one positive curvature scale")
        if self.kind == "cylinder" and (len(self.params) != 1 or self.params[0] <= 0):
            raise DomainError("cylinder warp takes one positive radius r0")
        if self.kind == "polynomial" and any(c < 0 for c in self.params):
            # a negative coefficient makes sigma vanish at finite radius
            raise DomainError("polynomial warp needs nonnegative coefficients")
        if not self.name:
            object.__setattr__(self, "name", f"{self.kind}-{self.dim}")
        self._check_warp()

    def _check_warp(self):
        r_ref = self.params[0] if self.kind == "cylinder" else 1.0
        r0 = 1e-6 * r_ref
        ratio = float(self.sigma(r0)) / r0
        if abs(ratio - 1.0) > 0.01:
            raise DomainError(f"sigma(r)/r = {ratio:.6g} near the pole; the pole is not smooth")
        top = min(self.r_max, 1e6)
        r = np.geomspace(1e-6, top, 2000)
        s = self.log_sigma(r)
        if not np.all(np.isfinite(s)) or np.any(self.sigma(r[r < 50]) <= 0):
            raise DomainError("sigma must be positive on (0, r_max)")

    @property
    def omega(self):
        """Area of the unit (m-1)-sphere."""
        return unit_sphere_area(self.dim - 1)

    @property
    def breakpoints(self):
        """Radii where sigma is not smooth (quadrature splits there)."""
        if self.kind == "cylinder":
            return (self.params[0],)
        return ()

    def sigma(self, r):
        r = np.asarray(r, dtype=float)
        if self.kind == "euclidean":
            return r
        if self.kind == "hyperbolic":
            k = self.params[0]
            return np.sinh(k * r) / k
        if self.kind == "cylinder":
            r0 = self.params[0]
            x = np.minimum(r / r0, 1.0)
            return r0 * _cylinder_profile(x)
        return r * np.polyval(self._poly_desc(), r)

    def _poly_desc(self):
        # 1 + c2 r + c3 r^2 + ... in numpy's descending order
        return np.array((1.0,) + self.params)[::-1]

    def log_sigma(self, r):
        """log sigma(r), finite wherever sigma is, even when sigma overflows."""
        r = np.asarray(r, dtype=float)
        with np.errstate(divide="ignore", over="ignore"):
            if self.kind == "hyperbolic":
                k = self.params[0]
                kr = k * r
                big = kr > 20
                small = np.log(np.sinh(np.where(big, 1.0, kr)) / k)
                large = kr + np.log1p(-np.exp(-2 * np.where(big, kr, 20.0))) - math.log(2 * k)
                return np.where(big, large, small)
            if self.kind == "polynomial":
                return self.log_sigma_log(np.log(r))
            return np.log(self.sigma(r))

    def log_sigma_log(self, t):
        """log sigma(e^t), computed without forming e^t where possible."""
        t = np.asarray(t, dtype=float)
        if self.kind == "euclidean":
            return t.copy()
        if self.kind == "cylinder":
            r0 = self.params[0]
            inside = t < math.log(r0)
            r = np.exp(np.where(inside, t, 0.0))
            return np.where(inside, np.log(r0 * _cylinder_profile(r / r0)), math.log(r0))
        if self.kind == "polynomial":
            coeffs = np.array((1.0,) + self.params)
            deg = max(i for i, c in enumerate(coeffs) if c != 0)
            lead = coeffs[deg]
            out = np.empty_like(t)
            flat = t.ravel()
            res = out.ravel()
            for i, ti in enumerate(flat):
                powers = np.arange(len(coeffs)) - deg
                with np.errstate(over="ignore", under="ignore"):
                    terms = coeffs / lead * np.exp(powers * ti)
                with np.errstate(invalid="ignore", divide="ignore"):
                    res[i] = ti + math.log(lead) + deg * ti + np.log(np.sum(terms[: deg + 1]))
            return out
        with np.errstate(over="ignore"):
            r = np.exp(t)
        return self.log_sigma(r)

    def weight(self, r):
        """sigma(r)^(m-1), the radial density of the volume form."""
        with np.errstate(over="ignore"):
            return np.exp((self.dim - 1) * self.log_sigma(r))

    def to_record(self):
        return {
            "name": self.name,
            "dim": self.dim,
            "sigma": self.kind,
            "params": list(self.params),
            "r_max": self.r_max,
        }


def euclidean(dim=2, r_max=math.inf):
    return ModelManifold(dim, "euclidean", (), r_max, f"euclidean-{dim}")


def hyperbolic(dim=2, k=1.0, r_max=math.inf):
    return ModelManifold(dim, "hyperbolic", (k,), r_max, f"hyperbolic-{dim}")


def cylinder(dim=2, r0=1.0, r_max=math.inf):
    return ModelManifold(dim, "cylinder", (r0,), r_max, f"cylinder-{dim}")


def polynomial(coeffs, dim=2, r_max=math.inf):
    return ModelManifold(dim, "polynomial", tuple(coeffs), r_max, f"polynomial-{dim}")


def sphere_area(M, r):
    """Area of the geodesic sphere of radius r: omega_{m-1} sigma(r)^(m-1)."""
    if not 0 < r < M.r_max:
        raise DomainError(f"radius {r} outside (0, {M.r_max})")
    return M.omega * float(M.weight(r))


def _log_integrand(M, t):
    with np.errstate(over="ignore", under="ignore"):
        return np.exp(t - (M.dim - 1) * M.log_sigma_log(t))


def _quad_log(M, ta, tb):
    """Integral of sigma^(1-m) dr over [e^ta, e^tb] in the variable t = log r."""
    if tb <= ta:
        return 0.0
    cuts = [ta] + [math.log(b) for b in M.breakpoints if ta < math.log(b) < tb] + [tb]
    # chop long ranges so that quad sees every scale
    pieces = []
    for lo, hi in zip(cuts[:-1], cuts[1:]):
        n = max(1, int(math.ceil((hi - lo) / 5.0)))
        edges = np.linspace(lo, hi, n + 1)
        pieces.extend(zip(edges[:-1], edges[1:]))
    total = 0.0
    for lo, hi in pieces:
        val, _ = integrate.quad(lambda s: float(_log_integrand(M, s)), lo, hi,
                                epsabs=0.0, epsrel=1e-12, limit=200)
        total += val
        if not math.isfinite(total) or total > OVERFLOW_GUARD:
            return math.inf
    return total


def radial_integral(M, a, b):
    """Integral of sigma(r)^(1-m) over [a, b].

    Adaptive quadrature (relative tolerance 1e-10) in the variable
    t = log r, which keeps wide ranges and very large radii tractable.
    ``b = inf`` is allowed: the integral up to r = e^690 is returned
    unless its tail over [e^345, e^690] is not negligible, in which case
    the integral is declared divergent. Divergent or overflowing values
    come back as ``math.inf``.
    """
    if a <= 0:
        raise DomainError(f"lower limit must be positive, got {a}")
    if b < a:
        raise DomainError(f"need a <= b, got a={a}, b={b}")
    if b > M.r_max:
        raise DomainError(f"upper limit {b} exceeds r_max = {M.r_max}")
    return radial_integral_log(M, math.log(a), math.log(b) if math.isfinite(b) else math.inf)


def radial_integral_log(M, ta, tb):
    """``radial_integral`` between the radii e^ta and e^tb."""
    if not math.isfinite(tb):
        head = _quad_log(M, ta, max(ta, FAR_LOG_RADIUS / 2))
        tail = _quad_log(M, max(ta, FAR_LOG_RADIUS / 2), FAR_LOG_RADIUS)
        if not math.isfinite(head + tail) or tail > 1e-9 * (1.0 + head):
            return math.inf
        return head + tail
    return _quad_log(M, ta, tb)


_GL_X, _GL_W = np.polynomial.legendre.leggauss(12)


def cumulative_radial_integral(M, r):
    """Integral of sigma^(1-m) from r[0] to each r[i], for increasing r.

    Fixed 12-point Gauss-Legendre per segment in t = log r (segments are
    split at warp breakpoints), intended for fine node arrays where one
    adaptive call per node would be wasteful.
    """
    r = np.asarray(r, dtype=float)
    if np.any(np.diff(r) < 0) or r[0] <= 0:
        raise DomainError("radii must be positive and increasing")
    t = np.log(r)
    knots = np.unique(np.concatenate([t, [math.log(b) for b in M.breakpoints
                                          if r[0] < b < r[-1]]]))
    lo, hi = knots[:-1], knots[1:]
    mid, half = (hi + lo) / 2, (hi - lo) / 2
    s = mid[:, None] + half[:, None] * _GL_X[None, :]
    seg = half * (_log_integrand(M, s) @ _GL_W)
    cum = np.concatenate([[0.0], np.cumsum(seg)])
    return cum[np.searchsorted(knots, t)]


@dataclass(frozen=True, eq=False)
class RadialGrid:
    """Cell-centred radial layout: node i lives in (faces[i], faces[i+1])."""

    nodes: np.ndarray
    faces: np.ndarray

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=float)
        faces = np.asarray(self.faces, dtype=float)
        if faces.shape != (nodes.size + 1,):
            raise DomainError("need exactly one more face than nodes")
        if nodes.size < 2 or np.any(np.diff(nodes) <= 0) or nodes[0] <= 0:
            raise DomainError("nodes must be positive and strictly increasing")
        if faces[0] < 0 or np.any(faces[:-1] >= nodes) or np.any(faces[1:] <= nodes):
            raise DomainError("every node must sit strictly inside its cell")
        nodes.setflags(write=False)
        faces.setflags(write=False)
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "faces", faces)

    @property
    def size(self):
        return self.nodes.size

    @property
    def radii(self):
        return self.nodes

    @property
    def has_pole(self):
        return self.faces[0] == 0.0

    def index_of(self, r, rtol=1e-9):
        """Index of the node at radius r (which must be a node)."""
        i = int(np.argmin(np.abs(self.nodes - r)))
        if abs(self.nodes[i] - r) > rtol * max(1.0, abs(r)):
            raise DomainError(f"radius {r} is not a grid node")
        return i

    @classmethod
    def build(cls, a, b, cells, spacing="uniform", breakpoints=(), pole=False, r_min=None):
        """Grid with nodes at a, every breakpoint, and b.

        With ``pole=True`` the grid covers the ball of radius b: the first
        cell starts at r = 0 and carries no node there. Its first node is
        ``a`` when positive; otherwise b/cells (uniform) or ``r_min``
        (geometric). ``cells`` is the total number of node-to-node steps,
        shared between segments in proportion to their length (uniform)
        or log-length (geometric).
        """
        if spacing not in ("uniform", "geometric"):
            raise DomainError(f"unknown spacing {spacing!r}")
        if cells < 1:
            raise DomainError("need at least one cell")
        first = a
        if pole and not a > 0:
            if spacing == "geometric":
                if r_min is None:
                    raise DomainError("geometric ball grid needs r_min")
                first = r_min
            else:
                first = b / (cells + 1)
        if not 0 < first < b:
            raise DomainError(f"need 0 < a < b, got a={first}, b={b}")
        pts = sorted({first, b, *[p for p in breakpoints if first < p < b]})
        pts = np.array(pts, dtype=float)
        if spacing == "uniform":
            lengths = np.diff(pts)
        else:
            lengths = np.diff(np.log(pts))
        share = np.maximum(1, np.round(cells * lengths / lengths.sum()).astype(int))
        nodes = [pts[:1]]
        for lo, hi, k in zip(pts[:-1], pts[1:], share):
            seg = np.linspace(lo, hi, k + 1) if spacing == "uniform" else np.geomspace(lo, hi, k + 1)
            seg[0], seg[-1] = lo, hi
            nodes.append(seg[1:])
        nodes = np.concatenate(nodes)
        if spacing == "uniform":
            inner = (nodes[:-1] + nodes[1:]) / 2
            lo_face = nodes[0] - (nodes[1] - nodes[0]) / 2
            hi_face = nodes[-1] + (nodes[-1] - nodes[-2]) / 2
        else:
            inner = np.sqrt(nodes[:-1] * nodes[1:])
            lo_face = nodes[0] * math.sqrt(nodes[0] / nodes[1])
            hi_face = nodes[-1] * math.sqrt(nodes[-1] / nodes[-2])
        if pole:
            lo_face = 0.0
        return cls(nodes, np.concatenate([[max(lo_face, 0.0)], inner, [hi_face]]))

    @classmethod
    def annulus(cls, a, b, cells, spacing="uniform", breakpoints=()):
        return cls.build(a, b, cells, spacing, breakpoints)

    @classmethod
    def ball(cls, R, cells, spacing="uniform", breakpoints=(), r_min=None):
        return cls.build(0.0, R, cells, spacing, breakpoints, pole=True, r_min=r_min)


@dataclass(frozen=True, eq=False)
class PolarGrid:
    """Tensor (r, theta) grid for m = 2; node (i, j) has index i*n_theta + j."""

    radial: RadialGrid
    n_theta: int

    def __post_init__(self):
        if int(self.n_theta) != self.n_theta or self.n_theta < 8:
            raise DomainError("n_theta must be an integer >= 8")

    @property
    def size(self):
        return self.radial.size * self.n_theta

    @property
    def dtheta(self):
        return 2 * math.pi / self.n_theta

    @property
    def thetas(self):
        return np.arange(self.n_theta) * self.dtheta

    @property
    def radii(self):
        return np.repeat(self.radial.nodes, self.n_theta)

    @property
    def angles(self):
        return np.tile(self.thetas, self.radial.size)

    def index(self, i, j):
        return int(i) * self.n_theta + int(j) % self.n_theta

    def ring(self, i):
        return np.arange(self.n_theta) + int(i) * self.n_theta

    def cartesian(self):
        return self.radii * np.cos(self.angles), self.radii * np.sin(self.angles)


@dataclass(frozen=True, eq=False)
class Field:
    """Scalar values, one per grid node."""

    grid: object
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.shape != (self.grid.size,):
            raise DomainError(f"expected {self.grid.size} values, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise DomainError("field values must be finite")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def __len__(self):
        return self.values.size

    def __array__(self, dtype=None, copy=None):
        return self.values if dtype is None else self.values.astype(dtype)

    @property
    def radii(self):
        return self.grid.radii

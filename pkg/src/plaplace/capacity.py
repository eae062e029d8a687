"""Variational p-capacity of condensers on grids, plus radial closed forms.

``cap_p(K, Omega)`` is the infimum of ``int |grad u|^p`` over functions equal
to 1 on ``K`` and vanishing outside ``Omega``. The discrete version minimizes
the forward-difference energy of ``pdirichlet`` with those Dirichlet data.
Two grid types are supported: a uniform Cartesian grid, and a graded meridian
grid for problems symmetric under rotations about a line.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage
from scipy.spatial import cKDTree

from plaplace.geometry import CellMask, GeometryError, PlanePatch
from plaplace.pdirichlet import (
    MinimizeOptions,
    TensorMesh,
    dirichlet_energy,
    minimize_energy,
    sphere_area,
)
from plaplace.spectra import InvalidParameterError

log = logging.getLogger(__name__)

__all__ = [
    "Grid",
    "MeridianGrid",
    "graded_nodes",
    "Condenser",
    "CapacityResult",
    "solve_condenser",
    "spherical_condenser_oracle",
    "ball_capacity_upper",
    "radial_energy_oracle",
    "richardson",
    "RichardsonEstimate",
    "LevelSetVerdict",
    "level_set_check",
    "level_set_analytic",
    "truncated_green",
    "solve_measure_problem",
]

MIN_GAP_CELLS = 4


@dataclass(frozen=True)
class Grid:
    """Uniform Cartesian grid; node ``i`` sits at ``origin + (i + 1/2) h``."""

    origin: tuple[float, ...]
    h: float
    extents: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "origin", tuple(float(o) for o in self.origin))
        object.__setattr__(self, "extents", tuple(int(e) for e in self.extents))
        if not self.h > 0:
            raise InvalidParameterError(f"grid spacing must be positive, got {self.h}")
        if len(self.origin) != len(self.extents):
            raise InvalidParameterError("origin and extents differ in dimension")
        if min(self.extents) < 4:
            raise InvalidParameterError("grid needs at least 4 nodes per axis")

    @classmethod
    def from_bounds(cls, lo, hi, h: float, pad: int = 1) -> "Grid":
        """Smallest grid covering ``[lo, hi]`` with ``pad`` extra cells per side."""
        lo = np.asarray(lo, dtype=float) - pad * h
        hi = np.asarray(hi, dtype=float) + pad * h
        ext = np.ceil((hi - lo) / h - 1e-9).astype(int)
        # Center the node lattice on the box so symmetric sets stay symmetric.
        origin = 0.5 * (lo + hi) - 0.5 * ext * h
        return cls(tuple(origin), float(h), tuple(ext))

    @property
    def dim(self) -> int:
        return len(self.extents)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.extents

    def axes(self) -> list[np.ndarray]:
        return [o + (np.arange(m) + 0.5) * self.h for o, m in zip(self.origin, self.extents)]

    def points(self) -> np.ndarray:
        mesh = np.meshgrid(*self.axes(), indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1)

    def nearest_index(self, points) -> np.ndarray:
        x = np.atleast_2d(np.asarray(points, dtype=float))
        return np.floor((x - np.asarray(self.origin)) / self.h).astype(int)

    def mesh(self) -> TensorMesh:
        return TensorMesh.uniform(self.axes())

    def spacing(self) -> float:
        return self.h

    def scaled(self, lam: float) -> "Grid":
        return Grid(tuple(lam * o for o in self.origin), lam * self.h, self.extents)


def graded_nodes(lo: float, hi: float, h_max: float, refine=(), growth: float = 1.15) -> np.ndarray:
    """Monotone nodes on ``[lo, hi]`` refined near given intervals.

    ``refine`` holds ``(a, b, h_min)`` triples: the spacing is ``h_min`` on
    ``[a, b]`` and grows geometrically by ``growth`` away from it, capped at
    ``h_max``.
    """
    if not hi > lo:
        raise InvalidParameterError("graded axis needs hi > lo")
    refine = [(float(a), float(b), float(hm)) for a, b, hm in refine]

    def spacing(x: float) -> float:
        h = h_max
        for a, b, hm in refine:
            d = max(a - x, x - b, 0.0)
            h = min(h, hm + (growth - 1.0) * d)
        return h

    nodes = [lo]
    x = lo
    while x < hi:
        x = x + spacing(x)
        nodes.append(min(x, hi))
    nodes = np.asarray(nodes)
    if len(nodes) > 2 and nodes[-1] - nodes[-2] < 0.5 * (nodes[-2] - nodes[-3]):
        nodes = np.delete(nodes, -2)
    return nodes


@dataclass(frozen=True)
class MeridianGrid:
    """Grid on the meridian half-plane of a rotation-symmetric problem in ``R^n``.

    A node ``(z, s)`` stands for the ``(n-2)``-sphere of points at signed axial
    coordinate ``z`` and distance ``s`` from the axis through ``axis_origin``
    along ``axis_dir``.
    """

    z: np.ndarray = field(compare=False)
    s: np.ndarray = field(compare=False)
    n: int
    axis_origin: tuple[float, ...] = ()
    axis_dir: tuple[float, ...] = ()

    def __post_init__(self):
        if self.n < 2:
            raise InvalidParameterError("meridian grids need n >= 2")
        o = self.axis_origin or (0.0,) * self.n
        d = np.asarray(self.axis_dir or (1.0,) + (0.0,) * (self.n - 1), dtype=float)
        object.__setattr__(self, "axis_origin", tuple(float(v) for v in o))
        object.__setattr__(self, "axis_dir", tuple(d / np.linalg.norm(d)))
        object.__setattr__(self, "z", np.asarray(self.z, dtype=float))
        object.__setattr__(self, "s", np.asarray(self.s, dtype=float))
        if self.s[0] != 0.0 or np.any(np.diff(self.s) <= 0) or np.any(np.diff(self.z) <= 0):
            raise InvalidParameterError("meridian axes must increase and s must start at 0")

    @classmethod
    def uniform(cls, n: int, z_lo: float, z_hi: float, s_max: float, h: float, **kw) -> "MeridianGrid":
        z = np.linspace(z_lo, z_hi, int(round((z_hi - z_lo) / h)) + 1)
        s = np.linspace(0.0, s_max, int(round(s_max / h)) + 1)
        return cls(z, s, n, **kw)

    @property
    def dim(self) -> int:
        return self.n

    @property
    def shape(self) -> tuple[int, int]:
        return (len(self.z), len(self.s))

    def _perp(self) -> np.ndarray:
        d = np.asarray(self.axis_dir)
        e = np.zeros(self.n)
        e[int(np.argmin(np.abs(d)))] = 1.0
        e -= (e @ d) * d
        return e / np.linalg.norm(e)

    def points(self) -> np.ndarray:
        zz, ss = np.meshgrid(self.z, self.s, indexing="ij")
        o, d = np.asarray(self.axis_origin), np.asarray(self.axis_dir)
        return o + zz.ravel()[:, None] * d + ss.ravel()[:, None] * self._perp()

    def meridian_coords(self, points) -> np.ndarray:
        x = np.atleast_2d(np.asarray(points, dtype=float)) - np.asarray(self.axis_origin)
        z = x @ np.asarray(self.axis_dir)
        s = np.linalg.norm(x - z[:, None] * np.asarray(self.axis_dir), axis=1)
        return np.stack([z, s], axis=1)

    def nearest_index(self, points) -> np.ndarray:
        zs = self.meridian_coords(points)
        out = []
        for axis, col in ((self.z, zs[:, 0]), (self.s, zs[:, 1])):
            j = np.clip(np.searchsorted(axis, col), 1, len(axis) - 1)
            j = j - (col - axis[j - 1] < axis[j] - col)
            j = np.where((col < axis[0] - 1e-12) | (col > axis[-1] + 1e-12), -1, j)
            out.append(j)
        return np.stack(out, axis=1)

    def mesh(self) -> TensorMesh:
        return TensorMesh.meridian(self.z, self.s, self.n)

    def spacing(self) -> float:
        return float(max(np.diff(self.z).max(), np.diff(self.s).max()))


@dataclass
class Condenser:
    """Compact set ``K`` (union of shapes) inside the open domain ``Omega``."""

    K: tuple
    Omega: object
    grid: Grid | MeridianGrid

    def __post_init__(self):
        if not isinstance(self.K, (tuple, list)):
            self.K = (self.K,)
        self.K = tuple(self.K)

    def k_mask(self, points: np.ndarray) -> np.ndarray:
        out = np.zeros(len(points), dtype=bool)
        for shape in self.K:
            if isinstance(shape, PlanePatch) and shape.thickness == 0.0:
                # Zero-thickness patches keep every node within half a cell.
                shape = shape.with_thickness(0.5 * self.grid.spacing() * (1 + 1e-9))
            out |= shape.contains(points, closed=True)
        return out

    def scaled(self, lam: float) -> "Condenser":
        if not isinstance(self.grid, Grid):
            raise InvalidParameterError("only Cartesian condensers are rescaled")
        return Condenser(
            tuple(k.scaled(lam) for k in self.K), self.Omega.scaled(lam), self.grid.scaled(lam)
        )


@dataclass
class CapacityResult:
    value: float
    energy_history: list[float]
    feasible_u: np.ndarray
    resolution: float
    converged: bool = True
    iterations: int = 0
    gap_cells: float = math.inf
    resolved: bool = True
    k_nodes: int = 0

    def to_dict(self) -> dict:
        return {
            "value": self.value,
            "energy_history": list(self.energy_history),
            "resolution": self.resolution,
            "converged": self.converged,
            "iterations": self.iterations,
            "gap_cells": None if math.isinf(self.gap_cells) else self.gap_cells,
            "resolved": self.resolved,
            "k_nodes": self.k_nodes,
        }


def _check_p(p: float, n: int) -> None:
    if not 1 < p <= n:
        raise InvalidParameterError(f"p must lie in (1, n] = (1, {n}], got {p}")


def _gap_cells(grid, k: np.ndarray, outside: np.ndarray, points: np.ndarray) -> float:
    """Distance from ``K`` to the complement of ``Omega``, in local cells."""
    if not outside.any():
        raise GeometryError("domain must be bounded inside the grid")
    if isinstance(grid, Grid):
        dist = ndimage.distance_transform_edt(~outside.reshape(grid.shape))
        return float(dist.ravel()[k].min())
    zs = np.stack(np.meshgrid(grid.z, grid.s, indexing="ij"), axis=-1).reshape(-1, 2)
    d, _ = cKDTree(zs[outside]).query(zs[k])
    # Measure against the coarsest spacing seen by the K nodes.
    hz = np.gradient(grid.z)
    hs = np.gradient(grid.s)
    local = np.maximum.outer(hz, hs).ravel()[k]
    return float(np.min(d / local))


def solve_condenser(c: Condenser, p: float, opts: MinimizeOptions | None = None) -> CapacityResult:
    """Discrete ``cap_p(K, Omega)`` on the condenser's grid.

    Nodes inside ``K`` are fixed to 1 and nodes outside ``Omega`` to 0. The
    returned value is the energy of the minimizer after truncation to
    ``[0, 1]``, which never increases the discrete energy.
    """
    grid = c.grid
    _check_p(p, grid.dim)
    pts = grid.points()
    k = c.k_mask(pts)
    inside = c.Omega.contains(pts, closed=False)
    outside = ~inside
    h = grid.spacing()
    if not k.any():
        u = np.zeros(grid.shape)
        return CapacityResult(0.0, [0.0], u, h, k_nodes=0)
    gap = _gap_cells(grid, k, outside, pts)
    if gap <= 1.0:
        raise GeometryError(f"K touches the domain boundary on the grid (gap {gap:.2f} cells)")
    resolved = gap >= MIN_GAP_CELLS
    if not resolved:
        log.warning("dist(K, boundary) spans only %.1f cells; the result is under-resolved", gap)
    fixed = k | outside
    res = minimize_energy(grid.mesh(), fixed.reshape(grid.shape), k.reshape(grid.shape).astype(float), p, opts=opts)
    u = np.clip(res.u, 0.0, 1.0)
    value = min(dirichlet_energy(grid.mesh(), u, p), res.energy)
    return CapacityResult(
        value=float(value),
        energy_history=res.history,
        feasible_u=u,
        resolution=h,
        converged=res.converged,
        iterations=res.iterations,
        gap_cells=gap,
        resolved=resolved,
        k_nodes=int(k.sum()),
    )


def spherical_condenser_oracle(n: int, p: float, r: float, R: float = math.inf) -> float:
    """Exact ``cap_p(B(0, r), B(0, R))`` in ``R^n``.

    The radial minimizer of ``omega_{n-1} int_r^R |u'|^p t^(n-1) dt`` gives
    ``omega_{n-1} beta^(p-1) (r^-beta - R^-beta)^(1-p)`` with
    ``beta = (n-p)/(p-1)`` for ``p < n``, and ``omega_{n-1} log(R/r)^(1-n)``
    for ``p = n``. ``R = inf`` is allowed when ``p < n``.
    """
    if n < 2:
        raise InvalidParameterError(f"n must be >= 2, got {n}")
    if not 1 < p <= n:
        raise InvalidParameterError(f"p must lie in (1, n], got {p}")
    if not 0 < r < R:
        raise InvalidParameterError(f"need 0 < r < R, got r={r}, R={R}")
    omega = sphere_area(n - 1)
    if p == n:
        if math.isinf(R):
            raise InvalidParameterError("p = n has zero capacity relative to R^n")
        return omega * math.log(R / r) ** (1.0 - n)
    beta = (n - p) / (p - 1.0)
    gap = r**-beta - (0.0 if math.isinf(R) else R**-beta)
    if gap <= 0:
        return math.inf
    return omega * beta ** (p - 1.0) * gap ** (1.0 - p)


def ball_capacity_upper(n: int, p: float, center, radius: float, domain_ball) -> float:
    """Upper bound for ``cap_p(B(center, radius), domain_ball)`` by monotonicity.

    The concentric ball ``B(center, R')`` with the largest ``R'`` fitting in
    the domain has larger capacity than the domain itself.
    """
    c = np.asarray(center, dtype=float)
    room = domain_ball.radius - np.linalg.norm(c - np.asarray(domain_ball.center))
    if room <= radius:
        return math.inf
    return spherical_condenser_oracle(n, p, radius, room)


def radial_energy_oracle(n: int, p: float, r: float, R: float, nodes: int = 400) -> float:
    """Radial capacity from direct numerical minimization of the 1-D energy.

    The profile is parametrized by positive increments (a softmax of free
    weights) so the constraints ``u(r) = 1, u(R) = 0`` hold exactly; the
    minimization uses L-BFGS. Independent of the closed form.
    """
    from scipy.optimize import minimize

    t = np.geomspace(r, R, nodes + 1)
    dt = np.diff(t)
    mid = np.sqrt(t[:-1] * t[1:])
    wt = sphere_area(n - 1) * mid ** (n - 1) * dt

    def energy(z):
        e = np.exp(z - z.max())
        drop = e / e.sum()
        grad_u = drop / dt
        val = float(np.sum(wt * grad_u**p))
        # d val / d drop, then chain rule through the softmax.
        dv = p * wt * grad_u ** (p - 1) / dt
        g = drop * (dv - np.dot(dv, drop))
        return val, g

    z0 = np.log(dt)
    out = minimize(energy, z0, jac=True, method="L-BFGS-B", options={"maxiter": 20000, "gtol": 1e-12, "ftol": 1e-15})
    return float(out.fun)


@dataclass(frozen=True)
class RichardsonEstimate:
    values: tuple[float, ...]
    spacings: tuple[float, ...]
    ratio: float
    order: float
    extrapolated: float


def richardson(values, spacings) -> RichardsonEstimate:
    """Order estimate from three resolutions ``h, h/2, h/4`` (coarse first)."""
    v = [float(x) for x in values]
    hs = [float(x) for x in spacings]
    if len(v) != 3 or len(hs) != 3:
        raise InvalidParameterError("Richardson analysis takes exactly three resolutions")
    d1, d2 = v[0] - v[1], v[1] - v[2]
    ratio = d1 / d2 if d2 != 0 else math.inf
    refine = hs[0] / hs[1]
    order = math.log(abs(ratio)) / math.log(refine) if ratio not in (0.0, math.inf) else math.nan
    if ratio > 1:
        extrap = v[2] - d2 / (ratio - 1.0)
    else:
        extrap = v[2]
    return RichardsonEstimate(tuple(v), tuple(hs), ratio, order, extrap)


# Level-set estimate for p-superharmonic functions


@dataclass(frozen=True)
class LevelSetVerdict:
    lam: float
    capacity: float
    lhs: float
    bound: float
    ok: bool
    empty: bool


def truncated_green(n: int, p: float, R: float, mass: float = 1.0):
    """Radial solution of ``-Delta_p u = mass * delta_0`` in ``B(0, R)``, zero on the sphere.

    Returns ``u(x)`` as a callable on point arrays. With
    ``c = beta^(p-1) omega_{n-1}`` the function is
    ``(mass / c)^(1/(p-1)) (|x|^-beta - R^-beta)``.
    """
    if not 1 < p < n:
        raise InvalidParameterError("the radial Green function needs 1 < p < n")
    beta = (n - p) / (p - 1.0)
    c = beta ** (p - 1.0) * sphere_area(n - 1)
    amp = (mass / c) ** (1.0 / (p - 1.0))

    def u(points):
        r = np.linalg.norm(np.atleast_2d(points), axis=1)
        with np.errstate(divide="ignore"):
            return np.maximum(amp * (r**-beta - R**-beta), 0.0)

    return u


def level_set_analytic(n: int, p: float, R: float, lambdas, mass: float = 1.0) -> list[LevelSetVerdict]:
    """The level-set estimate for the truncated Green function, via the closed form.

    Super-level sets are concentric balls, so every capacity is exact and the
    estimate holds with equality.
    """
    beta = (n - p) / (p - 1.0)
    c = beta ** (p - 1.0) * sphere_area(n - 1)
    amp = (mass / c) ** (1.0 / (p - 1.0))
    out = []
    for lam in lambdas:
        lam = float(lam)
        if lam <= 0:
            raise InvalidParameterError("levels must be positive")
        r = (lam / amp + R**-beta) ** (-1.0 / beta)
        cap = spherical_condenser_oracle(n, p, r, R)
        lhs = lam ** (p - 1.0) * cap
        out.append(LevelSetVerdict(lam, cap, lhs, mass, lhs <= mass * (1 + 1e-12), False))
    return out


def level_set_check(
    u: np.ndarray,
    grid: Grid | MeridianGrid,
    mu_total: float,
    lambdas,
    Omega,
    p: float,
    slack: float = 0.1,
    opts: MinimizeOptions | None = None,
) -> list[LevelSetVerdict]:
    """Check ``lam^(p-1) cap_p({u > lam} cap Omega, Omega) <= mu(Omega) (1 + slack)``.

    ``u`` is a nodal field on ``grid``. Each super-level set is rasterized as
    a cell mask and its capacity computed with ``solve_condenser``.
    """
    u = np.asarray(u, dtype=float).reshape(grid.shape)
    inside = Omega.contains(grid.points(), closed=False).reshape(grid.shape)
    out = []
    for lam in lambdas:
        lam = float(lam)
        mask = (u > lam) & inside
        if not mask.any():
            out.append(LevelSetVerdict(lam, 0.0, 0.0, mu_total, True, True))
            continue
        res = solve_condenser(Condenser((CellMask(grid, mask),), Omega, grid), p, opts)
        lhs = lam ** (p - 1.0) * res.value
        out.append(LevelSetVerdict(lam, res.value, lhs, mu_total, lhs <= mu_total * (1 + slack), False))
    return out


def solve_measure_problem(
    grid: Grid | MeridianGrid,
    Omega,
    atoms,
    p: float,
    opts: MinimizeOptions | None = None,
) -> np.ndarray:
    """Discrete solution of ``-Delta_p u = mu`` in ``Omega`` with ``u = 0`` outside.

    ``atoms`` is a sequence of ``(point, mass)``; each mass is deposited on
    the nearest node. The field minimizes ``E(u) - p <mu, u>``.
    """
    _check_p(p, grid.dim)
    pts = grid.points()
    outside = ~Omega.contains(pts, closed=False)
    load = np.zeros(grid.shape)
    for x, m in atoms:
        idx = tuple(grid.nearest_index(np.asarray(x, dtype=float))[0])
        if outside.reshape(grid.shape)[idx]:
            raise GeometryError(f"atom at {tuple(x)} lies outside the domain")
        load[idx] += float(m)
    res = minimize_energy(grid.mesh(), outside.reshape(grid.shape), np.zeros(grid.shape), p, opts=opts, load=load)
    return res.u

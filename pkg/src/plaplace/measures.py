"""Nonnegative finite measures with ball-mass queries.

Every measure answers ``mu(B(x, t))`` for closed balls and exposes, for a
fixed center ``x``, its radial cumulative ``t -> mu(B(x, t))`` as an object
the Wolff quadrature can bracket. Four representations are provided:
finitely many atoms, radial power-law profiles, equal-weight samples of an
``m``-dimensional set, and cellwise densities on a Cartesian grid.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import integrate, special

from plaplace.capacity import Grid, graded_nodes
from plaplace.spectra import InvalidParameterError

log = logging.getLogger(__name__)

__all__ = [
    "NoMassError",
    "RadialCumulative",
    "Head",
    "RadonMeasure",
    "Atomic",
    "SurfaceSample",
    "RadialProfile",
    "GridDensity",
    "growth_exponent",
    "GrowthFit",
    "segment",
    "k_plane_patch",
    "cantor_dust",
    "unit_ball_volume",
]


class NoMassError(ValueError):
    """No mass was found at any sampled scale around the query point."""


def unit_ball_volume(n: int) -> float:
    return math.pi ** (n / 2) / math.gamma(n / 2 + 1)


@dataclass(frozen=True)
class Head:
    """Model ``M(t) = c t^m`` on ``(0, t_h]``; ``exact`` is False for extrapolations."""

    t_h: float
    c: float
    m: float
    exact: bool = True


@dataclass
class RadialCumulative:
    """``M(t) = mu(B(x, t))`` around one center.

    ``closed(t)`` and ``open(t)`` are the closed- and open-ball masses
    (vectorized in ``t``). ``breakpoints`` collects radii where ``M`` jumps.
    When ``step`` is True, ``M`` is constant between consecutive breakpoints.
    """

    closed: Callable[[np.ndarray], np.ndarray]
    open: Callable[[np.ndarray], np.ndarray]
    breakpoints: np.ndarray
    head: Head
    total: float
    step: bool = False
    # Optional exact power-law form: arrays (starts, a, e) as in RadialProfile.
    segments: tuple | None = None


class RadonMeasure:
    """Interface shared by every measure representation."""

    dim: int

    @property
    def total_mass(self) -> float:
        raise NotImplementedError

    def ball_mass(self, center, radius: float) -> float:
        """``mu`` of the closed ball ``B(center, radius)``."""
        return float(self.radial_cumulative(center).closed(np.asarray([float(radius)]))[0])

    def ball_masses(self, center, radii) -> np.ndarray:
        return self.radial_cumulative(center).closed(np.asarray(radii, dtype=float))

    def radial_cumulative(self, x) -> RadialCumulative:
        raise NotImplementedError

    def _center(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float).ravel()
        if x.size != self.dim:
            raise InvalidParameterError(f"point has dimension {x.size}, measure lives in R^{self.dim}")
        return x


class Atomic(RadonMeasure):
    """``sum_k w_k delta_{a_k}`` with positive weights."""

    def __init__(self, points, weights=None):
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        if pts.size == 0:
            raise InvalidParameterError("use Atomic.zero(n) for the zero measure")
        w = np.ones(len(pts)) if weights is None else np.asarray(weights, dtype=float).ravel()
        if len(w) != len(pts):
            raise InvalidParameterError("one weight per atom")
        if np.any(w <= 0) or not np.all(np.isfinite(w)):
            raise InvalidParameterError("atom weights must be positive and finite")
        self.points = pts
        self.weights = w
        self.dim = pts.shape[1]

    @classmethod
    def zero(cls, n: int) -> "Atomic":
        obj = cls.__new__(cls)
        obj.points = np.zeros((0, n))
        obj.weights = np.zeros(0)
        obj.dim = n
        return obj

    @classmethod
    def dirac(cls, x, mass: float = 1.0) -> "Atomic":
        return cls([np.asarray(x, dtype=float)], [mass])

    @property
    def total_mass(self) -> float:
        return float(self.weights.sum())

    def ball_mass(self, center, radius: float) -> float:
        x = self._center(center)
        if not len(self.weights):
            return 0.0
        d = np.linalg.norm(self.points - x, axis=1)
        return float(self.weights[d <= radius].sum())

    def radial_cumulative(self, x) -> RadialCumulative:
        x = self._center(x)
        if not len(self.weights):
            zero = lambda t: np.zeros(np.shape(t))  # noqa: E731
            return RadialCumulative(zero, zero, np.zeros(0), Head(math.inf, 0.0, 0.0), 0.0, True)
        d = np.linalg.norm(self.points - x, axis=1)
        order = np.argsort(d, kind="stable")
        d = d[order]
        cum = np.concatenate([[0.0], np.cumsum(self.weights[order])])

        def closed(t):
            return cum[np.searchsorted(d, np.asarray(t, dtype=float), side="right")]

        def opened(t):
            return cum[np.searchsorted(d, np.asarray(t, dtype=float), side="left")]

        if d[0] > 0:
            head = Head(float(d[0]), 0.0, 0.0)
        else:
            at_x = float(self.weights[order][d == 0].sum())
            positive = d[d > 0]
            head = Head(float(positive[0]) if positive.size else math.inf, at_x, 0.0)
        return RadialCumulative(closed, opened, np.unique(d[d > 0]), head, float(cum[-1]), True)

    def __add__(self, other: "Atomic") -> "Atomic":
        if isinstance(other, Atomic):
            pts = np.vstack([self.points, other.points])
            w = np.concatenate([self.weights, other.weights])
            if not len(w):
                return Atomic.zero(self.dim)
            return Atomic(pts, w)
        return NotImplemented


class SurfaceSample(Atomic):
    """Weighted samples approximating ``m``-dimensional Hausdorff measure on a set.

    ``set_dim`` is the dimension of the sampled set and ``descriptor`` a
    free-form record of how it was generated.
    """

    def __init__(self, points, weights, set_dim: float, descriptor: dict | None = None):
        super().__init__(points, weights)
        self.set_dim = float(set_dim)
        self.descriptor = dict(descriptor or {})


class RadialProfile(RadonMeasure):
    """Rotation-invariant measure about ``center`` given by its cumulative.

    ``segments`` is a list of ``(t_j, a_j, e_j)`` with ``t_0 = 0``: on
    ``[t_j, t_{j+1})`` the cumulative ``mu(B(center, t))`` equals
    ``a_j t^e_j``. Upward jumps between segments are point masses carried by
    spheres. The cumulative must vanish at 0, so ``e_0 > 0`` unless ``a_0 = 0``.
    """

    def __init__(self, center, segments):
        self.center = np.asarray(center, dtype=float).ravel()
        self.dim = self.center.size
        segs = [(float(t), float(a), float(e)) for t, a, e in segments]
        if not segs or segs[0][0] != 0.0:
            raise InvalidParameterError("first segment must start at t = 0")
        if any(b[0] <= a[0] for a, b in zip(segs, segs[1:])):
            raise InvalidParameterError("segment starts must increase")
        for t, a, e in segs:
            if a < 0 or e < 0:
                raise InvalidParameterError("segments need a >= 0 and e >= 0")
        if segs[0][1] > 0 and segs[0][2] == 0:
            raise InvalidParameterError("the cumulative must vanish at t = 0")
        for (t0, a0, e0), (t1, a1, e1) in zip(segs, segs[1:]):
            if a1 * t1**e1 < a0 * t1**e0 * (1 - 1e-12):
                raise InvalidParameterError(f"cumulative decreases at t = {t1}")
        if segs[-1][2] > 0 and segs[-1][1] > 0:
            raise InvalidParameterError("last segment must be constant (finite total mass)")
        self.segments = segs
        self._starts = np.asarray([s[0] for s in segs])
        self._a = np.asarray([s[1] for s in segs])
        self._e = np.asarray([s[2] for s in segs])

    @classmethod
    def power_law(cls, center, m: float, t_max: float, c: float = 1.0) -> "RadialProfile":
        """``mu(B(center, t)) = c min(t, t_max)^m``."""
        return cls(center, [(0.0, c, m), (t_max, c * t_max**m, 0.0)])

    @property
    def total_mass(self) -> float:
        return float(self._a[-1] * (1.0 if self._e[-1] == 0 else math.inf))

    def cumulative(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        j = np.searchsorted(self._starts, t, side="right") - 1
        j = np.clip(j, 0, len(self._starts) - 1)
        with np.errstate(divide="ignore", invalid="ignore"):
            val = self._a[j] * np.where(self._e[j] == 0, 1.0, np.maximum(t, 0.0) ** self._e[j])
        return np.where(t >= 0, val, 0.0)

    def cumulative_left(self, t) -> np.ndarray:
        """Left limit ``mu(B_open(center, t))``."""
        t = np.asarray(t, dtype=float)
        j = np.searchsorted(self._starts, t, side="left") - 1
        j = np.clip(j, 0, len(self._starts) - 1)
        with np.errstate(divide="ignore", invalid="ignore"):
            val = self._a[j] * np.where(self._e[j] == 0, 1.0, np.maximum(t, 0.0) ** self._e[j])
        return np.where(t > 0, val, 0.0)

    def _jumps(self) -> list[tuple[float, float]]:
        out = []
        for (t0, a0, e0), (t1, a1, e1) in zip(self.segments, self.segments[1:]):
            jump = a1 * t1**e1 - a0 * t1**e0
            if jump > 0:
                out.append((t1, jump))
        return out

    def _density_mass(self, s0: float, s1: float, weight) -> float:
        """``int_{s0}^{s1} weight(s) dF_ac(s)`` over the absolutely continuous part."""
        total = 0.0
        for j, (t, a, e) in enumerate(self.segments):
            lo = max(s0, t)
            hi = min(s1, self.segments[j + 1][0] if j + 1 < len(self.segments) else math.inf)
            if hi <= lo or a == 0 or e == 0:
                continue
            val, _ = integrate.quad(lambda s: weight(s) * a * e * s ** (e - 1.0), lo, hi, limit=200, epsabs=0.0, epsrel=1e-11)
            total += val
        return total

    def _offcenter_mass(self, d: float, t: float) -> float:
        n = self.dim
        if t <= 0:
            return 0.0
        inner = max(t - d, 0.0)
        mass = float(self.cumulative(inner)) if inner > 0 else 0.0
        lo, hi = abs(t - d), t + d

        def frac(s):
            c = (s * s + d * d - t * t) / (2.0 * s * d)
            c = min(max(c, -1.0), 1.0)
            tail = 0.5 * special.betainc((n - 1) / 2.0, 0.5, 1.0 - c * c)
            return tail if c >= 0 else 1.0 - tail

        mass += self._density_mass(lo, hi, frac)
        for s, jump in self._jumps():
            if lo < s < hi:
                mass += jump * frac(s)
        return mass

    def radial_cumulative(self, x) -> RadialCumulative:
        x = self._center(x)
        d = float(np.linalg.norm(x - self.center))
        total = self.total_mass
        if d == 0.0:
            starts = self._starts[1:]
            first_end = float(starts[0]) if starts.size else math.inf
            head = Head(first_end, float(self._a[0]), float(self._e[0]))
            return RadialCumulative(
                self.cumulative,
                self.cumulative_left,
                starts.copy(),
                head,
                total,
                False,
                (self._starts, self._a, self._e),
            )

        def closed(t):
            t = np.atleast_1d(np.asarray(t, dtype=float))
            return np.asarray([self._offcenter_mass(d, float(ti)) for ti in t])

        # Kinks appear where the ball starts or stops meeting a segment boundary sphere.
        bps = np.unique(
            np.concatenate([np.abs(self._starts[1:] - d), self._starts[1:] + d, [d]])
        )
        bps = bps[bps > 0]
        head = _numeric_head(closed, self.dim, d * 1e-3 if d > 0 else 1e-3)
        return RadialCumulative(closed, closed, bps, head, total, False)


def _numeric_head(closed, n: int, t_h: float) -> Head:
    """Power-law head fitted from two radii below ``t_h``; not certified."""
    m_hi, m_lo = closed(np.asarray([t_h, 0.5 * t_h]))
    if m_hi <= 0:
        return Head(t_h, 0.0, float(n), exact=False)
    if m_lo <= 0:
        return Head(t_h, m_hi / t_h**n, float(n), exact=False)
    m = math.log(m_hi / m_lo) / math.log(2.0)
    return Head(t_h, m_hi / t_h**m, m, exact=False)


class GridDensity(RadonMeasure):
    """Cellwise constant density on a Cartesian grid.

    Ball masses are Riemann sums: a cell counts when its center lies in the
    closed ball, contributing ``density * h^n``. Below ``head_cells`` cells the
    cumulative around a point is extrapolated as ``rho(x) |B_1| t^n``.
    """

    def __init__(self, grid: Grid, density, head_cells: float = 2.0):
        rho = np.asarray(density, dtype=float)
        if rho.shape != grid.shape:
            rho = np.broadcast_to(rho, grid.shape).copy()
        if np.any(rho < 0) or not np.all(np.isfinite(rho)):
            raise InvalidParameterError("density must be nonnegative and finite")
        self.grid = grid
        self.density = rho
        self.dim = grid.dim
        self.head_cells = float(head_cells)
        keep = rho.ravel() > 0
        self._pts = grid.points()[keep]
        self._w = rho.ravel()[keep] * grid.h**grid.dim

    @property
    def total_mass(self) -> float:
        return float(self._w.sum())

    def ball_mass(self, center, radius: float) -> float:
        x = self._center(center)
        d = np.linalg.norm(self._pts - x, axis=1)
        return float(self._w[d <= radius].sum())

    def local_density(self, x) -> float:
        idx = self.grid.nearest_index(self._center(x))[0]
        if np.any(idx < 0) or np.any(idx >= np.asarray(self.grid.shape)):
            return 0.0
        return float(self.density[tuple(idx)])

    def radial_cumulative(self, x) -> RadialCumulative:
        x = self._center(x)
        d = np.linalg.norm(self._pts - x, axis=1)
        order = np.argsort(d, kind="stable")
        d = d[order]
        cum = np.concatenate([[0.0], np.cumsum(self._w[order])])
        t_s = self.head_cells * self.grid.h

        def closed(t):
            return cum[np.searchsorted(d, np.asarray(t, dtype=float), side="right")]

        def opened(t):
            return cum[np.searchsorted(d, np.asarray(t, dtype=float), side="left")]

        rho = self.local_density(x)
        head = Head(t_s, rho * unit_ball_volume(self.dim), float(self.dim), exact=False)
        bps = np.unique(d[d > t_s])
        return RadialCumulative(closed, opened, bps, head, float(cum[-1]), True)


@dataclass(frozen=True)
class GrowthFit:
    m: float
    C: float
    fit_residual: float
    radii: tuple[float, ...] = field(default=(), repr=False)
    masses: tuple[float, ...] = field(default=(), repr=False)


def growth_exponent(mu: RadonMeasure, x0, t_min: float, t_max: float, n_scales: int = 8) -> GrowthFit:
    """Fit ``mu(B(x0, t)) ~ C t^m`` on geometric scales in ``[t_min, t_max]``.

    ``m`` is the least-squares log-log slope; ``C`` is raised to the smallest
    constant with ``mu(B(x0, t)) <= C t^m`` at every sampled scale.
    """
    if not 0 < t_min < t_max:
        raise InvalidParameterError("need 0 < t_min < t_max")
    if n_scales < 4:
        raise InvalidParameterError("need at least 4 scales")
    radii = np.geomspace(t_min, t_max, n_scales)
    masses = mu.ball_masses(x0, radii)
    pos = masses > 0
    if not pos.any():
        raise NoMassError(f"no mass in B({tuple(np.ravel(x0))}, t) for t <= {t_max}")
    if not pos.all():
        log.warning("growth fit ignores %d empty scales", int((~pos).sum()))
    lt, lm = np.log(radii[pos]), np.log(masses[pos])
    if pos.sum() == 1:
        m, resid = 0.0, 0.0
    else:
        m, b = np.polyfit(lt, lm, 1)
        resid = float(np.sqrt(np.mean((lm - (m * lt + b)) ** 2)))
    C = float(np.max(masses[pos] / radii[pos] ** m))
    return GrowthFit(float(m), C, resid, tuple(radii), tuple(masses))


# Sample generators for m-dimensional sets


def _axis_nodes(length: float, count: int, focus: float | None, h_min: float | None, growth: float):
    if focus is None:
        edges = np.linspace(0.0, length, count + 1)
    else:
        h_max = length / count
        edges = graded_nodes(0.0, length, h_max, [(focus, focus, h_min or h_max / 100)], growth)
    return 0.5 * (edges[1:] + edges[:-1]), np.diff(edges)


def k_plane_patch(
    origin,
    basis,
    half_width: float,
    count: int,
    focus=None,
    h_min: float | None = None,
    growth: float = 1.05,
) -> SurfaceSample:
    """Samples of area measure on ``origin + sum_j t_j b_j``, ``|t_j| <= half_width``.

    Each axis carries ``count`` equal cells, or with ``focus`` (patch
    coordinates of a point) cells graded from ``h_min`` near it. Samples sit
    at cell centers and weigh the cell area, so the weights approximate
    ``k``-dimensional Hausdorff measure.
    """
    b = np.atleast_2d(np.asarray(basis, dtype=float))
    q, _ = np.linalg.qr(b.T)
    q = (q.T * np.sign(np.sum(q.T * b, axis=1))[:, None])
    k = q.shape[0]
    focus = None if focus is None else np.broadcast_to(np.asarray(focus, dtype=float), (k,))
    mids, widths = [], []
    for j in range(k):
        f = None if focus is None else float(focus[j]) + half_width
        c, w = _axis_nodes(2.0 * half_width, count, f, h_min, growth)
        mids.append(c - half_width)
        widths.append(w)
    grids = np.meshgrid(*mids, indexing="ij")
    wgrid = np.ones(grids[0].shape)
    for j, w in enumerate(widths):
        shape = [1] * k
        shape[j] = len(w)
        wgrid = wgrid * w.reshape(shape)
    coords = np.stack([g.ravel() for g in grids], axis=1)
    pts = np.asarray(origin, dtype=float) + coords @ q
    desc = {
        "generator": "k-plane-patch",
        "origin": [float(v) for v in np.ravel(origin)],
        "basis": q.tolist(),
        "half_width": float(half_width),
        "count": int(count),
        "graded": focus is not None,
    }
    return SurfaceSample(pts, wgrid.ravel(), k, desc)


def segment(a, b, count: int, focus: float | None = None, h_min: float | None = None, growth: float = 1.05) -> SurfaceSample:
    """Length measure on the segment ``[a, b]`` by ``count`` midpoint samples.

    ``focus`` is an arclength parameter in ``[0, |b - a|]`` toward which the
    cells are graded (smallest width ``h_min``).
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    length = float(np.linalg.norm(b - a))
    if length == 0:
        raise InvalidParameterError("degenerate segment")
    c, w = _axis_nodes(length, count, focus, h_min, growth)
    e = (b - a) / length
    desc = {"generator": "segment", "a": a.tolist(), "b": b.tolist(), "count": int(count), "graded": focus is not None}
    return SurfaceSample(a + c[:, None] * e, w, 1, desc)


def cantor_dust(ratio: float = 1.0 / 3.0, depth: int = 8, n: int = 2) -> SurfaceSample:
    """Two-map self-similar set on the diagonal of ``[0, 1]^n``.

    The maps ``x -> ratio x`` and ``x -> ratio x + (1 - ratio) (1, ..., 1)``
    generate the middle Cantor set carried along the diagonal, of dimension
    ``log 2 / log(1/ratio)``. Samples are the centers of the ``2^depth``
    construction cells, with equal weights summing to 1.
    """
    if not 0 < ratio < 0.5:
        raise InvalidParameterError("ratio must lie in (0, 1/2)")
    if depth < 0:
        raise InvalidParameterError("depth must be nonnegative")
    left = np.zeros(1)
    for level in range(depth):
        scale = ratio**level
        left = np.concatenate([left, left + (1.0 - ratio) * scale])
    centers = np.sort(left) + 0.5 * ratio**depth
    pts = np.repeat(centers[:, None], n, axis=1)
    w = np.full(len(centers), 1.0 / len(centers))
    desc = {"generator": "cantor-dust", "ratio": ratio, "depth": depth, "n": n}
    return SurfaceSample(pts, w, math.log(2.0) / math.log(1.0 / ratio), desc)

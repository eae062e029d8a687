"""Point-membership shapes shared by the condenser and thinness code."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "GeometryError",
    "Ball",
    "Box",
    "Annulus",
    "PlanePatch",
    "BallUnion",
    "HalfSpace",
    "CellMask",
    "Intersection",
    "union_contains",
]


class GeometryError(ValueError):
    """Inconsistent or unresolvable geometry (touching sets, singular points)."""


def _pts(points) -> np.ndarray:
    pts = np.asarray(points, dtype=float)
    return pts[None, :] if pts.ndim == 1 else pts


@dataclass(frozen=True)
class Ball:
    center: tuple[float, ...]
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))
        if not self.radius > 0:
            raise GeometryError(f"ball radius must be positive, got {self.radius}")

    @property
    def dim(self) -> int:
        return len(self.center)

    def contains(self, points, closed: bool = True) -> np.ndarray:
        d = np.linalg.norm(_pts(points) - np.asarray(self.center), axis=1)
        return d <= self.radius if closed else d < self.radius

    def bounds(self) -> tuple[np.ndarray, np.ndarray]:
        c = np.asarray(self.center)
        return c - self.radius, c + self.radius

    def scaled(self, lam: float, about=None) -> "Ball":
        o = np.zeros(self.dim) if about is None else np.asarray(about, dtype=float)
        return Ball(tuple(o + lam * (np.asarray(self.center) - o)), lam * self.radius)


@dataclass(frozen=True)
class Box:
    lo: tuple[float, ...]
    hi: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "lo", tuple(float(c) for c in self.lo))
        object.__setattr__(self, "hi", tuple(float(c) for c in self.hi))
        if any(b <= a for a, b in zip(self.lo, self.hi)):
            raise GeometryError("box needs lo < hi on every axis")

    @property
    def dim(self) -> int:
        return len(self.lo)

    def contains(self, points, closed: bool = True) -> np.ndarray:
        x = _pts(points)
        lo, hi = np.asarray(self.lo), np.asarray(self.hi)
        if closed:
            return np.all((x >= lo) & (x <= hi), axis=1)
        return np.all((x > lo) & (x < hi), axis=1)

    def bounds(self) -> tuple[np.ndarray, np.ndarray]:
        return np.asarray(self.lo), np.asarray(self.hi)

    def scaled(self, lam: float, about=None) -> "Box":
        o = np.zeros(self.dim) if about is None else np.asarray(about, dtype=float)
        return Box(tuple(o + lam * (np.asarray(self.lo) - o)), tuple(o + lam * (np.asarray(self.hi) - o)))


@dataclass(frozen=True)
class Annulus:
    """``{r_in <= |x - center| <= r_out}`` (closed) or its interior."""

    center: tuple[float, ...]
    r_in: float
    r_out: float

    def __post_init__(self):
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))
        if not 0 <= self.r_in < self.r_out:
            raise GeometryError("annulus needs 0 <= r_in < r_out")

    @property
    def dim(self) -> int:
        return len(self.center)

    def contains(self, points, closed: bool = True) -> np.ndarray:
        d = np.linalg.norm(_pts(points) - np.asarray(self.center), axis=1)
        if closed:
            return (d >= self.r_in) & (d <= self.r_out)
        return (d > self.r_in) & (d < self.r_out)

    def bounds(self) -> tuple[np.ndarray, np.ndarray]:
        c = np.asarray(self.center)
        return c - self.r_out, c + self.r_out

    def scaled(self, lam: float, about=None) -> "Annulus":
        o = np.zeros(self.dim) if about is None else np.asarray(about, dtype=float)
        return Annulus(tuple(o + lam * (np.asarray(self.center) - o)), lam * self.r_in, lam * self.r_out)


@dataclass(frozen=True)
class PlanePatch:
    """Rectangle ``origin + sum_j t_j b_j`` with ``|t_j| <= half_widths[j]``.

    ``basis`` rows are orthonormalized on construction. A patch has empty
    interior, so rasterization thickens it by ``thickness`` (normal distance).
    """

    origin: tuple[float, ...]
    basis: tuple[tuple[float, ...], ...]
    half_widths: tuple[float, ...]
    thickness: float = 0.0

    def __post_init__(self):
        b = np.atleast_2d(np.asarray(self.basis, dtype=float))
        q, _ = np.linalg.qr(b.T)
        q = q.T * np.sign(np.sum(q.T * b, axis=1))[:, None]
        object.__setattr__(self, "origin", tuple(float(c) for c in self.origin))
        object.__setattr__(self, "basis", tuple(tuple(r) for r in q))
        object.__setattr__(self, "half_widths", tuple(float(w) for w in self.half_widths))
        if len(self.half_widths) != q.shape[0]:
            raise GeometryError("one half width per basis vector")

    @property
    def dim(self) -> int:
        return len(self.origin)

    def with_thickness(self, t: float) -> "PlanePatch":
        return PlanePatch(self.origin, self.basis, self.half_widths, t)

    def distance(self, points) -> np.ndarray:
        x = _pts(points) - np.asarray(self.origin)
        b = np.asarray(self.basis)
        coords = x @ b.T
        clipped = np.clip(coords, -np.asarray(self.half_widths), np.asarray(self.half_widths))
        return np.linalg.norm(x - clipped @ b, axis=1)

    def contains(self, points, closed: bool = True) -> np.ndarray:
        d = self.distance(points)
        return d <= self.thickness if closed else d < self.thickness

    def bounds(self) -> tuple[np.ndarray, np.ndarray]:
        b = np.abs(np.asarray(self.basis))
        ext = b.T @ np.asarray(self.half_widths) + self.thickness
        o = np.asarray(self.origin)
        return o - ext, o + ext

    def scaled(self, lam: float, about=None) -> "PlanePatch":
        o = np.zeros(self.dim) if about is None else np.asarray(about, dtype=float)
        return PlanePatch(
            tuple(o + lam * (np.asarray(self.origin) - o)),
            self.basis,
            tuple(lam * w for w in self.half_widths),
            lam * self.thickness,
        )


@dataclass(frozen=True)
class BallUnion:
    balls: tuple[Ball, ...]

    def __post_init__(self):
        object.__setattr__(self, "balls", tuple(self.balls))

    def contains(self, points, closed: bool = True) -> np.ndarray:
        x = _pts(points)
        out = np.zeros(len(x), dtype=bool)
        for b in self.balls:
            out |= b.contains(x, closed)
        return out

    def scaled(self, lam: float, about=None) -> "BallUnion":
        return BallUnion(tuple(b.scaled(lam, about) for b in self.balls))

    def __len__(self) -> int:
        return len(self.balls)


@dataclass(frozen=True)
class HalfSpace:
    """``{x : <normal, x> >= offset}``."""

    normal: tuple[float, ...]
    offset: float

    def __post_init__(self):
        v = np.asarray(self.normal, dtype=float)
        nv = np.linalg.norm(v)
        if nv == 0:
            raise GeometryError("half-space normal must be nonzero")
        object.__setattr__(self, "normal", tuple(v / nv))
        object.__setattr__(self, "offset", float(self.offset) / nv)

    def contains(self, points, closed: bool = True) -> np.ndarray:
        s = _pts(points) @ np.asarray(self.normal)
        return s >= self.offset if closed else s > self.offset

    def scaled(self, lam: float, about=None) -> "HalfSpace":
        o = np.zeros(len(self.normal)) if about is None else np.asarray(about, dtype=float)
        nrm = np.asarray(self.normal)
        return HalfSpace(self.normal, float(o @ nrm + lam * (self.offset - o @ nrm)))


@dataclass(frozen=True)
class CellMask:
    """Explicit set of grid nodes; membership is by nearest node."""

    grid: object
    mask: np.ndarray = field(compare=False)

    def contains(self, points, closed: bool = True) -> np.ndarray:
        idx = self.grid.nearest_index(_pts(points))
        inside = np.all((idx >= 0) & (idx < np.asarray(self.mask.shape)), axis=1)
        out = np.zeros(len(idx), dtype=bool)
        good = np.flatnonzero(inside)
        out[good] = self.mask[tuple(idx[good].T)]
        return out


@dataclass(frozen=True)
class Intersection:
    parts: tuple

    def contains(self, points, closed: bool = True) -> np.ndarray:
        x = _pts(points)
        out = np.ones(len(x), dtype=bool)
        for part in self.parts:
            out &= part.contains(x, closed)
        return out


def union_contains(shapes, points, closed: bool = True) -> np.ndarray:
    x = _pts(points)
    out = np.zeros(len(x), dtype=bool)
    for s in shapes:
        out |= s.contains(x, closed)
    return out

"""Dyadic-annulus capacity series at a point and escape rays from thin sets.

Around ``x0`` the annuli are ``omega_i = {2^(-i-1) <= |x - x0| <= 2^-i}``
with neighbourhoods ``Omega_i = {2^(-i-2) < |x - x0| < 2^(-i+1)}``. Two series
measure how much of a set ``E`` is seen near ``x0``:

* the annulus series, with terms ``cap_p(E cap omega_i, Omega_i)`` divided by
  ``cap_p(dB(x0, 2^-i), B(x0, 2^(-i+1)))`` (for ``p = n``: ``i^(n-1) cap_n``);
* the Wiener series, with terms
  ``(cap_p(E cap B(x0, 2^-i), B(x0, 2^(-i+1))) / cap_p(B(x0, 2^-i), B(x0, 2^(-i+1))))^(1/(p-1))``.

Every capacity is computed after rescaling by ``2^i`` about ``x0``, which
maps the condenser to unit size; capacity scales by ``2^(-(n-p) i)``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import norm, qmc, special_ortho_group

from plaplace.capacity import (
    Condenser,
    Grid,
    MeridianGrid,
    graded_nodes,
    solve_condenser,
    spherical_condenser_oracle,
)
from plaplace.geometry import Annulus, Ball, BallUnion, CellMask, GeometryError, HalfSpace, Intersection
from plaplace.pdirichlet import MinimizeOptions
from plaplace.spectra import InvalidParameterError

log = logging.getLogger(__name__)

__all__ = [
    "DyadicAnnuli",
    "ball_chain",
    "separating_chain",
    "ThinOptions",
    "SeriesRow",
    "Verdict",
    "SeriesResult",
    "AnnulusSolveError",
    "p_thin_partial_sums",
    "wiener_partial_sums",
    "classify_series",
    "EscapeResult",
    "find_escape_ray",
    "segment_hits_balls",
    "segment_hits_balls_quadratic",
]


class AnnulusSolveError(RuntimeError):
    """A capacity solve failed on one annulus."""

    def __init__(self, index: int, cause: Exception):
        super().__init__(f"annulus {index}: {cause}")
        self.index = index
        self.cause = cause


@dataclass(frozen=True)
class DyadicAnnuli:
    x0: tuple[float, ...]
    i_min: int
    i_max: int

    def __post_init__(self):
        object.__setattr__(self, "x0", tuple(float(v) for v in self.x0))
        if self.i_min > self.i_max:
            raise InvalidParameterError("need i_min <= i_max")

    def omega(self, i: int) -> Annulus:
        return Annulus(self.x0, 2.0 ** (-i - 1), 2.0**-i)

    def big_omega(self, i: int) -> Annulus:
        return Annulus(self.x0, 2.0 ** (-i - 2), 2.0 ** (-i + 1))

    def indices(self) -> range:
        return range(self.i_min, self.i_max + 1)


def ball_chain(a: float, c: float = 1.0, n: int = 3, x0=None, i_min: int = 1, i_max: int = 40, direction=None) -> BallUnion:
    """``B(x_i, c 2^(-a i))`` with ``x_i = x0 + 0.75 2^-i e``, ``i_min <= i <= i_max``."""
    x0 = np.zeros(n) if x0 is None else np.asarray(x0, dtype=float)
    e = np.eye(n)[0] if direction is None else np.asarray(direction, dtype=float)
    e = e / np.linalg.norm(e)
    balls = []
    for i in range(i_min, i_max + 1):
        radius = c * 2.0 ** (-a * i)
        center = x0 + 0.75 * 2.0**-i * e
        if radius >= 0.75 * 2.0**-i:
            raise GeometryError(f"ball {i} of the chain contains x0")
        balls.append(Ball(tuple(center), radius))
    return BallUnion(tuple(balls))


def separating_chain(n: int, p: float, c0: float = 0.2, power: float = 2.0, i_min: int = 1, i_max: int = 40) -> BallUnion:
    """Chain with radii ``c0 2^-i i^(-power/(n-p))``.

    Its annulus terms decay like ``i^-power`` while the Wiener terms decay
    like ``i^(-power/(p-1))``; for ``p - 1 > power > 1`` the first series
    converges and the second diverges.
    """
    if not 1 < p < n:
        raise InvalidParameterError("need 1 < p < n")
    balls = []
    for i in range(i_min, i_max + 1):
        radius = c0 * 2.0**-i * i ** (-power / (n - p))
        balls.append(Ball(tuple(0.75 * 2.0**-i * np.eye(n)[0]), radius))
    return BallUnion(tuple(balls))


@dataclass
class ThinOptions:
    h_max: float = 1.0 / 32.0
    cells_per_radius: float = 16.0
    growth: float = 1.15
    truncation: float = 1e-3
    cartesian_h: float = 1.0 / 24.0
    minimize: MinimizeOptions = field(default_factory=MinimizeOptions)


@dataclass(frozen=True)
class SeriesRow:
    i: int
    term: float
    partial_sum: float
    normalized: float
    capacity: float
    truncation_bound: float = 0.0


@dataclass(frozen=True)
class Verdict:
    status: str
    reason: str
    ratios: tuple[float, ...] = ()
    slope: float = math.nan


@dataclass
class SeriesResult:
    kind: str
    n: int
    p: float
    rows: list[SeriesRow]
    verdict: Verdict

    @property
    def terms(self) -> np.ndarray:
        return np.asarray([r.term for r in self.rows])

    @property
    def thin(self) -> bool:
        return self.verdict.status == "thin"

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "n": self.n,
            "p": self.p,
            "rows": [r.__dict__ for r in self.rows],
            "verdict": self.verdict.__dict__ | {"ratios": list(self.verdict.ratios)},
        }


def classify_series(
    indices,
    terms,
    window: int = 5,
    q: float = 0.9,
    floor_fraction: float = 0.5,
    slope_margin: float = 0.2,
) -> Verdict:
    """Convergence verdict for a series known only through finitely many terms.

    In order: all trailing terms zero means convergent; consecutive ratios
    ``<= q`` over the last ``window`` terms mean geometric decay; trailing
    terms all above ``floor_fraction`` times the median term mean they are
    bounded below, hence divergent; otherwise the log-log slope against
    ``i`` over the trailing window decides against the borderline ``-1``
    with a margin. Anything else is inconclusive.
    """
    idx = np.asarray(list(indices), dtype=float)
    t = np.asarray(terms, dtype=float)
    if len(t) < window:
        return Verdict("inconclusive", f"fewer than {window} terms")
    last = t[-window:]
    if np.all(last == 0):
        return Verdict("thin", "trailing terms vanish")
    with np.errstate(divide="ignore", invalid="ignore"):
        ratios = last[1:] / last[:-1]
    ratios_t = tuple(float(r) for r in ratios)
    if np.all(np.isfinite(ratios)) and np.all(ratios <= q):
        return Verdict("thin", f"geometric decay, trailing ratios <= {q}", ratios_t)
    med = float(np.median(t[t > 0])) if np.any(t > 0) else 0.0
    if med > 0 and np.all(last >= floor_fraction * med):
        return Verdict("not-thin", "trailing terms bounded below", ratios_t)
    pos = last > 0
    if pos.sum() >= 3 and np.all(idx[-window:][pos] > 0):
        slope = float(np.polyfit(np.log(idx[-window:][pos]), np.log(last[pos]), 1)[0])
        if slope <= -1.0 - slope_margin:
            return Verdict("thin", f"power decay i^{slope:.2f}", ratios_t, slope)
        if slope >= -1.0 + slope_margin:
            return Verdict("not-thin", f"power decay i^{slope:.2f} too slow to sum", ratios_t, slope)
        return Verdict("inconclusive", f"power decay i^{slope:.2f} near the borderline", ratios_t, slope)
    return Verdict("inconclusive", "no pattern in trailing terms", ratios_t)


# Geometry of the rescaled condensers


def _axis_for(E, x0: np.ndarray) -> np.ndarray | None:
    """Symmetry axis through ``x0`` if ``E`` is rotation-invariant about one."""
    n = x0.size
    if isinstance(E, HalfSpace):
        return np.asarray(E.normal)
    if isinstance(E, BallUnion):
        axis = None
        for b in E.balls:
            v = np.asarray(b.center) - x0
            nv = np.linalg.norm(v)
            if nv == 0:
                continue
            if axis is None:
                axis = v / nv
                continue
            if np.linalg.norm(v - (v @ axis) * axis) > 1e-12 * max(nv, 1.0):
                return None
        return np.eye(n)[0] if axis is None else axis
    return None


def _rescale(E, x0: np.ndarray, lam: float):
    """Image of ``E`` under ``x -> lam (x - x0)``."""
    if isinstance(E, BallUnion):
        return BallUnion(tuple(Ball(tuple(lam * (np.asarray(b.center) - x0)), lam * b.radius) for b in E.balls))
    if isinstance(E, HalfSpace):
        nrm = np.asarray(E.normal)
        return HalfSpace(E.normal, lam * (E.offset - float(nrm @ x0)))
    raise InvalidParameterError(f"cannot rescale {type(E).__name__}")


def _select_balls(E: BallUnion, n: int, p: float, meets, domain: Ball, rel_tol: float):
    """Balls meeting the target set, dropping a tail of negligible capacity.

    Returns the kept union and the summed capacity bound of the dropped balls
    (each bounded by a concentric condenser inside the domain).
    """
    cand = [b for b in E.balls if meets(b)]
    if not cand:
        return BallUnion(()), 0.0
    bounds = []
    for b in cand:
        room = domain.radius - np.linalg.norm(np.asarray(b.center) - np.asarray(domain.center))
        if room <= b.radius or p == n:
            bounds.append(math.inf)
        else:
            bounds.append(spherical_condenser_oracle(n, p, b.radius, room))
    order = np.argsort(bounds)
    bounds = np.asarray(bounds)
    finite = bounds[np.isfinite(bounds)]
    if not finite.size:
        return BallUnion(tuple(cand)), 0.0
    # Unbounded balls (touching the domain) give no scale to be negligible against.
    top = float(finite.max())
    dropped = 0.0
    keep = np.ones(len(cand), dtype=bool)
    for j in order:
        if not math.isfinite(bounds[j]) or dropped + bounds[j] > rel_tol * top:
            break
        dropped += bounds[j]
        keep[j] = False
    return BallUnion(tuple(b for b, k in zip(cand, keep) if k)), dropped


def _meridian_grid(n: int, axis: np.ndarray, balls: BallUnion, opts: ThinOptions) -> MeridianGrid:
    pad = 2.0 * opts.h_max
    zref, sref = [], []
    for b in balls.balls:
        zc = float(np.asarray(b.center) @ axis)
        hm = min(opts.h_max, b.radius / opts.cells_per_radius)
        zref.append((zc - b.radius, zc + b.radius, hm))
        sref.append((0.0, b.radius, hm))
    z = graded_nodes(-2.0 - pad, 2.0 + pad, opts.h_max, zref, opts.growth)
    s = graded_nodes(0.0, 2.0 + pad, opts.h_max, sref, opts.growth)
    return MeridianGrid(z, s, n, axis_origin=(0.0,) * n, axis_dir=tuple(axis))


def _rescaled_capacity(E, x0, i: int, p: float, opts: ThinOptions, target: str):
    """Capacity of the rescaled condenser for annulus ``i``.

    ``target`` is ``"annulus"`` (``E cap omega_0`` in ``Omega_0``) or
    ``"ball"`` (``E cap B(0, 1)`` in ``B(0, 2)``). Returns the capacity at
    unit scale and the truncation bound.
    """
    n = x0.size
    origin = (0.0,) * n
    if target == "annulus":
        piece = Annulus(origin, 0.5, 1.0)
        domain = Annulus(origin, 0.25, 2.0)
        outer = Ball(origin, 2.0)

        def meets(b):
            d = np.linalg.norm(b.center)
            return d - b.radius <= 1.0 and d + b.radius >= 0.5

    else:
        piece = Ball(origin, 1.0)
        domain = Ball(origin, 2.0)
        outer = domain

        def meets(b):
            return np.linalg.norm(b.center) - b.radius <= 1.0

    if isinstance(E, CellMask):
        # Explicit masks are solved on their own grid at native scale.
        lam = 2.0**-i
        if target == "annulus":
            piece_n = Annulus(tuple(x0), lam * 0.5, lam * 1.0)
            dom_n = Annulus(tuple(x0), lam * 0.25, lam * 2.0)
        else:
            piece_n = Ball(tuple(x0), lam)
            dom_n = Ball(tuple(x0), 2.0 * lam)
        res = solve_condenser(Condenser((Intersection((E, piece_n)),), dom_n, E.grid), p, opts.minimize)
        return res.value * 2.0 ** ((n - p) * i), 0.0, res

    Es = _rescale(E, x0, 2.0**i)
    trunc = 0.0
    if isinstance(Es, BallUnion):
        Es, trunc = _select_balls(Es, n, p, meets, outer, opts.truncation)
        if not Es.balls:
            return 0.0, trunc, None
    axis = _axis_for(Es, np.zeros(n))
    if axis is not None:
        balls = Es if isinstance(Es, BallUnion) else BallUnion(())
        grid = _meridian_grid(n, axis, balls, opts)
    else:
        grid = Grid.from_bounds((-2.0,) * n, (2.0,) * n, opts.cartesian_h)
    res = solve_condenser(Condenser((Intersection((Es, piece)),), domain, grid), p, opts.minimize)
    return res.value, trunc, res


def _series(E, x0, p: float, i_range, opts: ThinOptions | None, target: str) -> SeriesResult:
    opts = opts or ThinOptions()
    x0 = np.asarray(x0, dtype=float)
    n = x0.size
    if not 1 < p <= n:
        raise InvalidParameterError(f"p must lie in (1, n], got {p}")
    indices = list(i_range)
    if not indices:
        raise InvalidParameterError("empty index range")
    empty = isinstance(E, BallUnion) and not E.balls
    # cap(dB(0,1), B(0,2)) = cap(B(0,1), B(0,2)) serves both denominators.
    denom = spherical_condenser_oracle(n, p, 1.0, 2.0)
    rows = []
    total = 0.0
    for i in indices:
        if empty:
            cap, trunc = 0.0, 0.0
        else:
            try:
                cap, trunc, _ = _rescaled_capacity(E, x0, i, p, opts, target)
            except Exception as exc:  # noqa: BLE001 - attach the annulus index
                raise AnnulusSolveError(i, exc) from exc
        if target == "annulus":
            if p == n:
                term = i ** (n - 1) * cap
            else:
                term = cap / denom
            normalized = cap
        else:
            term = (cap / denom) ** (1.0 / (p - 1.0))
            normalized = cap
        total += term
        rows.append(SeriesRow(i, float(term), float(total), float(normalized), float(cap), float(trunc)))
    verdict = classify_series([r.i for r in rows], [r.term for r in rows])
    return SeriesResult("annulus" if target == "annulus" else "wiener", n, p, rows, verdict)


def p_thin_partial_sums(E, x0, p: float, i_range, opts: ThinOptions | None = None) -> SeriesResult:
    """Partial sums of the annulus capacity series at ``x0``.

    ``normalized`` in each row is ``2^((n-p) i) cap_p(E cap omega_i, Omega_i)``,
    which equals ``term`` times ``cap_p(dB(0, 1), B(0, 2))`` for ``p < n``.
    """
    return _series(E, x0, p, i_range, opts, "annulus")


def wiener_partial_sums(E, x0, p: float, i_range, opts: ThinOptions | None = None) -> SeriesResult:
    """Partial sums of the Wiener-type series at ``x0``."""
    return _series(E, x0, p, i_range, opts, "ball")


# Escape rays


@dataclass
class EscapeResult:
    found: bool
    direction: np.ndarray | None
    blocked_fraction: float
    n_tested: int
    verified: bool


def _relevant(E: BallUnion, x0: np.ndarray, t0: float):
    if not E.balls:
        return np.zeros((0, x0.size)), np.zeros(0)
    c = np.asarray([b.center for b in E.balls])
    r = np.asarray([b.radius for b in E.balls])
    near = np.linalg.norm(c - x0, axis=1) - r <= t0
    return c[near], r[near]


def segment_hits_balls(x0, dirs, t0: float, centers, radii) -> np.ndarray:
    """For each direction, whether ``{x0 + t theta : 0 < t <= t0}`` meets a closed ball.

    Uses the distance from each center to the segment.
    """
    dirs = np.atleast_2d(dirs)
    hit = np.zeros(len(dirs), dtype=bool)
    rel = np.asarray(centers) - np.asarray(x0)
    for start in range(0, len(dirs), 4096):
        d = dirs[start : start + 4096]
        tau = np.clip(rel @ d.T, 0.0, t0)
        gap2 = (rel**2).sum(axis=1)[:, None] - 2 * tau * (rel @ d.T) + tau**2
        hit[start : start + 4096] = np.any(gap2 <= (np.asarray(radii) ** 2)[:, None], axis=0)
    return hit


def segment_hits_balls_quadratic(x0, theta, t0: float, centers, radii) -> bool:
    """Independent test for one direction via roots of ``|x0 + t theta - c|^2 = r^2``."""
    theta = np.asarray(theta, dtype=float)
    theta = theta / np.linalg.norm(theta)
    for c, r in zip(np.atleast_2d(centers), np.atleast_1d(radii)):
        w = np.asarray(x0, dtype=float) - c
        b = float(w @ theta)
        cc = float(w @ w) - r * r
        disc = b * b - cc
        if disc < 0:
            continue
        sq = math.sqrt(disc)
        t1, t2 = -b - sq, -b + sq
        # The chord [t1, t2] of the closed ball must meet (0, t0].
        if t2 > 0 and t1 <= t0:
            return True
    return False


def _directions(n: int, count: int, seed: int) -> np.ndarray:
    sob = qmc.Sobol(d=n, scramble=False)
    m = max(1, math.ceil(math.log2(2 * count + 2)))
    g = norm.ppf(np.clip(sob.random_base2(m), 1e-12, 1 - 1e-12))
    nrm = np.linalg.norm(g, axis=1)
    # The origin and the centre point of the cube map to the zero vector.
    keep = nrm > 1e-9
    g = (g[keep] / nrm[keep, None])[:count]
    rot = special_ortho_group.rvs(n, random_state=seed) if n > 1 else np.eye(1)
    return g @ rot.T


def find_escape_ray(E: BallUnion, x0, t0: float, n_directions: int = 1024, seed: int = 0) -> EscapeResult:
    """Search deterministic directions for a segment from ``x0`` of length ``t0`` missing ``E``.

    Directions come from an unscrambled Sobol sequence pushed to the sphere
    and rotated by a seeded random rotation. A found direction is
    re-verified with ``segment_hits_balls_quadratic``.
    """
    if not isinstance(E, BallUnion):
        raise InvalidParameterError("escape rays are searched against ball unions")
    if not t0 > 0:
        raise InvalidParameterError("t0 must be positive")
    x0 = np.asarray(x0, dtype=float)
    n = x0.size
    centers, radii = _relevant(E, x0, t0)
    if len(radii) == 0:
        e = np.eye(n)[0]
        return EscapeResult(True, e, 0.0, 1, True)
    dirs = _directions(n, n_directions, seed)
    hit = segment_hits_balls(x0, dirs, t0, centers, radii)
    blocked = float(hit.mean())
    free = np.flatnonzero(~hit)
    if not free.size:
        return EscapeResult(False, None, blocked, len(dirs), False)
    theta = dirs[free[0]]
    verified = not segment_hits_balls_quadratic(x0, theta, t0, centers, radii)
    return EscapeResult(True, theta, blocked, len(dirs), verified)

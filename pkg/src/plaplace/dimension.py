"""Box-counting dimension, Frostman points and the singular-set dimension experiment.

Box counting stands in for Hausdorff dimension, which cannot be computed
from samples. The two agree on the flat and self-similar sets used here.
"""

from __future__ import annotations

import math
import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from plaplace.conformal import PlaneDistPower, conformal_ray_length, curvature_at
from plaplace.measures import RadonMeasure, SurfaceSample, k_plane_patch, segment
from plaplace.spectra import InvalidParameterError
from plaplace.wolff import wolff_upper_report

__all__ = [
    "ResolutionError",
    "PointCloud",
    "BoxCount",
    "box_counting_dim",
    "sample_spacing",
    "FrostmanResult",
    "frostman_point",
    "Theorem4Config",
    "theorem4_experiment",
]


class ResolutionError(ValueError):
    """The cloud is too coarse for the smallest requested box size."""


@dataclass
class PointCloud:
    """Samples of a bounded set ``S`` together with a record of how it was made."""

    points: np.ndarray
    descriptor: dict = field(default_factory=dict)

    def __post_init__(self):
        self.points = np.atleast_2d(np.asarray(self.points, dtype=float))
        if self.points.size == 0:
            raise InvalidParameterError("point cloud is empty")
        if not np.all(np.isfinite(self.points)):
            raise InvalidParameterError("point cloud must be bounded")

    @classmethod
    def from_sample(cls, s: SurfaceSample) -> "PointCloud":
        return cls(s.points, dict(s.descriptor))

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def transformed(self, rotation, shift) -> "PointCloud":
        return PointCloud(self.points @ np.asarray(rotation).T + np.asarray(shift), dict(self.descriptor))


@dataclass(frozen=True)
class BoxCount:
    dim: float
    fit_residual: float
    scales: tuple[float, ...]
    counts: tuple[int, ...]
    spacing: float


def sample_spacing(points: np.ndarray) -> float:
    """Largest nearest-neighbour distance: the coarsest gap in the cloud."""
    unique = np.unique(points, axis=0)
    if len(unique) < 2:
        return 0.0
    d, _ = cKDTree(unique).query(unique, k=2)
    return float(d[:, 1].max())


def _count(points: np.ndarray, delta: float, offsets: np.ndarray) -> int:
    best = None
    for off in offsets:
        keys = np.floor((points - off * delta) / delta).astype(np.int64)
        c = len(np.unique(keys, axis=0))
        best = c if best is None else min(best, c)
    return int(best)


def box_counting_dim(
    S: PointCloud, scale_range: tuple[float, float], n_scales: int = 6, n_offsets: int = 4, seed: int = 0
) -> BoxCount:
    """Least-squares slope of ``log N(delta)`` against ``-log delta``.

    ``N(delta)`` is the number of occupied boxes of an axis-aligned lattice
    of side ``delta``, minimized over a few seeded lattice offsets (the
    first is the unshifted lattice).
    """
    d_min, d_max = map(float, scale_range)
    if not 0 < d_min < d_max:
        raise InvalidParameterError("need 0 < delta_min < delta_max")
    if n_scales < 5:
        raise InvalidParameterError("need at least 5 scales")
    spacing = sample_spacing(S.points)
    if spacing >= d_min:
        raise ResolutionError(f"sample spacing {spacing:.3g} is not below delta_min = {d_min:.3g}")
    if spacing >= 0.5 * d_min:
        warnings.warn("sample spacing exceeds delta_min / 2; small-scale counts may be low", RuntimeWarning, stacklevel=2)
    scales = np.geomspace(d_max, d_min, n_scales)
    rng = np.random.default_rng(seed)
    offsets = np.vstack([np.zeros(S.dim), rng.uniform(0.0, 1.0, (max(n_offsets, 1) - 1, S.dim))])
    counts = np.array([_count(S.points, d, offsets) for d in scales])
    x = -np.log(scales)
    y = np.log(counts)
    coef, res, *_ = np.polyfit(x, y, 1, full=True)
    resid = float(np.sqrt(res[0] / len(x))) if len(res) else 0.0
    return BoxCount(float(coef[0]), resid, tuple(map(float, scales)), tuple(int(c) for c in counts), spacing)


@dataclass(frozen=True)
class FrostmanResult:
    found: bool
    x0: tuple[float, ...] | None
    C: float
    constants: tuple[float, ...]


def _envelope(mu: RadonMeasure, x, d: float, t_lo: float, t_hi: float, n_t: int) -> float:
    cum = mu.radial_cumulative(x)
    ts = np.geomspace(t_lo, t_hi, n_t)
    bp = np.asarray(cum.breakpoints, dtype=float)
    # For step cumulatives the supremum sits at a jump or at t_lo.
    ts = np.union1d(ts, bp[(bp >= t_lo) & (bp <= t_hi)])
    vals = np.asarray(cum.closed(ts), dtype=float) / ts**d
    return float(vals.max())


def frostman_point(
    mu: RadonMeasure, d: float, candidates, t_range: tuple[float, float], cap: float = math.inf, n_t: int = 64
) -> FrostmanResult:
    """Candidate minimizing ``C = sup_t mu(B(x, t)) / t^d`` over ``t_range``.

    Not found when every candidate's constant exceeds ``cap``.
    """
    if not d > 0:
        raise InvalidParameterError("d must be positive")
    t_lo, t_hi = map(float, t_range)
    if not 0 < t_lo < t_hi:
        raise InvalidParameterError("need 0 < t_min < t_max")
    cands = np.atleast_2d(np.asarray(candidates, dtype=float))
    consts = np.array([_envelope(mu, c, d, t_lo, t_hi, n_t) for c in cands])
    j = int(np.argmin(consts))
    if not consts[j] <= cap:
        return FrostmanResult(False, None, float(consts[j]), tuple(map(float, consts)))
    return FrostmanResult(True, tuple(float(v) for v in cands[j]), float(consts[j]), tuple(map(float, consts)))


# Singular-set experiment


@dataclass
class Theorem4Config:
    """Configuration of the singular-set experiment.

    ``S`` is the ``(k-1)``-plane patch ``|x_j| <= half_width`` on the first
    ``k-1`` axes, and ``gbar = dist(., S)^(-2) g``. The patch is sampled by
    ``count`` cells per axis.
    """

    n: int = 5
    k: int = 2
    p: float | None = None
    n_points: int = 1000
    n_rays: int = 8
    half_width: float = 1.0
    count: int = 10000
    scales: tuple[float, float] = (2.0**-7, 0.5)
    n_scales: int = 7
    dim_tol: float = 0.1
    spectrum_tol: float = 1e-8
    wolff: bool = False
    wolff_eps: float = 0.2
    wolff_i_range: tuple[int, int] = (4, 12)
    wolff_samples: int = 64
    seed: int = 0

    def __post_init__(self):
        n, k = self.n, self.k
        if not (isinstance(n, int) and n >= 3):
            raise InvalidParameterError("n must be an integer >= 3")
        if not 1 <= k <= n / 2:
            raise InvalidParameterError(f"need 1 <= k <= n/2, got k={k}, n={n}")
        p_model = n - 2 * k + 2
        if self.p is None:
            self.p = float(p_model)
        if abs(self.p - p_model) > 1e-12:
            raise InvalidParameterError(f"p must equal n - 2k + 2 = {p_model}")
        if not 2 <= self.p < n:
            raise InvalidParameterError(f"p = {self.p} must lie in [2, n); k = 1 gives p = n")


def _check_spectra(cfg: Theorem4Config) -> dict:
    n, k, p = cfg.n, cfg.k, cfg.p
    f = PlaneDistPower(n, k, -(n - p) / (2.0 * (p - 1.0)), p)
    rng = np.random.default_rng([cfg.seed, 1])
    mins, zeros = [], []
    pts = rng.uniform(-1.0, 1.0, (cfg.n_points, n))
    # Keep sample points off S so the spectra are evaluated in Omega \ S.
    normal = np.linalg.norm(pts[:, k - 1 :], axis=1)
    pts[normal < 1e-3, k - 1] += 1e-2
    for x in pts:
        ev = np.asarray(curvature_at(f, x, p).ap_spectrum.values)
        mins.append(float(ev.min()))
        zeros.append(int(np.sum(np.abs(ev) <= 1e-8)))
    worst = float(min(mins))
    return {
        "ok": worst >= -cfg.spectrum_tol,
        "min_eigenvalue": worst,
        "tolerance": -cfg.spectrum_tol,
        "n_points": cfg.n_points,
        "zero_directions_min": int(min(zeros)),
        "zero_directions_max": int(max(zeros)),
    }


def _check_rays(cfg: Theorem4Config) -> dict:
    n, k, p = cfg.n, cfg.k, cfg.p
    f = PlaneDistPower(n, k, -(n - p) / (2.0 * (p - 1.0)), p)
    rng = np.random.default_rng([cfg.seed, 2])
    rows = []
    for _ in range(cfg.n_rays):
        foot = np.zeros(n)
        foot[: k - 1] = rng.uniform(-0.5, 0.5, k - 1) * cfg.half_width
        theta = np.zeros(n)
        theta[k - 1 :] = rng.normal(size=n - k + 1)
        theta /= np.linalg.norm(theta)
        res = conformal_ray_length(f, (foot, theta, 0.0, 1.0))
        rows.append({"foot": foot.tolist(), "direction": theta.tolist(), "divergent": res.divergent, "local_exponent": res.local_exponent})
    worst = max(r["local_exponent"] for r in rows)
    return {"ok": all(r["divergent"] for r in rows) and worst <= -1.0 + 1e-6, "max_local_exponent": worst, "rays": rows}


def _singular_sample(cfg: Theorem4Config) -> SurfaceSample:
    n, k = cfg.n, cfg.k
    m = k - 1
    if m == 1:
        a = np.zeros(n)
        b = np.zeros(n)
        a[0], b[0] = -cfg.half_width, cfg.half_width
        return segment(a, b, cfg.count)
    per_axis = max(2, int(round(cfg.count ** (1.0 / m))))
    return k_plane_patch(np.zeros(n), np.eye(n)[:m], cfg.half_width, per_axis)


def _check_dimension(cfg: Theorem4Config) -> dict:
    S = _singular_sample(cfg)
    bc = box_counting_dim(PointCloud.from_sample(S), cfg.scales, cfg.n_scales, seed=cfg.seed)
    target = (cfg.n - cfg.p) / 2.0
    return {
        "ok": abs(bc.dim - target) <= cfg.dim_tol,
        "dim": bc.dim,
        "target": target,
        "tolerance": cfg.dim_tol,
        "fit_residual": bc.fit_residual,
        "counts": list(bc.counts),
        "scales": list(bc.scales),
    }


def _check_wolff(cfg: Theorem4Config) -> dict:
    S = _singular_sample(cfg)
    m = float(cfg.k - 1)
    lo, hi = cfg.wolff_i_range
    rep = wolff_upper_report(
        S, np.zeros(cfg.n), cfg.p, m, cfg.wolff_eps, 0.5, range(lo, hi + 1), cfg.wolff_samples, seed=cfg.seed
    )
    d = rep.to_dict()
    d["ok"] = bool(rep.uniform_ok and rep.certificate["summable"])
    return d


def theorem4_experiment(config: Theorem4Config | dict) -> dict:
    """Run the spectral, completeness and dimension sub-checks.

    Sub-check failures and exceptions are reported per item rather than
    raised. The sub-checks run concurrently; assembly order is fixed.
    """
    cfg = config if isinstance(config, Theorem4Config) else Theorem4Config(**config)
    jobs = {"spectra": _check_spectra, "rays": _check_rays, "dimension": _check_dimension}
    if cfg.wolff:
        jobs["wolff_upper"] = _check_wolff
    # PLAPLACE_THREADS caps the pool; results never depend on it.
    workers = max(1, min(len(jobs), int(os.environ.get("PLAPLACE_THREADS", len(jobs)))))
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = {name: pool.submit(fn, cfg) for name, fn in jobs.items()}
        checks = {}
        for name in jobs:
            try:
                checks[name] = futures[name].result()
            except Exception as exc:  # reported, not raised
                checks[name] = {"ok": False, "error": f"{type(exc).__name__}: {exc}"}
    return {
        "config": {k: (list(v) if isinstance(v, tuple) else v) for k, v in cfg.__dict__.items()},
        "checks": checks,
        "ok": all(c["ok"] for c in checks.values()),
    }

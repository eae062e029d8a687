"""Wolff potentials with certified brackets, and the estimates built on them.

``W(x, r) = int_0^r (mu(B(x, t)) / t^(n-p))^(1/(p-1)) dt / t``.

The ball mass ``M(t) = mu(B(x, t))`` is nondecreasing, so on any subinterval
``[a, b]`` the integral lies between ``M(a)^(1/(p-1)) K(a, b)`` and
``M(b-)^(1/(p-1)) K(a, b)`` with the kernel integral
``K(a, b) = int_a^b t^(-beta-1) dt``, ``beta = (n-p)/(p-1)``. Refining the
partition tightens the bracket; pieces where ``M`` is constant or an exact
power law are integrated in closed form.
"""

from __future__ import annotations

import csv
import io
import logging
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from plaplace.capacity import spherical_condenser_oracle
from plaplace.measures import Atomic, NoMassError, RadialCumulative, RadonMeasure, growth_exponent
from plaplace.pdirichlet import sphere_area
from plaplace.spectra import InvalidParameterError

log = logging.getLogger(__name__)

__all__ = [
    "WolffParams",
    "WolffValue",
    "PartialResultError",
    "DomainError",
    "HypothesisError",
    "kernel_integral",
    "wolff_integral",
    "wolff_potential",
    "dirac_wolff",
    "newton_wolff",
    "fundamental_constant",
    "FourTermSplit",
    "four_term_split",
    "annulus_index",
    "km_sandwich_check",
    "SandwichRatios",
    "wolff_upper_report",
]


class PartialResultError(RuntimeError):
    """The requested tolerance was not met; carries the last bracket."""

    def __init__(self, message: str, lower: float, upper: float):
        super().__init__(message)
        self.lower = lower
        self.upper = upper


class DomainError(ValueError):
    """A point lies outside the region an operation is defined on."""


class HypothesisError(ValueError):
    """A measured growth condition contradicts the assumed one."""


@dataclass(frozen=True)
class WolffParams:
    p: float
    r: float
    tol: float = 1e-8
    max_intervals: int = 50_000

    def __post_init__(self):
        if not self.p > 1:
            raise InvalidParameterError(f"p must exceed 1, got {self.p}")
        if not self.r > 0:
            raise InvalidParameterError(f"r must be positive, got {self.r}")
        if not self.tol > 0:
            raise InvalidParameterError("tol must be positive")

    def check(self, n: int) -> None:
        if self.p > n:
            raise InvalidParameterError(f"p must lie in (1, n] = (1, {n}], got {self.p}")


@dataclass(frozen=True)
class WolffValue:
    value: float
    lower: float
    upper: float
    intervals: int = 0
    head_exact: bool = True
    diagnostic: str = ""

    def __iter__(self):
        return iter((self.value, self.lower, self.upper))

    @property
    def relative_gap(self) -> float:
        if self.upper == self.lower:
            return 0.0
        return (self.upper - self.lower) / max(abs(self.value), 1e-300)


def _beta(n: int, p: float) -> float:
    return (n - p) / (p - 1.0)


def kernel_integral(a, b, n: int, p: float):
    """``int_a^b t^(-beta-1) dt`` (``log(b/a)`` when ``p = n``)."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    beta = _beta(n, p)
    if beta == 0.0:
        return np.log(b / a)
    return (a**-beta - b**-beta) / beta


def _power_integral(coef, e, a, b, n: int, p: float):
    """``int_a^b (coef t^e)^(1/(p-1)) t^(-beta-1) dt`` for arrays of pieces."""
    gamma = (e - (n - p)) / (p - 1.0)
    amp = coef ** (1.0 / (p - 1.0))
    with np.errstate(divide="ignore", invalid="ignore"):
        safe = np.where(gamma == 0, 1.0, gamma)
        val = np.where(gamma == 0, np.log(b / a), (b**gamma - a**gamma) / safe)
    return amp * val


def _head_integral(head, hi: float, n: int, p: float) -> tuple[float, str]:
    """Closed-form integral of the head model over ``(0, hi]``."""
    if head.c == 0.0:
        return 0.0, ""
    gamma = (head.m - (n - p)) / (p - 1.0)
    if gamma <= 0:
        return math.inf, (
            f"integral diverges at t -> 0: mass ~ {head.c:.3g} t^{head.m:g} near the point"
        )
    return head.c ** (1.0 / (p - 1.0)) * hi**gamma / gamma, ""


def wolff_integral(
    cum: RadialCumulative,
    n: int,
    p: float,
    lo: float,
    hi: float,
    tol: float = 1e-8,
    max_intervals: int = 50_000,
    exact_pieces: bool = True,
) -> WolffValue:
    """Bracket ``int_lo^hi (M(t) / t^(n-p))^(1/(p-1)) dt / t``.

    ``lo = 0`` uses the cumulative's head model below its first resolved
    radius. With ``exact_pieces`` False the closed forms for step and
    power-law pieces are not used, leaving only the monotone bracket.
    """
    if not 0 <= lo < hi:
        raise InvalidParameterError(f"need 0 <= lo < hi, got [{lo}, {hi}]")
    e_inv = 1.0 / (p - 1.0)
    head_val, diag = 0.0, ""
    head_exact = True
    start = lo
    if lo == 0.0:
        t_h = min(cum.head.t_h, hi)
        head_val, diag = _head_integral(cum.head, t_h, n, p)
        head_exact = cum.head.exact or cum.head.c == 0.0
        if math.isinf(head_val):
            return WolffValue(math.inf, math.inf, math.inf, 0, head_exact, diag)
        if t_h >= hi:
            return WolffValue(head_val, head_val, head_val, 0, head_exact, diag)
        start = t_h

    # Initial partition: breakpoints plus a dyadic ladder.
    bps = cum.breakpoints[(cum.breakpoints > start) & (cum.breakpoints < hi)]
    ladder = start * 2.0 ** np.arange(1, max(1, int(math.log2(hi / start))) + 1)
    ladder = ladder[ladder < hi]
    nodes = np.unique(np.concatenate([[start], bps, ladder, [hi]]))
    if len(nodes) - 1 > max_intervals:
        max_intervals = len(nodes) - 1

    def evaluate(a, b):
        k = kernel_integral(a, b, n, p)
        m_lo = np.asarray(cum.closed(a), dtype=float)
        m_hi = np.asarray(cum.open(b), dtype=float)
        low = m_lo**e_inv * k
        up = m_hi**e_inv * k
        exact = np.zeros(len(a), dtype=bool)
        if exact_pieces and cum.step:
            # No breakpoint strictly inside: M is constant on [a, b).
            exact = m_lo == m_hi
        mid = 0.5 * (low + up)
        if exact_pieces and cum.segments is not None:
            starts, ca, ce = cum.segments
            j = np.searchsorted(starts, a, side="right") - 1
            jb = np.searchsorted(starts, b, side="left") - 1
            same = j == jb
            val = _power_integral(ca[j], ce[j], a, b, n, p)
            mid = np.where(same, val, mid)
            exact = exact | same
        low = np.where(exact, mid, low)
        up = np.where(exact, mid, up)
        return low, up, mid, exact

    a, b = nodes[:-1], nodes[1:]
    low, up, mid, exact = evaluate(a, b)
    while True:
        lower = float(low.sum()) + head_val
        upper = float(up.sum()) + head_val
        value = float(mid.sum()) + head_val
        gap = upper - lower
        if gap <= tol * max(abs(value), 1e-300):
            break
        if len(a) >= max_intervals:
            raise PartialResultError(
                f"bracket gap {gap / max(value, 1e-300):.2e} (relative) exceeds tol {tol:g} "
                f"after {len(a)} intervals",
                lower,
                upper,
            )
        g = up - low
        # Split the intervals carrying the top share of the gap.
        order = np.argsort(g)[::-1]
        csum = np.cumsum(g[order])
        take = order[: max(1, int(np.searchsorted(csum, 0.5 * gap)) + 1)]
        take = take[: max(1, max_intervals - len(a))]
        sa, sb = a[take], b[take]
        split = np.where(sa > 0, np.sqrt(sa * sb), 0.5 * (sa + sb))
        keep = np.ones(len(a), dtype=bool)
        keep[take] = False
        na = np.concatenate([split * 0 + sa, split])
        nb = np.concatenate([split, sb])
        nl, nu, nm, ne = evaluate(na, nb)
        a = np.concatenate([a[keep], na])
        b = np.concatenate([b[keep], nb])
        low = np.concatenate([low[keep], nl])
        up = np.concatenate([up[keep], nu])
        mid = np.concatenate([mid[keep], nm])
    return WolffValue(value, lower, upper, len(a), head_exact, diag)


def wolff_potential(mu: RadonMeasure, x, params: WolffParams, exact_pieces: bool = True) -> WolffValue:
    """``W^mu_{1,p}(x, r)`` with a certified bracket.

    Divergence at ``t -> 0`` (an atom at ``x`` with ``p <= n``) gives
    ``+inf`` and a diagnostic rather than an exception.
    """
    params.check(mu.dim)
    cum = mu.radial_cumulative(x)
    if cum.total == 0.0:
        return WolffValue(0.0, 0.0, 0.0)
    return wolff_integral(cum, mu.dim, params.p, 0.0, params.r, params.tol, params.max_intervals, exact_pieces)


def dirac_wolff(n: int, p: float, dist: float, r: float, mass: float = 1.0) -> float:
    """Closed form for ``mu = mass * delta``: ``mass^(1/(p-1)) K(dist, r)``."""
    if dist >= r:
        return 0.0
    if dist == 0.0:
        return math.inf
    return mass ** (1.0 / (p - 1.0)) * float(kernel_integral(dist, r, n, p))


def newton_wolff(points, weights, x, n: int, r: float) -> float:
    """Direct kernel sum for ``p = 2``: ``sum_k w_k (d_k^(2-n) - r^(2-n)) / (n-2)`` over ``d_k < r``."""
    d = np.linalg.norm(np.atleast_2d(points) - np.asarray(x, dtype=float), axis=1)
    w = np.asarray(weights, dtype=float)
    inside = d < r
    return float(np.sum(w[inside] * (d[inside] ** (2.0 - n) - r ** (2.0 - n)) / (n - 2.0)))


def fundamental_constant(n: int, p: float) -> float:
    """``c(n, p)`` with ``-Delta_p |x|^-beta = c(n, p) delta_0``: ``beta^(p-1) omega_{n-1}``."""
    if not 1 < p < n:
        raise InvalidParameterError("the fundamental solution needs 1 < p < n")
    return _beta(n, p) ** (p - 1.0) * sphere_area(n - 1)


# Decomposition around a point of the annulus omega_i(x0)


@dataclass(frozen=True)
class FourTermSplit:
    outer: float
    middle: float
    near: float
    inner: float
    i: int
    i0: int
    outer_bound: float = math.inf
    middle_bound: float = math.inf
    near_bound: float = math.inf
    total: float = math.nan
    ranges: tuple = ()

    @property
    def sum(self) -> float:
        return self.outer + self.middle + self.near + self.inner


def annulus_index(x, x0) -> int:
    """Largest ``i`` with ``2^(-i-1) <= |x - x0| <= 2^-i``."""
    d = float(np.linalg.norm(np.asarray(x, dtype=float) - np.asarray(x0, dtype=float)))
    if d == 0:
        raise DomainError("x coincides with x0")
    return int(math.floor(-math.log2(d)))


def four_term_split(
    mu: RadonMeasure,
    x,
    x0,
    r0: float,
    i0: int,
    p: float,
    tol: float = 1e-8,
) -> FourTermSplit:
    """Split ``W(x, r0)`` over ``[0, 2^(-i-2)]``, ``[2^(-i-2), 2^(-i-1)]``,
    ``[2^(-i-1), 2^-i0]`` and ``[2^-i0, r0]`` for ``x`` in ``omega_i(x0)``.

    Bounds for the outer three pieces follow from ball inclusions:
    the outer piece uses the total mass; on ``[2^k, 2^(k+1)]`` with
    ``k >= -i-1`` we have ``B(x, t) in B(x0, 2^(k+2))``; on the near range
    ``B(x, t) in B(x0, 2^(-i+1))``. The inner piece has no bound.
    """
    n = mu.dim
    i = annulus_index(x, x0)
    if not i > i0:
        raise DomainError(f"x lies in annulus {i}, which is not beyond the cutoff {i0}")
    if 2.0**-i0 > r0:
        raise DomainError("need 2^-i0 <= r0")
    cuts = [0.0, 2.0 ** (-i - 2), 2.0 ** (-i - 1), 2.0**-i0, r0]
    cum = mu.radial_cumulative(x)
    vals = []
    for lo, hi in zip(cuts[:-1], cuts[1:]):
        if hi <= lo or cum.total == 0.0:
            vals.append(0.0)
            continue
        vals.append(wolff_integral(cum, n, p, lo, hi, tol).value)
    inner, near, middle, outer = vals
    e_inv = 1.0 / (p - 1.0)
    beta = _beta(n, p)
    x0 = np.asarray(x0, dtype=float)
    outer_b = mu.total_mass**e_inv * float(kernel_integral(cuts[3], cuts[4], n, p)) if cuts[4] > cuts[3] else 0.0
    middle_b = 0.0
    for k in range(-i - 1, -i0):
        middle_b += mu.ball_mass(x0, 2.0 ** (k + 2)) ** e_inv * (2.0**k) ** (-beta) * math.log(2.0)
    near_b = mu.ball_mass(x0, 2.0 ** (-i + 1)) ** e_inv * float(kernel_integral(cuts[1], cuts[2], n, p))
    total = wolff_integral(cum, n, p, 0.0, r0, tol).value if cum.total > 0 else 0.0
    return FourTermSplit(
        outer, middle, near, inner, i, i0, outer_b, middle_b, near_b, total, tuple(zip(cuts[:-1], cuts[1:]))
    )


# Two-sided comparison u ~ W


@dataclass(frozen=True)
class SandwichRatios:
    lower_ratio: float
    upper_ratio: float
    u: float
    wolff_r: float
    wolff_2r: float
    inf_u: float
    vacuous: bool


def _sphere_directions(n: int, count: int, rng: np.random.Generator) -> np.ndarray:
    v = rng.normal(size=(count, n))
    return v / np.linalg.norm(v, axis=1, keepdims=True)


def km_sandwich_check(
    u,
    mu: RadonMeasure,
    x,
    r: float,
    p: float,
    n_inf_samples: int = 512,
    seed: int = 0,
    tol: float = 1e-8,
) -> SandwichRatios:
    """Ratios ``u(x) / W(x, r)`` and ``u(x) / (inf_{B(x,r)} u + W(x, 2r))``.

    The infimum is sampled on spheres of radii ``r/4, r/2, r`` about ``x``
    plus ``x`` itself; for superharmonic ``u`` the minimum sits on the
    outer sphere. ``u`` maps an ``(m, n)`` array to ``m`` values.
    """
    x = np.asarray(x, dtype=float)
    n = x.size
    rng = np.random.default_rng(seed)
    dirs = _sphere_directions(n, n_inf_samples, rng)
    pts = np.vstack([x[None, :]] + [x + rad * dirs for rad in (0.25 * r, 0.5 * r, r)])
    vals = np.asarray(u(pts), dtype=float)
    ux = float(vals[0])
    inf_u = float(vals.min())
    w1 = wolff_potential(mu, x, WolffParams(p, r, tol)).value
    w2 = wolff_potential(mu, x, WolffParams(p, 2 * r, tol)).value
    lower = math.inf if w1 == 0 else ux / w1
    denom = inf_u + w2
    upper = math.inf if denom == 0 else ux / denom
    return SandwichRatios(lower, upper, ux, w1, w2, inf_u, w1 == 0)


# Upper bound near a point of small growth


@dataclass
class AnnulusRecord:
    i: int
    n_samples: int
    sup_ratio: float
    q95_ratio: float
    median_ratio: float
    fraction_within: float
    capacity_budget: float
    normalized_budget: float


@dataclass
class UpperReport:
    n: int
    p: float
    m: float
    eps: float
    r0: float
    exponent: float
    growth_m: float
    growth_C: float
    uniform_C: float
    annuli: list[AnnulusRecord] = field(default_factory=list)
    certificate: dict = field(default_factory=dict)

    @property
    def uniform_ok(self) -> bool:
        return all(a.fraction_within >= 0.95 for a in self.annuli)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["uniform_ok"] = self.uniform_ok
        return d

    def to_csv(self) -> str:
        buf = io.StringIO()
        cols = list(AnnulusRecord.__dataclass_fields__)
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(cols)
        for a in self.annuli:
            w.writerow([repr(getattr(a, c)) if isinstance(getattr(a, c), float) else getattr(a, c) for c in cols])
        return buf.getvalue()


def wolff_upper_report(
    mu: RadonMeasure,
    x0,
    p: float,
    m: float,
    eps: float,
    r0: float,
    i_range,
    samples_per_annulus: int = 64,
    seed: int = 0,
    growth_slack: float = 0.05,
    tol: float = 1e-6,
    uniform_factor: float = 2.0,
) -> UpperReport:
    """Per-annulus statistics of ``W(x, r0) |x - x0|^((n-p-m+eps)/(p-1))``.

    The growth hypothesis ``mu(B(x0, t)) <= C t^m`` is measured first over
    the scales the annuli touch; a fitted exponent below ``m - growth_slack``
    raises ``HypothesisError``. The uniform constant is ``uniform_factor``
    times the median of the per-annulus 95th percentiles, and each annulus
    reports the fraction of samples under it. The capacity budget of
    annulus ``i`` is ``c(n, p) 2^(-(n-p) i) 2^(-eps i)``, normalized by the
    annulus denominator ``c(n, p) 2^(-(n-p) i)``; the certificate records
    the geometric ratio ``2^-eps`` and the tail bound of the series.
    """
    n = mu.dim
    x0 = np.asarray(x0, dtype=float)
    if not 1 < p < n:
        raise InvalidParameterError("the upper bound needs 1 < p < n")
    if not 0 <= m < n - p:
        raise InvalidParameterError(f"need 0 <= m < n - p, got m={m}")
    if not eps > 0:
        raise InvalidParameterError("eps must be positive")
    i_list = list(i_range)
    expo = (n - p - m + eps) / (p - 1.0)
    c_np = spherical_condenser_oracle(n, p, 1.0, 2.0)
    report = UpperReport(n, p, m, eps, r0, expo, math.nan, math.nan, 0.0)
    zero = mu.total_mass == 0.0
    if not zero:
        t_min = 2.0 ** (-max(i_list) - 2)
        try:
            fit = growth_exponent(mu, x0, t_min, r0, max(8, len(i_list) + 2))
        except NoMassError:
            fit = None
        if fit is not None:
            report.growth_m, report.growth_C = fit.m, fit.C
            if fit.m < m - growth_slack:
                raise HypothesisError(f"measured growth exponent {fit.m:.3f} is below m = {m}")
    rng = np.random.default_rng(seed)
    ratios = {}
    params = WolffParams(p, r0, tol)
    for i in i_list:
        if zero:
            ratios[i] = np.zeros(samples_per_annulus)
            continue
        dirs = _sphere_directions(n, samples_per_annulus, rng)
        rad = 2.0 ** (-i - 1 + rng.uniform(0.0, 1.0, samples_per_annulus))
        vals = np.empty(samples_per_annulus)
        for k in range(samples_per_annulus):
            w = wolff_potential(mu, x0 + rad[k] * dirs[k], params).value
            vals[k] = w * rad[k] ** expo
        ratios[i] = vals
    q95 = {i: float(np.quantile(v, 0.95)) for i, v in ratios.items()}
    finite_q = [q for q in q95.values() if math.isfinite(q)]
    report.uniform_C = uniform_factor * float(np.median(finite_q)) if finite_q else math.inf
    for i in i_list:
        v = ratios[i]
        budget = c_np * 2.0 ** (-(n - p) * i) * 2.0 ** (-eps * i)
        within = float(np.mean(v <= report.uniform_C)) if not zero else 1.0
        report.annuli.append(
            AnnulusRecord(
                i=i,
                n_samples=len(v),
                sup_ratio=float(v.max()),
                q95_ratio=q95[i],
                median_ratio=float(np.median(v)),
                fraction_within=within,
                capacity_budget=budget,
                normalized_budget=2.0 ** (-eps * i),
            )
        )
    q = 2.0**-eps
    first = min(i_list)
    partial = float(sum(a.normalized_budget for a in report.annuli))
    report.certificate = {
        "series": "sum_i 2^(-eps i)",
        "ratio": q,
        "summable": q < 1.0,
        "partial_sum": partial,
        "tail_bound": q**first / (1.0 - q),
        "first_index": first,
    }
    return report

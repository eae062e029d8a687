"""The acceptance suite: eleven property and oracle checks with stated tolerances.

Each criterion returns a ``CriterionResult`` whose ``measured`` record is
deterministic given the seed. Wall-clock figures are kept apart in
``seconds`` so reports can be compared byte for byte once they are removed.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field

import numpy as np

from plaplace import capacity as cap
from plaplace import spectra as sp
from plaplace.conformal import (
    GridField,
    LogForm,
    PlaneDistPower,
    RadialPower,
    curvature_at,
    limit_consistency,
    p_laplace_residual,
)
from plaplace.dimension import Theorem4Config, theorem4_experiment
from plaplace.geometry import Ball
from plaplace.measures import Atomic, segment
from plaplace.thinness import (
    ball_chain,
    find_escape_ray,
    p_thin_partial_sums,
    separating_chain,
    wiener_partial_sums,
)
from plaplace.wolff import (
    WolffParams,
    dirac_wolff,
    four_term_split,
    fundamental_constant,
    km_sandwich_check,
    newton_wolff,
    wolff_potential,
    wolff_upper_report,
)

__all__ = ["CriterionResult", "CRITERIA", "SUITES", "resolve_suite", "run_criterion", "run_suite"]


@dataclass
class CriterionResult:
    id: int
    name: str
    passed: bool
    measured: dict
    tolerance: str
    budget_s: float
    seconds: float = 0.0
    error: str | None = None

    @property
    def within_budget(self) -> bool:
        return self.seconds <= self.budget_s

    def line(self) -> str:
        status = "PASS" if self.passed and self.within_budget else "FAIL"
        extra = "" if self.within_budget else f" (over budget {self.budget_s:.0f} s)"
        detail = self.error or _summary(self.measured)
        return f"[{status}] {self.id:2d} {self.name}: {detail} | tol: {self.tolerance} | {self.seconds:.1f} s{extra}"

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "name": self.name,
            "passed": self.passed,
            "measured": self.measured,
            "tolerance": self.tolerance,
            "budget_s": self.budget_s,
            "error": self.error,
        }


def _summary(measured: dict) -> str:
    keys = measured.get("_summary", [])
    parts = []
    for k in keys:
        v = measured[k]
        parts.append(f"{k}={v:.3g}" if isinstance(v, float) else f"{k}={v}")
    return ", ".join(parts)


def _finite(x: float) -> float | str:
    return x if math.isfinite(x) else repr(x)


# 1. Model spectra


def c1_model_spectra(seed: int, quick: bool) -> tuple[bool, dict]:
    worst = 0.0
    member_ok = True
    rows = []
    for n in range(4, 11):
        for k in range(1, n // 2 + 1):
            p0 = n - 2 * k + 2
            s = sp.model_spectrum(n, k)
            got = np.asarray(sp.ap_spectrum(s, p0).values)
            want = np.asarray([0.0] * k + [float(n - 2 * k)] * (n - k))
            err = float(np.max(np.abs(got - want)))
            worst = max(worst, err)
            below = [q for q in (p0 - 0.5, p0 - 1e-3) if q > 1]
            strict_below = all(sp.ap_functional(s, q) > 0 for q in below)
            fails_above = all(not sp.cone_membership(s, sp.ConeSpec.ap(q)) for q in (p0 + 1e-3, p0 + 0.5))
            member_ok &= strict_below and fails_above
            rows.append({"n": n, "k": k, "p": p0, "max_abs_error": err, "strict_below": strict_below, "fails_above": fails_above})
    return worst <= 1e-12 and member_ok, {"max_abs_error": worst, "membership_ok": member_ok, "cases": rows, "_summary": ["max_abs_error", "membership_ok"]}


# 2. Cone lemmas


def c2_cone_lemmas(seed: int, quick: bool) -> tuple[bool, dict]:
    count = 10_000 if quick else 100_000
    rng = np.random.default_rng([seed, 2])
    tol = 1e-12
    violations = {"ap_nested": 0, "rr_nested": 0, "ap_in_rr": 0, "fast_path": 0}
    reverse = {"rr_small_in_large": 0}
    configs = 0
    for n in range(3, 9):
        ps = sorted({1.5, 2.0, 2.5, 3.0, float(n) - 0.5, float(n), float(n) + 1.0})
        for p1, p2 in zip(ps[:-1], ps[1:]):
            lam = sp.sample_spectra(rng, n, count, sp.ConeSpec.ap(p2))
            inner = sp.batch_ap_functional(lam, p2) >= 0
            violations["ap_nested"] += int(np.sum(inner & (sp.batch_ap_functional(lam, p1) < -tol)))
            configs += 1
        for r in range(1, n // 2 + 1):
            lam = sp.sample_spectra(rng, n, count, sp.ConeSpec.rr(r))
            inner = sp.batch_bochner(lam, r) >= 0
            for s in range(1, r):
                # As stated for the criterion: R^(r) inside R^(s) for s <= r.
                violations["rr_nested"] += int(np.sum(inner & (sp.batch_bochner(lam, s) < -tol)))
            configs += 1
            # The opposite direction, R^(s) inside R^(r), sampled near the R^(s) boundary.
            for s in range(1, r):
                lam_s = sp.sample_spectra(rng, n, count, sp.ConeSpec.rr(s))
                inner_s = sp.batch_bochner(lam_s, s) >= 0
                reverse["rr_small_in_large"] += int(np.sum(inner_s & (sp.batch_bochner(lam_s, r) < -tol)))
        for p in np.linspace(2.0, float(n), 5):
            lam = sp.sample_spectra(rng, n, count, sp.ConeSpec.ap(p))
            inner = sp.batch_ap_functional(lam, p) >= 0
            r_lo = math.ceil((n - p) / 2 + 1 - 1e-12)
            for r in range(max(r_lo, 1), n // 2 + 1):
                violations["ap_in_rr"] += int(np.sum(inner & (sp.batch_bochner(lam, r) < -tol)))
            configs += 1
        lam = sp.sample_spectra(rng, n, min(count, 20_000))
        for r in range(1, n // 2 + 1):
            fast = sp.batch_bochner(lam, r)
            brute = sp.batch_bochner_brute_force(lam, r)
            violations["fast_path"] += int(np.sum(np.abs(fast - brute) > 1e-12 * (1 + np.abs(brute))))
    # A fixed spectrum in R^(2) but not in R^(1) for n = 4.
    lam = np.array([[-1.0, 0.5, 1.0, 1.0]])
    witness = {"spectrum": lam[0].tolist(), "R2": float(sp.batch_bochner(lam, 2)[0]), "R1": float(sp.batch_bochner(lam, 1)[0])}
    total = sum(violations.values())
    return total == 0, {
        **violations,
        **reverse,
        "rr_counterexample": witness,
        "samples_per_config": count,
        "configs": configs,
        "_summary": ["ap_nested", "rr_nested", "ap_in_rr", "fast_path", "rr_small_in_large"],
    }


# 3. Wolff quadrature


def c3_wolff(seed: int, quick: bool) -> tuple[bool, dict]:
    rng = np.random.default_rng([seed, 3])
    dirac_err = 0.0
    for n, p in [(3, 2.0), (4, 2.5), (5, 3.0), (3, 3.0), (6, 1.5)]:
        for d, r in [(0.05, 1.0), (0.3, 0.5), (0.7, 0.5), (1e-3, 2.0)]:
            x = np.zeros(n)
            x[0] = d
            got = wolff_potential(Atomic.dirac(np.zeros(n), 1.7), x, WolffParams(p, r, 1e-10)).value
            want = dirac_wolff(n, p, d, r, 1.7)
            dirac_err = max(dirac_err, abs(got - want) / max(abs(want), 1e-300) if want else abs(got))
    newton_err = 0.0
    for _ in range(10):
        n = int(rng.integers(3, 7))
        m = int(rng.integers(1, 30))
        pts = rng.uniform(-1, 1, (m, n))
        w = rng.uniform(0.1, 2.0, m)
        x = rng.uniform(-1, 1, n)
        r = float(rng.uniform(0.2, 2.0))
        got = wolff_potential(Atomic(pts, w), x, WolffParams(2.0, r, 1e-9)).value
        want = newton_wolff(pts, w, x, n, r)
        newton_err = max(newton_err, abs(got - want) / want if want else abs(got))
    split_tol = 1e-7
    split_err = 0.0
    n_split = 30 if quick else 100
    mu = segment(np.array([-1.0, 0, 0, 0]), np.array([1.0, 0, 0, 0]), 300, focus=1.0, h_min=2.0**-14)
    x0 = np.zeros(4)
    for _ in range(n_split):
        d = 2.0 ** -rng.uniform(3.0, 9.0)
        v = rng.normal(size=4)
        x = x0 + d * v / np.linalg.norm(v)
        sp_ = four_term_split(mu, x, x0, 1.0, 1, 2.5, split_tol)
        err = abs(sp_.sum - sp_.total) / sp_.total
        split_err = max(split_err, err)
    ok = dirac_err <= 1e-8 and newton_err <= 1e-6 and split_err <= 2 * split_tol
    return ok, {
        "dirac_rel_err": dirac_err,
        "newton_rel_err": newton_err,
        "split_rel_err": split_err,
        "split_points": n_split,
        "split_tol": split_tol,
        "_summary": ["dirac_rel_err", "newton_rel_err", "split_rel_err"],
    }


# 4. Capacity solver


def _meridian_ball(n, p, r, R, h, lam=1.0, offset=0.0):
    pad = 4 * h
    g = cap.MeridianGrid.uniform(n, -lam * R - pad, lam * R + pad, lam * R + pad, h)
    centre = (lam * offset,) + (0.0,) * (n - 1)
    c = cap.Condenser((Ball(centre, lam * r),), Ball((0.0,) * n, lam * R), g)
    return cap.solve_condenser(c, p).value


def c4_capacity(seed: int, quick: bool) -> tuple[bool, dict]:
    out: dict = {}
    ok = True
    hs = (1 / 16, 1 / 32, 1 / 64)
    for p in (2.0, 2.5):
        vals = [_meridian_ball(3, p, 1.0, 2.0, h) for h in hs]
        oracle = cap.spherical_condenser_oracle(3, p, 1.0, 2.0)
        rich = cap.richardson(vals, hs)
        rel = abs(vals[1] / oracle - 1.0)
        out[f"p{p}_rel_err_h32"] = rel
        out[f"p{p}_richardson_order"] = rich.order
        out[f"p{p}_errors"] = [v / oracle - 1.0 for v in vals]
        ok &= rel <= 0.05 and rich.ratio >= 2.0
        base = _meridian_ball(3, p, 0.5, 2.0, 1 / 32, 1.0, 0.3)
        for lam in (0.5, 2.0):
            sc = _meridian_ball(3, p, 0.5, 2.0, 1 / 32, lam, 0.3)
            dev = abs(sc / base / lam ** (3 - p) - 1.0)
            out[f"p{p}_scaling_dev_{lam}"] = dev
            ok &= dev <= 0.03
    rng = np.random.default_rng([seed, 4])
    n_pairs = 4 if quick else 20
    grid = cap.Grid.from_bounds((-1.0,) * 3, (1.0,) * 3, 1 / 12)
    big, small = Ball((0.0,) * 3, 1.0), Ball((0.0,) * 3, 0.85)
    worst_sub = worst_mono = worst_dom = -math.inf
    rtol = 1e-6
    for j in range(n_pairs):
        p = 2.0 if j % 2 == 0 else 2.5
        # Centres in B(0, 0.3), radii <= 0.2: at least 4 cells from either outer boundary.
        balls = []
        for _ in range(2):
            v = rng.normal(size=3)
            c = 0.3 * rng.uniform() ** (1 / 3) * v / np.linalg.norm(v)
            balls.append(Ball(tuple(c), float(rng.uniform(0.08, 0.2))))
        c1 = cap.solve_condenser(cap.Condenser((balls[0],), big, grid), p).value
        c2 = cap.solve_condenser(cap.Condenser((balls[1],), big, grid), p).value
        cu = cap.solve_condenser(cap.Condenser(tuple(balls), big, grid), p).value
        cs = cap.solve_condenser(cap.Condenser((balls[0],), small, grid), p).value
        worst_sub = max(worst_sub, (cu - c1 - c2) / cu)
        worst_mono = max(worst_mono, (max(c1, c2) - cu) / cu)
        worst_dom = max(worst_dom, (c1 - cs) / cs)
    ok &= worst_sub <= rtol and worst_mono <= rtol and worst_dom <= rtol
    out.update(
        {
            "pairs": n_pairs,
            "subadditivity_excess": worst_sub,
            "monotonicity_excess": worst_mono,
            "domain_monotonicity_excess": worst_dom,
            "_summary": ["p2.0_rel_err_h32", "p2.5_rel_err_h32", "p2.0_richardson_order", "p2.5_richardson_order",
                         "subadditivity_excess", "monotonicity_excess"],
        }
    )
    return bool(ok), out


# 5. Level-set estimate


def c5_level_set(seed: int, quick: bool) -> tuple[bool, dict]:
    out: dict = {}
    ok = True
    cases = [(3, 2.0)] if quick else [(3, 2.0), (4, 2.5)]
    for n, p in cases:
        R = 1.0
        beta = (n - p) / (p - 1.0)
        amp = (1.0 / (beta ** (p - 1.0) * cap.sphere_area(n - 1))) ** (1.0 / (p - 1.0))
        radii = np.linspace(0.1, 0.7, 10)
        lams = amp * (radii**-beta - R**-beta)
        exact = cap.level_set_analytic(n, p, R, lams)
        h = 1 / 64
        g = cap.MeridianGrid.uniform(n, -R - 4 * h, R + 4 * h, R + 4 * h, h)
        omega = Ball((0.0,) * n, R)
        num = cap.level_set_check(cap.truncated_green(n, p, R)(g.points()), g, 1.0, lams, omega, p, slack=0.1)
        disc_u = cap.solve_measure_problem(g, omega, [(np.zeros(n), 1.0)], p)
        disc = cap.level_set_check(disc_u, g, 1.0, lams, omega, p, slack=0.1)
        key = f"n{n}_p{p}"
        out[f"{key}_analytic_max"] = max(v.lhs for v in exact)
        out[f"{key}_numeric_max"] = max(v.lhs for v in num)
        out[f"{key}_discrete_max"] = max(v.lhs for v in disc)
        ok &= all(v.ok for v in exact) and all(v.ok for v in num) and all(v.ok for v in disc)
    out["levels"] = 10
    out["_summary"] = [k for k in out if k.endswith("_max")]
    return bool(ok), out


# 6. Two-sided Wolff comparison for the fundamental solution


def c6_sandwich(seed: int, quick: bool) -> tuple[bool, dict]:
    n, p = 4, 2.5
    rng = np.random.default_rng([seed, 6])
    beta = (n - p) / (p - 1.0)
    # Unit mass: -Delta_p u = delta_0 for u = c(n, p)^(-1/(p-1)) |x|^-beta.
    amp = fundamental_constant(n, p) ** (-1.0 / (p - 1.0))
    mu = Atomic.dirac(np.zeros(n), 1.0)

    def u(points):
        r = np.linalg.norm(np.atleast_2d(points), axis=1)
        return amp * r**-beta

    lows, ups = [], []
    count = 20 if quick else 50
    radii = np.geomspace(1e-3, 1e-1, count)
    for rad in radii:
        v = rng.normal(size=n)
        x = rad * v / np.linalg.norm(v)
        s = km_sandwich_check(u, mu, x, 0.25, p, n_inf_samples=128, seed=int(rng.integers(1 << 31)))
        lows.append(s.lower_ratio)
        ups.append(s.upper_ratio)
    lo = min(min(lows), min(ups))
    hi = max(max(lows), max(ups))
    ok = lo >= 0.1 and hi <= 10.0
    return ok, {"min_ratio": lo, "max_ratio": hi, "points": count, "distance_range": [1e-3, 1e-1], "r": 0.25, "_summary": ["min_ratio", "max_ratio"]}


# 7. Thinness


def c7_thinness(seed: int, quick: bool) -> tuple[bool, dict]:
    ok = True
    out: dict = {"families": []}
    i_range = range(1, 9) if quick else range(1, 11)
    fams = []
    for n, p in [(4, 2.5), (5, 3.0)]:
        fams.append(("ball-chain(2, 1)", n, p, ball_chain(2.0, 1.0, n), "thin"))
        fams.append(("ball-chain(1, 0.2)", n, p, ball_chain(1.0, 0.2, n), "not-thin"))
    if not quick:
        fams.append(("separating-chain", 5, 4.0, separating_chain(5, 4.0), None))
    escapes_ok = True
    implication_ok = True
    for name, n, p, E, expect in fams:
        x0 = np.zeros(n)
        rng_i = range(2, 14) if name == "separating-chain" else i_range
        pt = p_thin_partial_sums(E, x0, p, rng_i)
        row = {"family": name, "n": n, "p": p, "annulus_verdict": pt.verdict.status, "annulus_terms": [float(t) for t in pt.terms]}
        if expect is not None:
            ok &= pt.verdict.status == expect
        # The implication is automatic once the annulus series is thin, so the
        # (costly) Wiener series is only needed for the other families.
        if pt.verdict.status != "thin" or expect is not None:
            wi = wiener_partial_sums(E, x0, p, rng_i)
            row["wiener_verdict"] = wi.verdict.status
            row["wiener_terms"] = [float(t) for t in wi.terms]
            if wi.verdict.status == "thin" and pt.verdict.status != "thin":
                implication_ok = False
        if pt.verdict.status == "thin":
            esc = find_escape_ray(E, x0, 0.5, n_directions=1024, seed=seed)
            row["escape_found"] = esc.found
            row["escape_verified"] = esc.verified
            row["escape_blocked_fraction"] = esc.blocked_fraction
            escapes_ok &= bool(esc.found and esc.verified)
        out["families"].append(row)
    out["implication_ok"] = implication_ok
    out["escapes_ok"] = escapes_ok
    out["_summary"] = ["implication_ok", "escapes_ok"]
    return bool(ok and implication_ok and escapes_ok), out


# 8. Wolff upper bound near a point of small growth


def c8_wolff_upper(seed: int, quick: bool) -> tuple[bool, dict]:
    e = np.zeros(5)
    e[0] = 1.0
    mu = segment(-e, e, 400, focus=1.0, h_min=2.0**-18, growth=1.03)
    rep = wolff_upper_report(mu, np.zeros(5), 3.0, 1.0, 0.2, 0.5, range(4, 13), 64 if quick else 200, seed=seed)
    fractions = [a.fraction_within for a in rep.annuli]
    d = {
        "uniform_C": rep.uniform_C,
        "min_fraction_within": min(fractions),
        "growth_m": rep.growth_m,
        "certificate": rep.certificate,
        "annuli": [{"i": a.i, "sup_ratio": a.sup_ratio, "q95_ratio": a.q95_ratio, "fraction_within": a.fraction_within,
                    "capacity_budget": a.capacity_budget} for a in rep.annuli],
        "_summary": ["uniform_C", "min_fraction_within"],
    }
    return bool(rep.uniform_ok and rep.certificate["summable"] and math.isfinite(rep.uniform_C)), d


# 9. Conformal identities


def c9_conformal(seed: int, quick: bool) -> tuple[bool, dict]:
    rng = np.random.default_rng([seed, 9])
    worst = 0.0
    n_pts = 30 if quick else 100
    for _ in range(n_pts):
        n = int(rng.integers(3, 8))
        p = float(rng.uniform(1.2, n - 0.2))
        a = -(n - p) / (2.0 * (p - 1.0))
        k = int(rng.integers(1, n // 2 + 1))
        x = rng.uniform(-1, 1, n)
        for f in (RadialPower(n, a, p), PlaneDistPower(n, k, a, p)):
            res = p_laplace_residual(f, x)
            u = f.u_derivatives(x)[0]
            worst = max(worst, abs(res) / max(1.0, abs(u)))
    # Sampled-field convergence on a smooth factor.
    x = np.array([0.31, 0.22, 0.4])
    center = np.array([-1.0, -1.0, -1.0])
    spectra = []
    for h in (0.1, 0.05, 0.025):
        grid = cap.Grid(tuple(x - 5.5 * h), h, (11, 11, 11))
        field_ = GridField.sample(grid, lambda y: float(np.linalg.norm(y - center)) ** -0.4, 2.5)
        spectra.append(np.asarray(curvature_at(field_, x, 2.5).schouten_spectrum.values))
    d1 = float(np.max(np.abs(spectra[0] - spectra[1])))
    d2 = float(np.max(np.abs(spectra[1] - spectra[2])))
    ratio = d1 / d2
    lim = limit_consistency(LogForm.point_log(3, -6.0), [0.3, 0.4, 0.5], p_to_n=[2.9, 2.99, 2.999], p_to_inf=[10, 50, 250])
    lim2 = limit_consistency(LogForm.point_log(4, -1.0, center=[2, 0, 0, 0]), [0.3, 0.4, 0.5, 0.1], p_to_n=[3.9, 3.99, 3.999])
    inf250 = lim.inf_limit[-1]["relative_error"]
    rates = [lim.n_rate, lim2.n_rate]
    ok = worst <= 1e-6 and 3.5 <= ratio <= 4.5 and all(0.8 <= r <= 1.2 for r in rates) and inf250 <= 0.01
    return bool(ok), {
        "max_residual": worst,
        "richardson_ratio": ratio,
        "n_limit_rates": rates,
        "inf_limit_rel_err": [r["relative_error"] for r in lim.inf_limit],
        "inf_limit_rel_err_250": inf250,
        "_summary": ["max_residual", "richardson_ratio", "inf_limit_rel_err_250"],
    }


# 10. Singular-set experiment


def c10_theorem4(seed: int, quick: bool) -> tuple[bool, dict]:
    rep = theorem4_experiment(Theorem4Config(n=5, k=2, n_points=200 if quick else 1000, seed=seed))
    c = rep["checks"]
    d = {
        "min_eigenvalue": c["spectra"].get("min_eigenvalue", math.nan),
        "max_local_exponent": c["rays"].get("max_local_exponent", math.nan),
        "box_dim": c["dimension"].get("dim", math.nan),
        "checks_ok": {k: v["ok"] for k, v in c.items()},
        "_summary": ["min_eigenvalue", "max_local_exponent", "box_dim"],
    }
    return bool(rep["ok"]), d


# 11. Determinism


def c11_determinism(seed: int, quick: bool) -> tuple[bool, dict]:
    """Two in-process runs of the fast criteria must serialize identically.

    The full two-run comparison of ``verify --suite all`` is done by the
    test suite through the command line.
    """
    ids = (1, 2, 3, 9, 10)
    a = report_json(run_suite(ids, seed, True))
    b = report_json(run_suite(ids, seed, True))
    return a == b, {"criteria": list(ids), "identical": a == b, "bytes": len(a), "_summary": ["identical", "bytes"]}


@dataclass(frozen=True)
class _Criterion:
    id: int
    name: str
    suite: str
    fn: object
    tolerance: str
    budget_s: float


CRITERIA: dict[int, _Criterion] = {
    s.id: s
    for s in [
        _Criterion(1, "model spectra", "cones", c1_model_spectra, "abs err <= 1e-12; strict membership below, failure above", 1.0),
        _Criterion(2, "cone lemmas", "cones", c2_cone_lemmas, "zero violations", 30.0),
        _Criterion(3, "wolff quadrature", "wolff", c3_wolff, "dirac <= 1e-8, newton <= 1e-6, split <= 2 tol", 30.0),
        _Criterion(4, "capacity solver", "capacity", c4_capacity, "<= 5% at h=1/32, order >= 1, scaling <= 3%, monotone", 600.0),
        _Criterion(5, "level-set estimate", "capacity", c5_level_set, "lhs <= 1 exact, <= 1.1 numeric", 120.0),
        _Criterion(6, "sandwich ratios", "wolff", c6_sandwich, "ratios in [0.1, 10]", 60.0),
        _Criterion(7, "thinness", "thinness", c7_thinness, "verdicts, implication, verified escapes", 600.0),
        _Criterion(8, "wolff upper bound", "wolff", c8_wolff_upper, ">= 95% under uniform C, summable budgets", 300.0),
        _Criterion(9, "conformal identities", "conformal", c9_conformal, "residual <= 1e-6, ratio in [3.5, 4.5], rates ~1, 1% at p=250", 60.0),
        _Criterion(10, "singular-set experiment", "dimension", c10_theorem4, "min >= -1e-8, exponent <= -1, dim 1 +- 0.1", 300.0),
        _Criterion(11, "determinism", "determinism", c11_determinism, "byte-identical reports", 300.0),
    ]
}

SUITES = sorted({s.suite for s in CRITERIA.values()} | {"all"})


def resolve_suite(selector: str) -> tuple[int, ...]:
    """``"all"``, a suite name, or comma-separated ids and names."""
    out: list[int] = []
    for part in (s.strip() for s in selector.split(",")):
        if part == "all":
            ids = [i for i in CRITERIA if i != 11]
        elif part.isdigit() and int(part) in CRITERIA:
            ids = [int(part)]
        elif part in SUITES:
            ids = [i for i, s in CRITERIA.items() if s.suite == part]
        else:
            raise KeyError(f"unknown suite {part!r}; choose from {', '.join(SUITES)} or ids 1-{len(CRITERIA)}")
        out.extend(i for i in ids if i not in out)
    return tuple(out)


def run_criterion(cid: int, seed: int = 0, quick: bool = False) -> CriterionResult:
    entry = CRITERIA[cid]
    t = time.perf_counter()
    try:
        passed, measured = entry.fn(seed, quick)
        err = None
    except Exception as exc:  # collected, not fail-fast
        passed, measured, err = False, {}, f"{type(exc).__name__}: {exc}"
    return CriterionResult(cid, entry.name, bool(passed), measured, entry.tolerance, entry.budget_s, time.perf_counter() - t, err)


def run_suite(ids, seed: int = 0, quick: bool = False, echo=None) -> list[CriterionResult]:
    results = []
    for cid in ids:
        r = run_criterion(cid, seed, quick)
        if echo is not None:
            echo(r.line())
        results.append(r)
    return results


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items() if k != "_summary"}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        return _finite(float(obj))
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def report_json(results: list[CriterionResult]) -> str:
    """Deterministic serialization of the measured part of a suite run."""
    return json.dumps([_clean(r.to_dict()) for r in results], sort_keys=True, indent=1)

"""Curvature of conformally flat metrics and the associated p-Laplace identities.

A metric ``gbar = e^(2 phi) g`` on a domain of flat ``R^n`` is specified by
its conformal factor. On the flat background the Ricci tensor of ``gbar``
has coordinate components

    Rbar_ij = -Lap(phi) d_ij - (n-2) phi_ij + (n-2) phi_i phi_j - (n-2) |grad phi|^2 d_ij,

and the mixed tensor ``e^(-2 phi) Rbar`` has the eigenvalues of ``Ric`` in a
``gbar``-orthonormal frame. Every spectrum reported here uses that frame.

The ``u``-form ``gbar = u^(4(p-1)/(n-p)) g`` corresponds to
``phi = kappa log u`` with ``kappa = 2(p-1)/(n-p)``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

from plaplace.capacity import Grid
from plaplace.spectra import EigenSpectrum, InvalidParameterError

__all__ = [
    "SingularityError",
    "DegenerateGradientError",
    "ConformalFactor",
    "RadialPower",
    "PlaneDistPower",
    "LogForm",
    "GridField",
    "ScalarField",
    "CurvatureReport",
    "curvature_at",
    "ricci_coordinates",
    "p_laplacian",
    "radial_p_laplacian",
    "infinity_laplacian",
    "p_laplace_residual",
    "limit_consistency",
    "LimitReport",
    "conformal_ray_length",
    "RayLength",
    "kappa",
    "critical_exponent",
]

_SINGULAR_EPS = 1e-9


class SingularityError(ValueError):
    """Evaluation at or too close to the singular set of a conformal factor."""


class DegenerateGradientError(ValueError):
    """The gradient vanishes where the operator needs it nonzero."""


def kappa(n: int, p: float) -> float:
    """``2(p-1)/(n-p)``: the exponent linking ``phi`` and ``log u``."""
    if not 1 < p < n:
        raise InvalidParameterError(f"the u-form needs 1 < p < n, got p={p}, n={n}")
    return 2.0 * (p - 1.0) / (n - p)


def critical_exponent(n: int, p: float) -> float:
    """``q = 2p(p-1)/(n-p) + 1``."""
    return p * kappa(n, p) + 1.0


@dataclass(frozen=True)
class ScalarField:
    """A function with its gradient and Hessian, all as callables of a point."""

    value: object
    grad: object
    hess: object


class ConformalFactor:
    """Base class: subclasses provide ``phi`` and its first two derivatives."""

    n: int
    p: float | None = None

    def phi_derivatives(self, x: np.ndarray) -> tuple[float, np.ndarray, np.ndarray]:
        raise NotImplementedError

    def singular_distance(self, x: np.ndarray) -> float:
        return math.inf

    def check_point(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float).ravel()
        if x.size != self.n:
            raise InvalidParameterError(f"point has dimension {x.size}, expected {self.n}")
        if self.singular_distance(x) <= _SINGULAR_EPS:
            raise SingularityError(f"point {tuple(x)} lies on the singular set")
        return x

    def phi(self, x) -> float:
        return self.phi_derivatives(self.check_point(x))[0]

    def kappa(self) -> float:
        if self.p is None:
            raise InvalidParameterError("this factor has no associated p")
        return kappa(self.n, self.p)

    def u_derivatives(self, x) -> tuple[float, np.ndarray, np.ndarray]:
        """``u = e^(phi/kappa)`` with gradient and Hessian."""
        x = self.check_point(x)
        f, g, h = self.phi_derivatives(x)
        k = self.kappa()
        u = math.exp(f / k)
        gu = u * g / k
        hu = u * (h / k + np.outer(g, g) / k**2)
        return u, gu, hu

    def u_field(self) -> ScalarField:
        return ScalarField(
            lambda x: self.u_derivatives(x)[0],
            lambda x: self.u_derivatives(x)[1],
            lambda x: self.u_derivatives(x)[2],
        )

    def segment_singular_param(self, x0, theta, t0, t1) -> float | None:
        """A parameter in ``(t0, t1]`` where the ray meets the singular set, if any."""
        ts = np.linspace(t0, t1, 2049)[1:]
        d = np.asarray([self.singular_distance(np.asarray(x0) + t * np.asarray(theta)) for t in ts])
        j = int(np.argmin(d))
        return float(ts[j]) if d[j] <= _SINGULAR_EPS else None


def _log_point(x, c, coef):
    v = x - c
    r2 = float(v @ v)
    g = coef * v / r2
    h = coef * (np.eye(len(x)) / r2 - 2.0 * np.outer(v, v) / r2**2)
    return coef * 0.5 * math.log(r2), g, h


def _log_plane(x, k_minus_1, coef):
    """``coef log dist(x, R^(k-1))`` with the plane spanned by the first axes."""
    n = len(x)
    proj = np.zeros(n)
    proj[k_minus_1:] = 1.0
    y = x * proj
    d2 = float(y @ y)
    g = coef * y / d2
    h = coef * (np.diag(proj) / d2 - 2.0 * np.outer(y, y) / d2**2)
    return coef * 0.5 * math.log(d2), g, h


@dataclass
class RadialPower(ConformalFactor):
    """``u(x) = |x - c|^alpha`` with ``gbar = u^(4(p-1)/(n-p)) g``."""

    n: int
    alpha: float
    p: float
    center: tuple[float, ...] | None = None

    def __post_init__(self):
        kappa(self.n, self.p)
        self.c = np.zeros(self.n) if self.center is None else np.asarray(self.center, dtype=float)

    def phi_derivatives(self, x):
        return _log_point(x, self.c, kappa(self.n, self.p) * self.alpha)

    def singular_distance(self, x):
        return float(np.linalg.norm(np.asarray(x) - self.c)) if self.alpha != 0 else math.inf

    def segment_singular_param(self, x0, theta, t0, t1):
        if self.alpha == 0:
            return None
        w = np.asarray(x0) - self.c
        th = np.asarray(theta) / np.linalg.norm(theta)
        t = -float(w @ th)
        if t0 < t <= t1 and np.linalg.norm(w + t * th) <= _SINGULAR_EPS:
            return t
        return None


@dataclass
class PlaneDistPower(ConformalFactor):
    """``u(x) = dist(x, R^(k-1))^alpha``; the plane is spanned by the first ``k-1`` axes."""

    n: int
    k: int
    alpha: float
    p: float

    def __post_init__(self):
        kappa(self.n, self.p)
        if not 1 <= self.k <= self.n:
            raise InvalidParameterError("need 1 <= k <= n")

    def phi_derivatives(self, x):
        return _log_plane(x, self.k - 1, kappa(self.n, self.p) * self.alpha)

    def singular_distance(self, x):
        return float(np.linalg.norm(np.asarray(x)[self.k - 1 :])) if self.alpha != 0 else math.inf

    def segment_singular_param(self, x0, theta, t0, t1):
        if self.alpha == 0:
            return None
        a = np.asarray(x0, dtype=float)[self.k - 1 :]
        b = (np.asarray(theta, dtype=float) / np.linalg.norm(theta))[self.k - 1 :]
        bb = float(b @ b)
        t = -float(a @ b) / bb if bb > 0 else t0
        if t0 < t <= t1 and np.linalg.norm(a + t * b) <= _SINGULAR_EPS:
            return t
        return None


@dataclass
class LogForm(ConformalFactor):
    """``gbar = e^(2 phi) g`` with user-supplied ``phi`` and derivatives.

    ``derivs(x)`` returns ``(phi, grad, hess)``; ``singular(x)`` the distance
    to the singular set. ``p`` is optional and only used by the ``u``-form.
    """

    n: int
    derivs: object
    singular: object = None
    p: float | None = None
    label: str = "custom"

    def phi_derivatives(self, x):
        f, g, h = self.derivs(x)
        return float(f), np.asarray(g, dtype=float), np.asarray(h, dtype=float)

    def singular_distance(self, x):
        return math.inf if self.singular is None else float(self.singular(x))

    @classmethod
    def point_log(cls, n: int, coef: float, center=None, p: float | None = None) -> "LogForm":
        """``phi = coef log |x - c|`` (``coef = -1`` is the cylinder metric)."""
        c = np.zeros(n) if center is None else np.asarray(center, dtype=float)
        return cls(n, lambda x: _log_point(x, c, coef), lambda x: float(np.linalg.norm(x - c)), p, f"point_log({coef})")

    @classmethod
    def plane_log(cls, n: int, k: int, coef: float = -1.0, p: float | None = None) -> "LogForm":
        """``phi = coef log dist(x, R^(k-1))``; ``coef = -1`` gives ``H^k x S^(n-k)``."""
        return cls(
            n,
            lambda x: _log_plane(x, k - 1, coef),
            lambda x: float(np.linalg.norm(np.asarray(x)[k - 1 :])),
            p,
            f"plane_log(k={k}, {coef})",
        )

    @classmethod
    def linear(cls, n: int, a, b: float = 0.0, p: float | None = None) -> "LogForm":
        a = np.asarray(a, dtype=float)
        return cls(n, lambda x: (float(a @ x) + b, a.copy(), np.zeros((n, n))), None, p, "linear")

    @classmethod
    def flat(cls, n: int, p: float | None = None) -> "LogForm":
        return cls.linear(n, np.zeros(n), 0.0, p)


def _d1_weights(k: int, m: int):
    if 0 < k < m - 1:
        return [k - 1, k, k + 1], np.array([-0.5, 0.0, 0.5])
    if k == 0:
        return [0, 1, 2], np.array([-1.5, 2.0, -0.5])
    return [m - 3, m - 2, m - 1], np.array([0.5, -2.0, 1.5])


def _d2_weights(k: int, m: int):
    if 0 < k < m - 1:
        return [k - 1, k, k + 1], np.array([1.0, -2.0, 1.0])
    if k == 0:
        return [0, 1, 2, 3], np.array([2.0, -5.0, 4.0, -1.0])
    return [m - 4, m - 3, m - 2, m - 1], np.array([-1.0, 4.0, -5.0, 2.0])


@dataclass
class GridField(ConformalFactor):
    """Sampled ``u > 0`` on a Cartesian grid, with ``gbar = u^(4(p-1)/(n-p)) g``.

    Derivatives at a node use second-order central differences, switching to
    second-order one-sided stencils on the outermost layer. Points are
    snapped to the nearest node.
    """

    grid: Grid
    values: np.ndarray = field(repr=False)
    p: float = 2.0

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float).reshape(self.grid.shape)
        if np.any(self.values <= 0) or not np.all(np.isfinite(self.values)):
            raise InvalidParameterError("grid field values must be positive and finite")
        self.n = self.grid.dim
        kappa(self.n, self.p)

    @classmethod
    def sample(cls, grid: Grid, u, p: float) -> "GridField":
        """Sample a callable ``u`` (point -> value) at every node."""
        vals = np.asarray([u(x) for x in grid.points()])
        return cls(grid, vals.reshape(grid.shape), p)

    def node_index(self, x) -> tuple[int, ...]:
        idx = self.grid.nearest_index(np.asarray(x, dtype=float))[0]
        if np.any(idx < 0) or np.any(idx >= np.asarray(self.grid.shape)):
            raise SingularityError("point lies outside the sampled grid")
        return tuple(int(i) for i in idx)

    def node_point(self, idx) -> np.ndarray:
        return np.asarray(self.grid.origin) + (np.asarray(idx) + 0.5) * self.grid.h

    def boundary_layer(self, x) -> bool:
        idx = self.node_index(x)
        return any(i == 0 or i == m - 1 for i, m in zip(idx, self.grid.shape))

    def _u_derivs_at(self, idx):
        h = self.grid.h
        u = self.values
        n = self.n
        shape = self.grid.shape
        g = np.zeros(n)
        hs = np.zeros((n, n))
        for a in range(n):
            pts, w = _d1_weights(idx[a], shape[a])
            line = [u[idx[:a] + (j,) + idx[a + 1 :]] for j in pts]
            g[a] = float(np.dot(w, line)) / h
            pts2, w2 = _d2_weights(idx[a], shape[a])
            line2 = [u[idx[:a] + (j,) + idx[a + 1 :]] for j in pts2]
            hs[a, a] = float(np.dot(w2, line2)) / h**2
            for b in range(a + 1, n):
                pb, wb = _d1_weights(idx[b], shape[b])
                acc = 0.0
                for ja, wa_ in zip(pts, w):
                    for jb, wb_ in zip(pb, wb):
                        k = list(idx)
                        k[a], k[b] = ja, jb
                        acc += wa_ * wb_ * u[tuple(k)]
                hs[a, b] = hs[b, a] = acc / h**2
        return float(u[idx]), g, hs

    def u_derivatives(self, x):
        return self._u_derivs_at(self.node_index(x))

    def phi_derivatives(self, x):
        u, g, h = self._u_derivs_at(self.node_index(x))
        k = kappa(self.n, self.p)
        return k * math.log(u), k * g / u, k * (h / u - np.outer(g, g) / u**2)

    def check_point(self, x):
        x = np.asarray(x, dtype=float).ravel()
        self.node_index(x)
        return x

    # Storage: npz archive or CSV with a one-line JSON header.

    def header(self) -> dict:
        return {"n": self.n, "origin": list(self.grid.origin), "h": self.grid.h, "extents": list(self.grid.extents), "p": self.p}

    def save(self, path: str) -> None:
        if str(path).endswith(".csv"):
            with open(path, "w") as fh:
                fh.write("# " + json.dumps(self.header()) + "\n")
                for v in self.values.ravel():
                    fh.write(repr(float(v)) + "\n")
        else:
            np.savez(path, values=self.values, **{k: np.asarray(v) for k, v in self.header().items()})

    @classmethod
    def load(cls, path: str) -> "GridField":
        if str(path).endswith(".csv"):
            with open(path) as fh:
                first = fh.readline()
                if not first.startswith("#"):
                    raise InvalidParameterError("CSV grid dump needs a '# {json}' header line")
                hdr = json.loads(first[1:])
                vals = np.loadtxt(fh, dtype=float, ndmin=1)
        else:
            with np.load(path) as z:
                hdr = {k: z[k].tolist() for k in ("n", "origin", "h", "extents", "p")}
                vals = z["values"]
        grid = Grid(tuple(hdr["origin"]), float(hdr["h"]), tuple(int(e) for e in hdr["extents"]))
        if grid.dim != int(hdr["n"]):
            raise InvalidParameterError("header dimension disagrees with the grid")
        return cls(grid, np.asarray(vals).reshape(grid.shape), float(hdr["p"]))


# Curvature


@dataclass(frozen=True)
class CurvatureReport:
    point: tuple[float, ...]
    ricci_spectrum: EigenSpectrum
    schouten_spectrum: EigenSpectrum
    ap_spectrum: EigenSpectrum
    scalar: float
    J: float
    p: float

    def to_dict(self) -> dict:
        return {
            "point": list(self.point),
            "ricci_spectrum": list(self.ricci_spectrum.values),
            "schouten_spectrum": list(self.schouten_spectrum.values),
            "ap_spectrum": list(self.ap_spectrum.values),
            "scalar": self.scalar,
            "J": self.J,
            "p": self.p,
        }


def ricci_coordinates(n: int, grad: np.ndarray, hess: np.ndarray) -> np.ndarray:
    """Coordinate components ``Rbar_ij`` of ``e^(2 phi) g`` on a flat background."""
    lap = float(np.trace(hess))
    g2 = float(grad @ grad)
    eye = np.eye(n)
    return -lap * eye - (n - 2) * hess + (n - 2) * np.outer(grad, grad) - (n - 2) * g2 * eye


def _schouten_covariant(n: int, ric: np.ndarray, phi: float):
    """Covariant Schouten components of ``gbar`` and ``J``."""
    scal = math.exp(-2.0 * phi) * float(np.trace(ric))
    J = scal / (2.0 * (n - 1))
    gbar = math.exp(2.0 * phi) * np.eye(n)
    A = (ric - scal / (2.0 * (n - 1)) * gbar) / (n - 2)
    return A, J, scal, gbar


def curvature_at(f: ConformalFactor, x, p_for_AP: float) -> CurvatureReport:
    """Ricci, Schouten and ``A^(p)`` spectra of ``gbar`` at ``x``."""
    n = f.n
    if n < 3:
        raise InvalidParameterError("curvature spectra need n >= 3")
    if not p_for_AP > 1:
        raise InvalidParameterError("p must exceed 1")
    x = f.check_point(x)
    phi, g, h = f.phi_derivatives(x)
    ric = ricci_coordinates(n, g, h)
    A, J, scal, gbar = _schouten_covariant(n, ric, phi)
    w = math.exp(-2.0 * phi)
    ric_eig = np.linalg.eigvalsh(0.5 * (ric + ric.T) * w)
    a_eig = np.linalg.eigvalsh(0.5 * (A + A.T) * w)
    ap_eig = (p_for_AP - 2.0) * a_eig + J
    rep = CurvatureReport(
        tuple(float(v) for v in x),
        EigenSpectrum.from_values(ric_eig),
        EigenSpectrum.from_values(a_eig),
        EigenSpectrum.from_values(ap_eig),
        float(scal),
        float(J),
        float(p_for_AP),
    )
    scale = max(1.0, abs(scal))
    if abs(rep.scalar - 2.0 * (n - 1) * rep.J) > 1e-9 * scale or abs(rep.schouten_spectrum.trace - J) > 1e-9 * max(1.0, abs(J)) * n:
        raise ArithmeticError("curvature trace identities failed")
    return rep


# p-Laplacians


def infinity_laplacian(grad: np.ndarray, hess: np.ndarray) -> float:
    """``u_ij u_i u_j``."""
    return float(grad @ hess @ grad)


def p_laplacian(f, x, p: float) -> float:
    """``div(|grad f|^(p-2) grad f)`` from the gradient and Hessian of ``f`` at ``x``.

    ``f`` is a ``ScalarField`` or any object with ``grad`` and ``hess``
    callables. Equals ``|grad f|^(p-2) (Lap f + (p-2) Lap_inf f / |grad f|^2)``.
    """
    x = np.asarray(x, dtype=float)
    g = np.asarray(f.grad(x), dtype=float)
    h = np.asarray(f.hess(x), dtype=float)
    return _p_lap_from(g, h, p)


def _p_lap_from(g: np.ndarray, h: np.ndarray, p: float) -> float:
    g2 = float(g @ g)
    lap = float(np.trace(h))
    if g2 == 0.0:
        if p < 2:
            raise DegenerateGradientError("gradient vanishes and p < 2")
        return lap if p == 2 else 0.0
    return g2 ** ((p - 2.0) / 2.0) * (lap + (p - 2.0) * infinity_laplacian(g, h) / g2)


def radial_p_laplacian(fp: float, fpp: float, r: float, n: int, p: float) -> float:
    """Radial shortcut ``|f'|^(p-2) ((p-1) f'' + (n-1) f' / r)``."""
    if fp == 0.0:
        if p < 2:
            raise DegenerateGradientError("f' vanishes and p < 2")
        return fpp * (n if p == 2 else 0.0)
    return abs(fp) ** (p - 2.0) * ((p - 1.0) * fpp + (n - 1.0) * fp / r)


def p_laplace_residual(f: ConformalFactor, x) -> float:
    """LHS minus RHS of the conformal p-Laplace equation at ``x``.

    With ``c = (n-p)/(2(p-1))`` and ``q`` the critical exponent,
    ``-Delta_p u + c S(u) u - c Sbar(u) u^q`` where ``S`` is built from the
    flat ``A^(p)`` (zero here) and ``Sbar = |grad u|_gbar^(p-2) A^(p)[gbar](grad u, grad u) / |grad u|_gbar^2``
    uses the ``gbar``-gradient and norm.
    """
    n, p = f.n, f.p
    if p is None:
        raise InvalidParameterError("the residual needs the factor's p")
    x = f.check_point(x)
    u, gu, hu = f.u_derivatives(x)
    g2 = float(gu @ gu)
    if g2 == 0.0:
        raise DegenerateGradientError("grad u vanishes")
    phi, gphi, hphi = f.phi_derivatives(x)
    c = (n - p) / (2.0 * (p - 1.0))
    q = critical_exponent(n, p)
    ric = ricci_coordinates(n, gphi, hphi)
    A, J, _, gbar = _schouten_covariant(n, ric, phi)
    Ap = (p - 2.0) * A + J * gbar
    # gbar-gradient of u has components e^(-2 phi) u_i.
    w = math.exp(-2.0 * phi)
    grad_bar = w * gu
    norm2_bar = w * g2
    quad = float(grad_bar @ Ap @ grad_bar)
    s_bar = norm2_bar ** ((p - 2.0) / 2.0) * quad / norm2_bar
    s_flat = 0.0
    lhs = -_p_lap_from(gu, hu, p) + c * s_flat * u
    rhs = c * s_bar * u**q
    return float(lhs - rhs)


# Limits p -> n and p -> infinity


@dataclass
class LimitReport:
    n_limit: list[dict]
    n_target: float
    n_rate: float
    inf_limit: list[dict]

    def to_dict(self) -> dict:
        return {"n_limit": self.n_limit, "n_target": self.n_target, "n_rate": self.n_rate, "inf_limit": self.inf_limit}


def _u_p(g: np.ndarray, h: np.ndarray, a: float):
    """Gradient and Hessian of ``u = e^(a phi)`` divided by ``u``."""
    return a * g, a * (h + a * np.outer(g, g))


def limit_consistency(f: LogForm, x, p_to_n=(), p_to_inf=()) -> LimitReport:
    """Scaled p-Laplacians of ``u_p = e^((n-p) phi / (2(p-1)))`` along two limits.

    As ``p -> n``: ``(2(p-1)/(n-p))^(p-1) Delta_p u_p`` against ``Delta_n phi``;
    the observed rate is the log-log slope of the error against ``n - p``.
    As ``p -> inf``: ``(p-2)^(-1) |grad u|^(4-p) Delta_p u`` against
    ``Delta_inf u``, reported as a relative error per ``p``.
    """
    n = f.n
    x = f.check_point(x)
    phi, g, h = f.phi_derivatives(x)
    target = _p_lap_from(g, h, float(n))
    rows = []
    for p in p_to_n:
        a = (n - p) / (2.0 * (p - 1.0))
        u = math.exp(a * phi)
        gu_over, hu_over = _u_p(g, h, a)
        lap = _p_lap_from(u * gu_over, u * hu_over, p)
        scaled = (1.0 / a) ** (p - 1.0) * lap
        rows.append({"p": float(p), "scaled": scaled, "error": abs(scaled - target)})
    rate = math.nan
    errs = [(n - r["p"], r["error"]) for r in rows if r["error"] > 0]
    if len(errs) >= 2:
        d, e = np.log(np.asarray(errs)).T
        rate = float(np.polyfit(d, e, 1)[0])
    inf_rows = []
    for p in p_to_inf:
        a = (n - p) / (2.0 * (p - 1.0))
        u = math.exp(a * phi)
        gu_over, hu_over = _u_p(g, h, a)
        gu, hu = u * gu_over, u * hu_over
        g2 = float(gu @ gu)
        lap = _p_lap_from(gu, hu, p)
        scaled = lap / ((p - 2.0) * g2 ** ((p - 4.0) / 2.0))
        dinf = infinity_laplacian(gu, hu)
        inf_rows.append(
            {"p": float(p), "scaled": scaled, "inf_laplacian": dinf, "relative_error": abs(scaled - dinf) / abs(dinf)}
        )
    return LimitReport(rows, target, rate, inf_rows)


# Length of rays in the conformal metric


@dataclass
class RayLength:
    length: float
    divergent: bool
    local_exponent: float
    samples: list[tuple[float, float]]


def conformal_ray_length(f: ConformalFactor, ray, probe_levels: int = 24) -> RayLength:
    """``gbar``-length of ``{x0 + t theta : t0 < t <= t1}``.

    The integrand is the metric density ``e^phi`` (``u^(2(p-1)/(n-p))`` in
    the ``u``-form). Near ``t0`` the local power ``s`` of the integrand in
    ``t - t0`` is measured from geometrically shrinking probes; ``s <= -1``
    flags divergence, otherwise the tail below the smallest probe is
    integrated in closed form from the fitted power and the rest by
    adaptive quadrature in ``log(t - t0)``.
    """
    x0, theta, t0, t1 = ray
    x0 = np.asarray(x0, dtype=float)
    theta = np.asarray(theta, dtype=float)
    theta = theta / np.linalg.norm(theta)
    if not t1 > t0:
        raise InvalidParameterError("need t1 > t0")
    hit = f.segment_singular_param(x0, theta, t0, t1)
    if hit is not None and hit > t0 + 1e-12:
        raise SingularityError(f"the ray meets the singular set at t = {hit}")

    def density(t):
        return math.exp(f.phi_derivatives(f.check_point(x0 + t * theta))[0])

    span = t1 - t0
    deltas = span * 2.0 ** -np.arange(4, 4 + probe_levels, dtype=float)
    vals = []
    for d in deltas:
        try:
            vals.append(density(t0 + d))
        except SingularityError:
            vals.append(math.inf)
    vals = np.asarray(vals)
    samples = [(float(t0 + d), float(v)) for d, v in zip(deltas, vals)]
    tail = vals[-6:]
    s = float(np.polyfit(np.log(deltas[-6:]), np.log(tail), 1)[0]) if np.all(np.isfinite(tail)) else -math.inf
    if s <= -1.0 + 1e-6:
        return RayLength(math.inf, True, s, samples)
    d_min = float(deltas[-1])
    c = float(vals[-1]) / d_min**s
    near = c * d_min ** (s + 1.0) / (s + 1.0)
    # Substituting t = t0 + e^v keeps the quadrature smooth near the endpoint.
    far, _ = integrate.quad(
        lambda v: density(t0 + math.exp(v)) * math.exp(v), math.log(d_min), math.log(span), limit=400, epsabs=0.0, epsrel=1e-11
    )
    return RayLength(float(near + far), False, s, samples)

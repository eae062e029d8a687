"""Eigenvalue-level arithmetic for Schouten spectra and their positivity cones.

On a locally conformally flat background the Schouten tensor ``A`` is
diagonal in an orthonormal frame, so every curvature condition used here
reduces to arithmetic on the ordered tuple of eigenvalues
``lambda_1 <= ... <= lambda_n``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Literal

import numpy as np

__all__ = [
    "EigenSpectrum",
    "ConeSpec",
    "InvalidParameterError",
    "ap_spectrum",
    "ap_functional",
    "bochner_form_eigenvalue",
    "bochner_brute_force",
    "cone_membership",
    "cone_functional",
    "model_spectrum",
    "sample_spectra",
    "batch_ap_functional",
    "batch_bochner",
]


class InvalidParameterError(ValueError):
    """A parameter lies outside the range an operation is defined on."""


@dataclass(frozen=True)
class EigenSpectrum:
    """Sorted Schouten eigenvalues of an ``n``-dimensional metric at a point."""

    values: tuple[float, ...]

    def __post_init__(self):
        vals = tuple(float(v) for v in self.values)
        if len(vals) < 3:
            raise InvalidParameterError(f"dimension must be >= 3, got {len(vals)}")
        if any(b < a for a, b in zip(vals, vals[1:])):
            raise InvalidParameterError("spectrum values must be sorted ascending")
        object.__setattr__(self, "values", vals)

    @classmethod
    def from_values(cls, values) -> "EigenSpectrum":
        """Build a spectrum from unsorted eigenvalues."""
        return cls(tuple(sorted(float(v) for v in values)))

    @property
    def n(self) -> int:
        return len(self.values)

    @property
    def trace(self) -> float:
        """``J = tr A``."""
        return float(np.sum(self.values))

    @property
    def scalar_curvature(self) -> float:
        return 2.0 * (self.n - 1) * self.trace

    def array(self) -> np.ndarray:
        return np.asarray(self.values)

    def shifted(self, c: float) -> "EigenSpectrum":
        return EigenSpectrum(tuple(v + c for v in self.values))


@dataclass(frozen=True)
class ConeSpec:
    """Either the ``A^(p)`` cone (``kind="AP"``) or the Bochner cone ``R^(r)``."""

    kind: Literal["AP", "RR"]
    param: float

    def __post_init__(self):
        if self.kind == "AP":
            if not self.param > 1:
                raise InvalidParameterError(f"AP cone needs p > 1, got {self.param}")
        elif self.kind == "RR":
            if int(self.param) != self.param or self.param < 1:
                raise InvalidParameterError(f"RR cone needs integer r >= 1, got {self.param}")
        else:
            raise InvalidParameterError(f"unknown cone kind {self.kind!r}")

    @classmethod
    def ap(cls, p: float) -> "ConeSpec":
        return cls("AP", float(p))

    @classmethod
    def rr(cls, r: int) -> "ConeSpec":
        return cls("RR", int(r))


def _check_p(p: float) -> None:
    if not p > 1:
        raise InvalidParameterError(f"p must be > 1, got {p}")


def ap_spectrum(s: EigenSpectrum, p: float) -> EigenSpectrum:
    """Eigenvalues of ``A^(p) = (p-2) A + J g``."""
    _check_p(p)
    lam = s.array()
    return EigenSpectrum.from_values((p - 2.0) * lam + lam.sum())


def ap_functional(s: EigenSpectrum, p: float) -> float:
    """``(p-2) min(lambda) + sum(lambda)``; nonnegative exactly on the ``A^(p)`` cone.

    For ``p >= 2`` this is the smallest eigenvalue of ``A^(p)``.
    """
    _check_p(p)
    lam = s.array()
    return float((p - 2.0) * lam[0] + lam.sum())


def bochner_brute_force(s: EigenSpectrum, r: int) -> float:
    """Minimum of ``(n-r) sum_T + r sum_{T^c}`` over every ``r``-subset ``T``."""
    n = s.n
    if not 1 <= r <= n:
        raise InvalidParameterError(f"r must lie in 1..{n}, got {r}")
    lam = s.array()
    total = lam.sum()
    best = np.inf
    for subset in itertools.combinations(range(n), r):
        st = lam[list(subset)].sum()
        best = min(best, (n - r) * st + r * (total - st))
    return float(best)


def bochner_form_eigenvalue(s: EigenSpectrum, r: int) -> float:
    """Smallest eigenvalue of the Bochner curvature term on ``r``-forms.

    For ``r <= n/2`` the weight ``n - r`` on the chosen indices dominates, so
    the minimum is attained on the ``r`` smallest eigenvalues. Beyond ``n/2``
    the subset minimum is enumerated. ``r = n`` gives ``(n - r) sum = 0``.
    """
    n = s.n
    if not 1 <= r <= n:
        raise InvalidParameterError(f"r must lie in 1..{n}, got {r}")
    if r == n:
        return 0.0
    if 2 * r <= n:
        lam = s.array()
        return float((n - r) * lam[:r].sum() + r * lam[r:].sum())
    return bochner_brute_force(s, r)


def cone_functional(s: EigenSpectrum, cone: ConeSpec) -> float:
    if cone.kind == "AP":
        return ap_functional(s, cone.param)
    return bochner_form_eigenvalue(s, int(cone.param))


def cone_membership(s: EigenSpectrum, cone: ConeSpec, tol: float = 0.0) -> bool:
    """Closed-cone test ``functional >= -tol``."""
    return cone_functional(s, cone) >= -tol


def model_spectrum(n: int, k: int) -> EigenSpectrum:
    """Schouten spectrum of the product ``H^k x S^(n-k)`` of unit space forms."""
    if n < 3:
        raise InvalidParameterError(f"n must be >= 3, got {n}")
    if not (1 <= k and 2 * k <= n):
        raise InvalidParameterError(f"k must satisfy 1 <= k <= n/2, got k={k}, n={n}")
    return EigenSpectrum((-0.5,) * k + (0.5,) * (n - k))


# Vectorized variants for sampling studies; rows are sorted ascending.

def batch_ap_functional(lam: np.ndarray, p: float) -> np.ndarray:
    return (p - 2.0) * lam[:, 0] + lam.sum(axis=1)


def batch_bochner(lam: np.ndarray, r: int) -> np.ndarray:
    """Row-wise Bochner eigenvalue; exact enumeration for ``r > n/2``."""
    n = lam.shape[1]
    if not 1 <= r <= n:
        raise InvalidParameterError(f"r must lie in 1..{n}, got {r}")
    if r == n:
        return np.zeros(lam.shape[0])
    if 2 * r <= n:
        head = lam[:, :r].sum(axis=1)
        return (n - r) * head + r * (lam.sum(axis=1) - head)
    return batch_bochner_brute_force(lam, r)


def batch_bochner_brute_force(lam: np.ndarray, r: int) -> np.ndarray:
    n = lam.shape[1]
    total = lam.sum(axis=1)
    best = np.full(lam.shape[0], np.inf)
    for subset in itertools.combinations(range(n), r):
        st = lam[:, list(subset)].sum(axis=1)
        best = np.minimum(best, (n - r) * st + r * (total - st))
    return best


def sample_spectra(
    rng: np.random.Generator,
    n: int,
    count: int,
    boundary_cone: ConeSpec | None = None,
    band: float = 0.1,
) -> np.ndarray:
    """Random sorted spectra, shape ``(count, n)``.

    Without ``boundary_cone`` the entries are i.i.d. uniform on ``[-1, 1]``.
    With it, each sample is shifted by a multiple of ``(1, ..., 1)`` so its
    cone functional lands uniformly in ``[-band, band]``.
    """
    lam = np.sort(rng.uniform(-1.0, 1.0, size=(count, n)), axis=1)
    if boundary_cone is None:
        return lam
    target = rng.uniform(-band, band, size=count)
    if boundary_cone.kind == "AP":
        p = boundary_cone.param
        f = batch_ap_functional(lam, p)
        slope = p - 2.0 + n
    else:
        r = int(boundary_cone.param)
        f = batch_bochner(lam, r)
        slope = 2.0 * r * (n - r) if r < n else 0.0
    if slope == 0.0:
        return lam
    return lam + ((target - f) / slope)[:, None]

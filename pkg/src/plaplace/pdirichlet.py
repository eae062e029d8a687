"""Discrete p-Dirichlet energy on tensor-product meshes and its minimization.

A mesh is a tensor grid of nodes with per-axis coordinates. Every node owns
the forward cell ``[x_i, x_{i+1}]`` along each axis; the gradient on that cell
is the vector of forward differences and the cell carries a quadrature weight
(``h^n`` on a uniform Cartesian grid, ``omega_{n-2} * int s^(n-2) ds dz`` on
a meridian half-plane for axisymmetric problems). The last node along an axis
has no forward cell; those nodes must be Dirichlet nodes.

The energy ``E(u) = sum_c w_c |D u|_c^p`` is convex for ``p > 1``. It is
minimized over the free nodes by a damped Newton method with Armijo
backtracking, so the energy sequence is monotone.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

log = logging.getLogger(__name__)

_TINY = 1e-300

__all__ = [
    "TensorMesh",
    "MinimizeOptions",
    "MinimizeResult",
    "minimize_energy",
    "dirichlet_energy",
    "sphere_area",
]


def sphere_area(k: int) -> float:
    """Area of the unit ``k``-sphere in ``R^(k+1)``."""
    return 2.0 * math.pi ** ((k + 1) / 2) / math.gamma((k + 1) / 2)


def _forward_1d(x: np.ndarray) -> sp.csr_matrix:
    m = len(x)
    inv = 1.0 / np.diff(x)
    rows = np.concatenate([np.arange(m - 1), np.arange(m - 1)])
    cols = np.concatenate([np.arange(m - 1), np.arange(1, m)])
    vals = np.concatenate([-inv, inv])
    return sp.csr_matrix((vals, (rows, cols)), shape=(m, m))


@dataclass
class TensorMesh:
    """Nodes ``axes[0] x axes[1] x ...`` with forward-cell weights ``weights``."""

    axes: list[np.ndarray]
    weights: np.ndarray
    _ops: list[sp.csr_matrix] | None = field(default=None, repr=False)

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(len(a) for a in self.axes)

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))

    @classmethod
    def uniform(cls, axes: list[np.ndarray]) -> "TensorMesh":
        """Cartesian mesh; cell weight is the product of forward spacings."""
        w = np.ones(1)
        for a in axes:
            d = np.append(np.diff(a), 0.0)
            w = np.multiply.outer(w, d)
        return cls(list(axes), w.reshape(tuple(len(a) for a in axes)))

    @classmethod
    def meridian(cls, z: np.ndarray, s: np.ndarray, n: int) -> "TensorMesh":
        """Meridian half-plane of an ``O(n-1)``-symmetric problem in ``R^n``.

        ``z`` runs along the symmetry axis and ``s >= 0`` is the distance to it.
        The weight of a cell integrates ``omega_{n-2} s^(n-2)`` over it.
        """
        if s[0] < 0:
            raise ValueError("radial coordinate must be nonnegative")
        dz = np.append(np.diff(z), 0.0)
        radial = np.append(np.diff(s ** (n - 1)) / (n - 1), 0.0) * sphere_area(n - 2)
        return cls([np.asarray(z), np.asarray(s)], np.multiply.outer(dz, radial))

    def operators(self) -> list[sp.csr_matrix]:
        """Sparse forward-difference matrices, one per axis, on the flattened grid."""
        if self._ops is None:
            shape = self.shape
            ops = []
            for a, x in enumerate(self.axes):
                mats = [sp.identity(m, format="csr") for m in shape]
                mats[a] = _forward_1d(x)
                op = mats[0]
                for m in mats[1:]:
                    op = sp.kron(op, m, format="csr")
                ops.append(op.tocsr())
            self._ops = ops
        return self._ops


@dataclass
class MinimizeOptions:
    tol: float = 1e-10
    max_iter: int = 60
    armijo: float = 1e-4
    regularization: float = 1e-12
    linear_tol: float = 1e-7
    # Largest system solved directly; None picks by mesh dimension, since
    # sparse LU fill-in stays modest in 2-D but not in 3-D.
    direct_limit: int | None = None


@dataclass
class MinimizeResult:
    u: np.ndarray
    energy: float
    history: list[float]
    converged: bool
    iterations: int


class _Energy:
    """``sum_c w_c |D u|^p - p <load, u>`` restricted to the free nodes."""

    def __init__(
        self,
        mesh: TensorMesh,
        free: np.ndarray,
        p: float,
        reg: float,
        u_fixed: np.ndarray,
        load: np.ndarray | None = None,
    ):
        self.p = p
        self.reg = reg
        self.load = None if load is None else np.asarray(load, dtype=float).ravel()
        self.load_free = None if load is None else self.load[free]
        w = mesh.weights.ravel()
        ops = mesh.operators()
        # Cells whose stencil holds only Dirichlet nodes with equal data add nothing.
        is_free = np.zeros(w.size)
        is_free[free] = 1.0
        touches = sum(abs(op) @ is_free for op in ops) > 0
        jumps = sum(np.abs(op @ u_fixed) for op in ops) > 0
        act = np.flatnonzero((w > 0) & (touches | jumps))
        self.ops_full = [op[act] for op in ops]
        self.ops_free = [op[:, free] for op in self.ops_full]
        self.w = w[act]

    def grads(self, u: np.ndarray) -> list[np.ndarray]:
        return [op @ u for op in self.ops_full]

    def value(self, u: np.ndarray) -> float:
        g2 = sum(d * d for d in self.grads(u))
        e = float(np.dot(self.w, self._pow(g2, self.p / 2.0)))
        if self.load is not None:
            e -= self.p * float(np.dot(self.load, u))
        return e

    def _pow(self, g2: np.ndarray, e: float) -> np.ndarray:
        if self.p < 2.0:
            return (g2 + self.reg**2) ** e - self.reg ** (2 * e)
        return g2**e

    def gradient_and_hessian(self, u: np.ndarray):
        p = self.p
        d = self.grads(u)
        g2 = sum(x * x for x in d)
        reg2 = self.reg**2
        a = (g2 + reg2) ** ((p - 2.0) / 2.0)
        b = (p - 2.0) * (g2 + reg2) ** ((p - 4.0) / 2.0) if p != 2.0 else None
        scale = p * self.w
        grad = sum(op.T @ (scale * a * di) for op, di in zip(self.ops_free, d))
        if self.load_free is not None:
            grad = grad - p * self.load_free
        hess = None
        k = len(d)
        for i in range(k):
            for j in range(i, k):
                if b is None:
                    if i != j:
                        continue
                    coef = scale * a
                else:
                    coef = scale * b * d[i] * d[j]
                    if i == j:
                        coef = coef + scale * a
                term = self.ops_free[i].T @ sp.diags(coef) @ self.ops_free[j]
                if i != j:
                    term = term + term.T
                hess = term if hess is None else hess + term
        return grad, hess.tocsr()


class _LinearSolver:
    """Sparse direct solves for small systems, AMG-preconditioned CG otherwise.

    The AMG hierarchy built for the first Newton matrix is kept as the
    preconditioner for later ones; successive Hessians differ only by
    bounded cell-wise weights.
    """

    def __init__(self, opts: MinimizeOptions, ndim: int):
        self.opts = opts
        self.limit = opts.direct_limit
        if self.limit is None:
            self.limit = 600_000 if ndim <= 2 else 60_000
        self._precond = None

    def __call__(self, hess: sp.csr_matrix, rhs: np.ndarray, tol: float) -> np.ndarray:
        if hess.shape[0] <= self.limit:
            return spla.spsolve(hess.tocsc(), rhs)
        import pyamg

        if self._precond is None:
            ml = pyamg.smoothed_aggregation_solver(hess, symmetry="symmetric", max_coarse=2000)
            self._precond = ml.aspreconditioner(cycle="V")
        x, info = spla.cg(hess, rhs, rtol=tol, maxiter=1000, M=self._precond)
        if info != 0:
            log.debug("CG stopped with info=%d", info)
        return x


def minimize_energy(
    mesh: TensorMesh,
    fixed: np.ndarray,
    fixed_values: np.ndarray,
    p: float,
    u0: np.ndarray | None = None,
    opts: MinimizeOptions | None = None,
    load: np.ndarray | None = None,
) -> MinimizeResult:
    """Minimize the p-Dirichlet energy with Dirichlet data on ``fixed`` nodes.

    ``fixed`` is a boolean array over the grid shape; ``fixed_values`` gives
    the prescribed values there. With a nodal ``load`` the functional becomes
    ``E(u) - p <load, u>``, whose minimizer solves the discrete equation
    ``sum_c w_c |Du|^(p-2) Du . Dv = <load, v>`` for all admissible ``v``.
    Returns the full nodal field.
    """
    opts = opts or MinimizeOptions()
    shape = mesh.shape
    fixed = np.asarray(fixed, dtype=bool).ravel()
    free = np.flatnonzero(~fixed)
    u_fixed = np.where(fixed, np.asarray(fixed_values, dtype=float).ravel(), 0.0)
    u = u_fixed.copy()
    solve = _LinearSolver(opts, len(shape))
    if free.size == 0:
        e = _Energy(mesh, free, p, opts.regularization, u_fixed, load).value(u)
        return MinimizeResult(u.reshape(shape), e, [e], True, 0)

    if u0 is not None:
        u[free] = np.asarray(u0, dtype=float).ravel()[free]
    else:
        # Warm start from the exact minimizer of the quadratic (p = 2) energy.
        quad = _Energy(mesh, free, 2.0, 0.0, u_fixed, load)
        grad, hess = quad.gradient_and_hessian(u)
        u[free] -= solve(hess, grad, 1e-3 * opts.linear_tol)
        if p == 2.0:
            e = quad.value(u)
            return MinimizeResult(u.reshape(shape), e, [e], True, 1)

    en = _Energy(mesh, free, p, opts.regularization, u_fixed, load)
    energy = en.value(u)
    history = [energy]
    converged = False
    it = 0
    for it in range(1, opts.max_iter + 1):
        grad, hess = en.gradient_and_hessian(u)
        step = -solve(hess, grad, opts.linear_tol)
        slope = float(np.dot(grad, step))
        if not slope < 0:
            step, slope = -grad, -float(np.dot(grad, grad))
        if -slope <= 2.0 * opts.tol * max(abs(energy), _TINY):
            converged = True
            break
        alpha = 1.0
        trial = u.copy()
        while True:
            trial[free] = u[free] + alpha * step
            e_new = en.value(trial)
            if e_new <= energy + opts.armijo * alpha * slope:
                break
            alpha *= 0.5
            if alpha < 1e-10:
                break
        if not e_new < energy:
            # No representable decrease left along the Newton direction.
            converged = True
            break
        decrease = energy - e_new
        u = trial
        energy = e_new
        history.append(energy)
        if decrease <= opts.tol * max(abs(energy), _TINY):
            converged = True
            break
    if not converged:
        log.warning("p-Dirichlet minimization stopped after %d iterations", it)
    return MinimizeResult(u.reshape(shape), energy, history, converged, it)


def dirichlet_energy(mesh: TensorMesh, u: np.ndarray, p: float) -> float:
    """``sum_c w_c |D u|_c^p`` of a full nodal field."""
    u = np.asarray(u, dtype=float).ravel()
    g2 = sum((op @ u) ** 2 for op in mesh.operators())
    return float(np.dot(mesh.weights.ravel(), g2 ** (p / 2.0)))

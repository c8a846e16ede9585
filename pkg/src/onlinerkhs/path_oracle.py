"""Tikhonov regularization paths for independent streams, by quadrature.

The per-step operator ``T f = int f(x) K_x drho(x)`` is replaced by the
midpoint rule ``T f ~ sum_j w_j f(t_j) K_{t_j}`` with ``w_j = m(t_j) * dt``.
That is the exact operator of the discrete measure ``sum_j w_j delta_{t_j}``,
so ``(T + lam I)^{-1} T f*`` lies in ``span{K_{t_j}}`` and is found exactly by
solving ``(W G + lam I) c = W f*(t)``. Quantities such as norm bounds that
hold for every measure therefore hold for the discretized ones too.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Optional, Sequence, Tuple

import numpy as np
import scipy.linalg as la

from . import rkhs
from .errors import NumericalError, ParameterError, UnsupportedStreamError
from .kernel import Kernel
from .rkhs import KernelExpansion, TargetFunction
from .schedule import GainSchedule
from .stream import MarginalMeasure, StreamSpec, marginal_at

RESIDUAL_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class QuadratureGrid:
    lo: float
    hi: float
    n: int

    def __post_init__(self):
        if self.n < 2:
            raise ParameterError("quadrature grid needs n >= 2")
        if not self.lo < self.hi:
            raise ParameterError("empty quadrature interval")

    @property
    def width(self) -> float:
        return (self.hi - self.lo) / self.n

    @cached_property
    def nodes(self) -> np.ndarray:
        return self.lo + (np.arange(self.n) + 0.5) * self.width

    @classmethod
    def for_kernel(cls, kernel: Kernel, n: int) -> "QuadratureGrid":
        return cls(kernel.domain[0], kernel.domain[1], n)


def _sym_sqrt(mat: np.ndarray) -> np.ndarray:
    vals, vecs = la.eigh(mat)
    return (vecs * np.sqrt(np.clip(vals, 0.0, None))) @ vecs.T


@dataclass(frozen=True, eq=False)
class DiscretizedOperator:
    """Operator ``A = W G`` acting on coefficient vectors over the grid nodes."""

    kernel: Kernel
    grid: QuadratureGrid
    weights: np.ndarray
    gram: np.ndarray

    @property
    def matrix(self) -> np.ndarray:
        return self.weights[:, None] * self.gram

    def symmetrized(self) -> np.ndarray:
        """``W^{1/2} G W^{1/2}``, same spectrum as ``W G``."""
        sw = np.sqrt(self.weights)
        s = sw[:, None] * self.gram * sw[None, :]
        return 0.5 * (s + s.T)

    def eigenvalues(self) -> np.ndarray:
        """Descending."""
        return la.eigvalsh(self.symmetrized())[::-1]

    def apply(self, values: np.ndarray) -> np.ndarray:
        """Grid values of ``T f`` from grid values of ``f``."""
        return self.gram @ (self.weights * values)

    def __add__(self, other: "DiscretizedOperator") -> "DiscretizedOperator":
        if other.grid.n != self.grid.n or other.kernel != self.kernel:
            raise ParameterError("operators live on different grids")
        return DiscretizedOperator(self.kernel, self.grid, self.weights + other.weights, self.gram)

    def scaled(self, c: float) -> "DiscretizedOperator":
        return DiscretizedOperator(self.kernel, self.grid, c * self.weights, self.gram)


def _grid_gram(kernel: Kernel, grid: QuadratureGrid) -> np.ndarray:
    g = kernel.matrix(grid.nodes, grid.nodes)
    return 0.5 * (g + g.T)


def discretize(kernel: Kernel, mu: MarginalMeasure, n: int,
               gram: Optional[np.ndarray] = None) -> DiscretizedOperator:
    grid = QuadratureGrid.for_kernel(kernel, n)
    weights = mu.density_at(grid.nodes) * grid.width
    if gram is None:
        gram = _grid_gram(kernel, grid)
    return DiscretizedOperator(kernel, grid, weights, gram)


def _solve_coefficients(op: DiscretizedOperator, lam: float,
                        target_values: np.ndarray) -> np.ndarray:
    if not lam > 0:
        raise ParameterError("regularization must be positive")
    A = op.matrix + lam * np.eye(op.grid.n)
    rhs = op.weights * target_values
    try:
        c = la.solve(A, rhs)
    except la.LinAlgError as exc:
        raise NumericalError(f"singular path system: {exc}") from exc
    res = np.max(np.abs(A @ c - rhs)) if rhs.size else 0.0
    if not np.isfinite(res) or res > RESIDUAL_TOL:
        raise NumericalError(f"path system residual {res:.3e}")
    return c


def solve_path(op: DiscretizedOperator, lam: float, target: TargetFunction) -> KernelExpansion:
    """``(T + lam I)^{-1} T f*`` as an expansion over the grid nodes."""
    c = _solve_coefficients(op, lam, target(op.grid.nodes))
    return KernelExpansion(op.kernel, op.grid.nodes, c)


def _require_independent(spec: StreamSpec):
    if not spec.independent:
        raise UnsupportedStreamError("regularization paths need an independent stream")


def path_at(kernel: Kernel, spec: StreamSpec, schedule: GainSchedule, k: int,
            n: int = 64) -> KernelExpansion:
    _require_independent(spec)
    op = discretize(kernel, marginal_at(spec, k), n)
    return solve_path(op, schedule.reg(k), spec.target)


def window_operator(kernel: Kernel, spec: StreamSpec, k: int, h: int, n: int,
                    gram: Optional[np.ndarray] = None) -> DiscretizedOperator:
    """Sum of the discretized operators for steps ``k+1 .. k+h``."""
    _require_independent(spec)
    if h < 1:
        raise ParameterError("window length h must be >= 1")
    ops = [discretize(kernel, marginal_at(spec, i), n, gram) for i in range(k + 1, k + h + 1)]
    total = ops[0]
    for op in ops[1:]:
        total = total + op
    return total


def windowed_path(kernel: Kernel, spec: StreamSpec, schedule: GainSchedule, k: int,
                  h: int, n: int = 64) -> KernelExpansion:
    op = window_operator(kernel, spec, k, h, n)
    lam = float(np.sum(schedule.reg(np.arange(k + 1, k + h + 1))))
    return solve_path(op, lam, spec.target)


class PathCache:
    """Path coefficients on one shared grid, computed once per step index."""

    def __init__(self, kernel: Kernel, spec: StreamSpec, schedule: GainSchedule, n: int = 64):
        _require_independent(spec)
        self.kernel = kernel
        self.spec = spec
        self.schedule = schedule
        self.grid = QuadratureGrid.for_kernel(kernel, n)
        self.gram = _grid_gram(kernel, self.grid)
        self.target_values = spec.target(self.grid.nodes)
        self._cache = {}

    def operator(self, k: int) -> DiscretizedOperator:
        return discretize(self.kernel, marginal_at(self.spec, k), self.grid.n, self.gram)

    def coefficients(self, k: int) -> np.ndarray:
        c = self._cache.get(k)
        if c is None:
            c = _solve_coefficients(self.operator(k), self.schedule.reg(k), self.target_values)
            self._cache[k] = c
        return c

    def expansion(self, k: int) -> KernelExpansion:
        return KernelExpansion(self.kernel, self.grid.nodes, self.coefficients(k))

    def norm(self, k: int) -> float:
        c = self.coefficients(k)
        return float(np.sqrt(max(c @ self.gram @ c, 0.0)))

    def approx_error(self, k: int) -> float:
        return rkhs.distance(self.expansion(k), self.spec.target.expansion)

    def drift(self, k: int) -> float:
        d = self.coefficients(k + 1) - self.coefficients(k)
        return float(np.sqrt(max(d @ self.gram @ d, 0.0)))


def drift(kernel: Kernel, spec: StreamSpec, schedule: GainSchedule, k: int, n: int = 64) -> float:
    """``||f_lam(k+1) - f_lam(k)||_K``."""
    return PathCache(kernel, spec, schedule, n).drift(k)


def operator_difference_norm(gram: np.ndarray, dw: np.ndarray) -> float:
    """RKHS operator norm of ``sum_j dw_j K_{t_j} (x) K_{t_j}``.

    Largest absolute eigenvalue of ``G^{1/2} diag(dw) G^{1/2}``.
    """
    root = _sym_sqrt(gram)
    m = root @ (dw[:, None] * root)
    vals = la.eigvalsh(0.5 * (m + m.T))
    return float(np.max(np.abs(vals)))


def drift_bound_check(kernel: Kernel, spec: StreamSpec, schedule: GainSchedule, k: int,
                      n: int = 64) -> Tuple[float, float]:
    """``(lhs, rhs)`` of the path-drift bound.

    ``lhs = ||f_lam(k+1) - f_lam(k)||`` and
    ``rhs = (||T_{k+1} - T_k|| / lam_k + (lam_k - lam_{k+1}) / lam_k) ||f_lam(k) - f*||``.
    """
    cache = PathCache(kernel, spec, schedule, n)
    lhs = cache.drift(k)
    lam_k = schedule.reg(k)
    lam_k1 = schedule.reg(k + 1)
    dw = cache.operator(k + 1).weights - cache.operator(k).weights
    op_norm = operator_difference_norm(cache.gram, dw)
    rhs = (op_norm / lam_k + (lam_k - lam_k1) / lam_k) * cache.approx_error(k)
    return lhs, rhs


@dataclass(frozen=True)
class PathRow:
    k: int
    lambda_k: float
    path_norm: float
    approx_error: float
    drift: float
    drift_over_ak_lk: float


def path_table(kernel: Kernel, spec: StreamSpec, schedule: GainSchedule,
               ks: Sequence[int], n: int = 64) -> list:
    cache = PathCache(kernel, spec, schedule, n)
    rows = []
    for k in ks:
        d = cache.drift(k)
        rows.append(PathRow(int(k), schedule.reg(k), cache.norm(k), cache.approx_error(k),
                            d, d / float(schedule.product(k))))
    return rows

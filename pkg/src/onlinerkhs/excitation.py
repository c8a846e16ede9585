"""Persistence-of-excitation evidence for independent streams.

Two routes: ordered eigenvalues of the windowed operator
``sum_{i=k+1}^{k+h} E[K_{x_i} (x) K_{x_i}]`` on a quadrature grid, and the
measure-domination sufficient condition ``(1/h) sum rho^{(i)} >= gamma``
checked exactly on piecewise densities. Both only cover a finite range of
``k`` and the top ``j_max`` modes.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Optional, Tuple

import numpy as np

from .errors import ParameterError
from .kernel import Kernel
from .path_oracle import DiscretizedOperator, _grid_gram, QuadratureGrid, window_operator
from .stream import StreamSpec, average_measure, dominates, marginal_at

FLOOR_TOLERANCE = 1e-12


def windowed_operator(kernel: Kernel, spec: StreamSpec, k: int, h: int,
                      n: int = 64) -> DiscretizedOperator:
    return window_operator(kernel, spec, k, h, n)


@dataclass(frozen=True)
class PEReport:
    window: int
    j_max: int
    k_range: Tuple[int, int]
    per_j_infimum: np.ndarray
    argmin_k: np.ndarray
    floor_tolerance: float
    measure_domination: Optional[bool] = None
    gamma_scale: Optional[float] = None

    @property
    def excited(self) -> bool:
        """All tested modes stay above the floor over the tested range."""
        return bool(np.all(self.per_j_infimum > self.floor_tolerance))

    def failing_modes(self) -> np.ndarray:
        """1-based indices ``j`` whose infimum is at or below the floor."""
        return np.flatnonzero(self.per_j_infimum <= self.floor_tolerance) + 1


def window_spectra(kernel: Kernel, spec: StreamSpec, h: int, j_max: int,
                   ks: Iterable[int], n: int = 64):
    """Yield ``(k, top j_max eigenvalues)`` of each windowed operator."""
    if j_max > n:
        raise ParameterError(f"j_max={j_max} exceeds grid size n={n}")
    if j_max < 1:
        raise ParameterError("j_max must be >= 1")
    gram = _grid_gram(kernel, QuadratureGrid.for_kernel(kernel, n))
    for k in ks:
        op = window_operator(kernel, spec, k, h, n, gram)
        yield int(k), op.eigenvalues()[:j_max]


def eigen_floor(kernel: Kernel, spec: StreamSpec, h: int, j_max: int,
                k_range: Tuple[int, int], n: int = 64,
                floor_tolerance: float = FLOOR_TOLERANCE,
                gamma_scale: Optional[float] = None) -> PEReport:
    """Per-mode infima over ``k`` in the inclusive ``k_range``."""
    lo, hi = k_range
    inf = np.full(j_max, np.inf)
    arg = np.zeros(j_max, dtype=int)
    for k, vals in window_spectra(kernel, spec, h, j_max, range(lo, hi + 1), n):
        better = vals < inf
        inf = np.where(better, vals, inf)
        arg = np.where(better, k, arg)
    dom = None
    if gamma_scale is not None:
        dom = measure_pe_check(spec, h, gamma_scale, k_range).verdict
    return PEReport(h, j_max, (lo, hi), inf, arg, floor_tolerance, dom, gamma_scale)


@dataclass(frozen=True)
class MeasurePECheck:
    verdict: bool
    first_failing_k: Optional[int]
    checked: int


def measure_pe_check(spec: StreamSpec, h: int, gamma_scale: float,
                     k_range: Tuple[int, int]) -> MeasurePECheck:
    """Check ``(1/h) sum_{i=k+1}^{k+h} rho^{(i)} >= gamma_scale * Lebesgue``."""
    if h < 1:
        raise ParameterError("window length h must be >= 1")
    lo, hi = k_range
    for k in range(lo, hi + 1):
        avg = average_measure([marginal_at(spec, i) for i in range(k + 1, k + h + 1)])
        if not dominates(avg, gamma_scale):
            return MeasurePECheck(False, k, k - lo + 1)
    return MeasurePECheck(True, None, hi - lo + 1)

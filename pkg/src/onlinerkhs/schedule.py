"""Polynomially decaying gain and regularization sequences.

``a_k = (k+1)**-tau1`` and ``lambda_k = (k+1)**-tau2`` with the admissible
region ``0.1 < tau2 < 0.5 < tau1 < 1``, ``tau1 + tau2 < 1``, ``3 tau2 < tau1``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Union

import numpy as np

from .errors import ScheduleError

# chunk size for log-space products over very long index ranges
_CHUNK = 1 << 20


def violations(tau1: float, tau2: float) -> List[str]:
    out = []
    if not 0.1 < tau2:
        out.append("0.1 < tau2")
    if not tau2 < 0.5:
        out.append("tau2 < 0.5")
    if not 0.5 < tau1:
        out.append("0.5 < tau1")
    if not tau1 < 1:
        out.append("tau1 < 1")
    if not tau1 + tau2 < 1:
        out.append("tau1 + tau2 < 1")
    if not 3 * tau2 < tau1:
        out.append("3*tau2 < tau1")
    return out


@dataclass(frozen=True)
class GainSchedule:
    tau1: float = 0.7
    tau2: float = 0.15

    def __post_init__(self):
        bad = violations(self.tau1, self.tau2)
        if bad:
            raise ScheduleError(
                f"(tau1={self.tau1}, tau2={self.tau2}) violates " + ", ".join(bad))

    def gain(self, k):
        return gain(self, k)

    def reg(self, k):
        return reg(self, k)

    def product(self, k):
        """``a_k * lambda_k = (k+1)**-(tau1+tau2)``."""
        return (np.asarray(k, dtype=float) + 1.0) ** -(self.tau1 + self.tau2)


def gain(s: GainSchedule, k):
    k = np.asarray(k, dtype=float)
    out = (k + 1.0) ** -s.tau1
    return float(out) if out.ndim == 0 else out


def reg(s: GainSchedule, k):
    k = np.asarray(k, dtype=float)
    out = (k + 1.0) ** -s.tau2
    return float(out) if out.ndim == 0 else out


def log_contraction_product(s: GainSchedule, start: int, stop: int) -> float:
    """``log prod_{k=start}^{stop} (1 - a_k lambda_k)``; ``-inf`` if ``start == 0``."""
    if start > stop:
        return 0.0
    if start <= 0:
        return -np.inf
    total = 0.0
    p = s.tau1 + s.tau2
    for lo in range(start, stop + 1, _CHUNK):
        k = np.arange(lo, min(lo + _CHUNK, stop + 1), dtype=float)
        total += float(np.log1p(-((k + 1.0) ** -p)).sum())
    return total


def contraction_product(s: GainSchedule, start: int, stop: int) -> float:
    """``prod_{k=start}^{stop} (1 - a_k lambda_k)``, empty product 1.

    The ``k = 0`` factor is exactly zero because ``a_0 = lambda_0 = 1``.
    """
    return float(np.exp(log_contraction_product(s, start, stop)))


def validate(tau1: float, tau2: float) -> Union[GainSchedule, List[str]]:
    bad = violations(tau1, tau2)
    return bad if bad else GainSchedule(tau1, tau2)

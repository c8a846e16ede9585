"""Positive-definite kernels on a closed interval."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Tuple

import numpy as np

from .errors import DomainError, ParameterError

ArrayFunc = Callable[[np.ndarray, np.ndarray], np.ndarray]

# slack for domain membership so grid nodes computed in floating point pass
_DOMAIN_EPS = 1e-12


@dataclass(frozen=True)
class Kernel:
    """A continuous positive-definite kernel on ``domain = [lo, hi]``.

    The Gaussian family is ``K(x, y) = exp(-((x - y) / bandwidth)**2)``, so
    ``bandwidth=1`` gives ``exp(-(x - y)**2)``. Custom kernels supply a
    vectorised ``func(x, y)`` and their own ``kappa = sup_x K(x, x)``.
    """

    family: str = "gaussian"
    bandwidth: float = 1.0
    domain: Tuple[float, float] = (0.0, 1.0)
    kappa: float = 1.0
    func: Optional[ArrayFunc] = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        lo, hi = (float(v) for v in self.domain)
        if not lo < hi:
            raise ParameterError(f"empty domain [{lo}, {hi}]")
        object.__setattr__(self, "domain", (lo, hi))
        if self.family == "gaussian":
            if not self.bandwidth > 0:
                raise ParameterError("gaussian bandwidth must be positive")
        elif self.family == "custom":
            if self.func is None:
                raise ParameterError("custom kernel needs a func")
        else:
            raise ParameterError(f"unknown kernel family {self.family!r}")
        if not self.kappa > 0:
            raise ParameterError("kappa must be positive")

    @classmethod
    def gaussian(cls, bandwidth: float = 1.0, domain=(0.0, 1.0)) -> "Kernel":
        return cls("gaussian", bandwidth, tuple(domain), 1.0)

    @classmethod
    def custom(cls, func: ArrayFunc, kappa: float, domain=(0.0, 1.0)) -> "Kernel":
        return cls("custom", 1.0, tuple(domain), kappa, func)

    def check_domain(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        lo, hi = self.domain
        if x.size and (np.any(x < lo - _DOMAIN_EPS) or np.any(x > hi + _DOMAIN_EPS)
                       or np.any(np.isnan(x))):
            bad = x[(x < lo - _DOMAIN_EPS) | (x > hi + _DOMAIN_EPS) | np.isnan(x)]
            raise DomainError(f"point {bad.flat[0]!r} outside domain [{lo}, {hi}]")
        return x

    def __call__(self, x, y) -> np.ndarray:
        """Broadcasting evaluation without domain checks (hot path)."""
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        if self.family == "gaussian":
            d = (x - y) / self.bandwidth
            return np.exp(-d * d)
        return np.asarray(self.func(x, y), dtype=float)

    def matrix(self, xs, ys) -> np.ndarray:
        """Cross-Gram ``M[i, j] = K(xs[i], ys[j])``."""
        xs = np.asarray(xs, dtype=float).reshape(-1)
        ys = np.asarray(ys, dtype=float).reshape(-1)
        return self(xs[:, None], ys[None, :])

    def to_config(self) -> dict:
        if self.family != "gaussian":
            raise ParameterError("only gaussian kernels are serialisable")
        return {"family": "gaussian", "bandwidth": self.bandwidth,
                "domain": list(self.domain)}

    @classmethod
    def from_config(cls, cfg: dict) -> "Kernel":
        family = cfg.get("family", "gaussian")
        if family != "gaussian":
            raise ParameterError(f"kernel family {family!r} is not configurable")
        return cls.gaussian(float(cfg.get("bandwidth", 1.0)),
                            tuple(cfg.get("domain", (0.0, 1.0))))


def eval(kernel: Kernel, x: float, y: float) -> float:  # noqa: A001
    kernel.check_domain([x, y])
    return float(kernel(x, y))


def gram(kernel: Kernel, centers) -> np.ndarray:
    centers = kernel.check_domain(np.asarray(centers, dtype=float).reshape(-1))
    g = kernel.matrix(centers, centers)
    # exact symmetry regardless of how func rounds
    return 0.5 * (g + g.T)


@dataclass(frozen=True)
class KernelRegularityReport:
    order: float
    mixed_constant: float
    holder_seminorm_estimate: float
    sample_count: int


def check_regularity(kernel: Kernel, s: float, trials: int, seed: int = 0,
                     points: Optional[np.ndarray] = None) -> KernelRegularityReport:
    """Empirical Hoelder constants of order ``s`` from random quadruples.

    Returns suprema over the sample, i.e. lower bounds on the true constants.
    ``points`` (shape ``(trials, 4)``, columns u1, u2, v1, v2) overrides the
    random draw. Quadruples with ``u1 == u2`` or ``v1 == v2`` are skipped.
    """
    if not 0.0 <= s <= 1.0:
        raise ParameterError(f"order s={s} outside [0, 1]")
    if trials < 1:
        raise ParameterError("trials must be >= 1")
    if points is None:
        lo, hi = kernel.domain
        points = np.random.default_rng(seed).uniform(lo, hi, size=(trials, 4))
    points = np.asarray(points, dtype=float).reshape(-1, 4)
    kernel.check_domain(points)
    u1, u2, v1, v2 = points.T
    du = np.abs(u1 - u2)
    dv = np.abs(v1 - v2)
    keep = (du > 0) & (dv > 0)
    u1, u2, v1, v2, du, dv = (a[keep] for a in (u1, u2, v1, v2, du, dv))
    if not keep.any():
        return KernelRegularityReport(s, 0.0, 0.0, 0)

    mixed = np.abs(kernel(u1, v1) - kernel(u2, v1) - kernel(u1, v2) + kernel(u2, v2))
    mixed_ratio = mixed / (du ** s * dv ** s)
    first = np.maximum(np.abs(kernel(u1, v1) - kernel(u2, v1)),
                       np.abs(kernel(u1, v2) - kernel(u2, v2)))
    holder_ratio = first / du ** s
    return KernelRegularityReport(s, float(mixed_ratio.max()),
                                  float(holder_ratio.max()), int(keep.sum()))

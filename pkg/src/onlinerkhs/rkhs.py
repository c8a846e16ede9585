"""Finite kernel expansions ``f = sum_i alpha_i K(x_i, .)`` and their algebra."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import IncompatibleError, ParameterError, ScheduleError
from .kernel import Kernel


@dataclass(frozen=True, eq=False)
class KernelExpansion:
    """An RKHS element held as parallel ``centers``/``coefficients`` arrays.

    Duplicate centers are allowed. Instances are treated as immutable; every
    operation returns a new expansion.
    """

    kernel: Kernel
    centers: np.ndarray
    coefficients: np.ndarray

    def __post_init__(self):
        c = np.array(self.centers, dtype=float).reshape(-1)
        a = np.array(self.coefficients, dtype=float).reshape(-1)
        if c.shape != a.shape:
            raise ParameterError(
                f"{c.size} centers but {a.size} coefficients")
        self.kernel.check_domain(c)
        c.setflags(write=False)
        a.setflags(write=False)
        object.__setattr__(self, "centers", c)
        object.__setattr__(self, "coefficients", a)

    @classmethod
    def zero(cls, kernel: Kernel) -> "KernelExpansion":
        return cls(kernel, np.empty(0), np.empty(0))

    @classmethod
    def single(cls, kernel: Kernel, center: float, coef: float = 1.0) -> "KernelExpansion":
        return cls(kernel, [center], [coef])

    def __len__(self):
        return self.centers.size

    def __call__(self, x):
        return evaluate(self, x)

    def merged(self) -> "KernelExpansion":
        """Same element with duplicate centers summed."""
        if len(self) == 0:
            return self
        uniq, inv = np.unique(self.centers, return_inverse=True)
        coef = np.zeros(uniq.size)
        np.add.at(coef, inv, self.coefficients)
        return KernelExpansion(self.kernel, uniq, coef)

    def pruned(self, eps: float) -> "KernelExpansion":
        """Drop terms with ``|alpha_i| < eps``. Changes the element; off by default."""
        if eps <= 0:
            return self
        keep = np.abs(self.coefficients) >= eps
        return KernelExpansion(self.kernel, self.centers[keep], self.coefficients[keep])

    def scaled(self, a: float) -> "KernelExpansion":
        return KernelExpansion(self.kernel, self.centers, a * self.coefficients)


@dataclass(frozen=True, eq=False)
class TargetFunction:
    expansion: KernelExpansion
    declared_norm: float

    def __post_init__(self):
        if abs(norm(self.expansion) - self.declared_norm) > 1e-10:
            raise ParameterError(
                f"declared norm {self.declared_norm} != Gram norm {norm(self.expansion)}")

    @classmethod
    def from_expansion(cls, f: KernelExpansion) -> "TargetFunction":
        return cls(f, norm(f))

    @classmethod
    def kernel_section(cls, kernel: Kernel, center: float = 0.0) -> "TargetFunction":
        """``K(center, .)``; with the unit Gaussian and center 0 this is ``exp(-x**2)``."""
        f = KernelExpansion.single(kernel, center, 1.0)
        return cls(f, float(np.sqrt(kernel(center, center))))

    @property
    def kernel(self) -> Kernel:
        return self.expansion.kernel

    def __call__(self, x):
        return evaluate(self.expansion, x)


def _same_kernel(f: KernelExpansion, g: KernelExpansion):
    if f.kernel != g.kernel:
        raise IncompatibleError("expansions use different kernels")


def evaluate(f: KernelExpansion, x):
    """``f(x)`` for a scalar or an array of points."""
    x = f.kernel.check_domain(x)
    if len(f) == 0:
        return np.zeros_like(x) if x.ndim else 0.0
    vals = f.kernel(x[..., None], f.centers) @ f.coefficients
    return vals if x.ndim else float(vals)


def inner(f: KernelExpansion, g: KernelExpansion) -> float:
    _same_kernel(f, g)
    if len(f) == 0 or len(g) == 0:
        return 0.0
    return float(f.coefficients @ f.kernel.matrix(f.centers, g.centers) @ g.coefficients)


def norm(f: KernelExpansion) -> float:
    return float(np.sqrt(max(inner(f, f), 0.0)))


def combine(a: float, f: KernelExpansion, b: float, g: KernelExpansion) -> KernelExpansion:
    """``a*f + b*g`` by concatenating the two center lists."""
    _same_kernel(f, g)
    return KernelExpansion(f.kernel,
                           np.concatenate([f.centers, g.centers]),
                           np.concatenate([a * f.coefficients, b * g.coefficients]))


def distance(f: KernelExpansion, g: KernelExpansion) -> float:
    # shared centers cancel exactly once merged, so near-equal inputs
    # do not lose half their digits to the square root
    return norm(combine(1.0, f, -1.0, g).merged())


def apply_step_operator(f: KernelExpansion, x: float, a: float, lam: float,
                        check: bool = True) -> KernelExpansion:
    """``(I - a (K_x (x) K_x + lam I)) f = (1 - a lam) f - a f(x) K_x``.

    The result has norm at most ``(1 - a lam) ||f||`` whenever
    ``a K(x, x) <= 2 (1 - a lam)``. ``check=False`` admits ``a lam >= 1``,
    which the very first step of the polynomial schedule needs.
    """
    if check and not 0.0 <= a * lam < 1.0:
        raise ScheduleError(f"a*lam = {a * lam} outside [0, 1)")
    if len(f) == 0:
        return f
    fx = evaluate(f, x)
    return KernelExpansion(f.kernel,
                           np.append(f.centers, x),
                           np.append((1.0 - a * lam) * f.coefficients, -a * fx))

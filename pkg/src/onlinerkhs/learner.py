"""Online regularized least squares in an RKHS.

The update ``f_{k+1} = f_k - a_k((f_k(x_k) - y_k) K_{x_k} + lambda_k f_k)``
keeps ``f_k`` a kernel expansion over the inputs seen so far: every old
coefficient shrinks by ``1 - a_k lambda_k`` and ``x_k`` enters with
coefficient ``-a_k (f_k(x_k) - y_k)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np

from . import rkhs
from .basis import SharedBasis
from .errors import ContractError, IncompatibleError, ParameterError
from .rkhs import KernelExpansion
from .schedule import GainSchedule
from .stream import StreamSpec, sample_path

# fold the running shrink factor back into the stored coefficients below this
_RESCALE_FLOOR = 1e-150


@dataclass(frozen=True, eq=False)
class LearnerState:
    k: int
    hypothesis: KernelExpansion
    schedule: GainSchedule
    n_initial: int = 0

    def __post_init__(self):
        if len(self.hypothesis) != self.k + self.n_initial:
            raise ParameterError("hypothesis must hold one center per observed input")


def init(schedule: GainSchedule, f0: KernelExpansion) -> LearnerState:
    return LearnerState(0, f0, schedule, n_initial=len(f0))


def step(state: LearnerState, x: float, y: float) -> LearnerState:
    f = state.hypothesis
    f.kernel.check_domain(x)
    k = state.k
    a = state.schedule.gain(k)
    lam = state.schedule.reg(k)
    fx = rkhs.evaluate(f, x)
    coefs = np.append((1.0 - a * lam) * f.coefficients, -a * (fx - y))
    centers = np.append(f.centers, x)
    return LearnerState(k + 1, KernelExpansion(f.kernel, centers, coefs),
                        state.schedule, state.n_initial)


@dataclass(frozen=True)
class Trajectory:
    """Squared RKHS errors ``||f_k - f*||^2`` at the recorded steps.

    ``errors`` has shape ``(runs, len(steps))``.
    """

    steps: np.ndarray
    errors: np.ndarray
    run_ids: np.ndarray

    def single(self, i: int = 0) -> np.ndarray:
        return self.errors[i]


def record_steps(T: int, record_every: int) -> np.ndarray:
    if T < 1:
        raise ParameterError("horizon T must be >= 1")
    if record_every < 1:
        raise ParameterError("record_every must be >= 1")
    steps = np.arange(record_every, T + 1, record_every)
    if steps.size == 0 or steps[-1] != T:
        steps = np.append(steps, T)
    return steps


class BatchLearner:
    """Runs the coefficient recursion for several runs in lockstep.

    Old coefficients are never rewritten: they are stored divided by the
    running product ``S_k = prod (1 - a_j lambda_j)``, which is folded back in
    when a factor is exactly zero (``k = 0``) or ``S_k`` gets tiny.
    ``lazy_shrink=False`` multiplies every coefficient each step instead.
    """

    def __init__(self, schedule: GainSchedule, target: rkhs.TargetFunction, horizon: int,
                 runs: int, f0: Optional[KernelExpansion] = None, lazy_shrink: bool = True):
        kernel = target.kernel
        if f0 is None:
            f0 = KernelExpansion.zero(kernel)
        if f0.kernel != kernel:
            raise IncompatibleError("f0 and target use different kernels")
        self.kernel = kernel
        self.schedule = schedule
        self.target = target
        self.lazy_shrink = lazy_shrink
        m0 = len(f0)
        size = m0 + horizon
        self.m0 = m0
        self.k = 0
        self.centers = np.zeros((runs, size))
        self.beta = np.zeros((runs, size))
        self.u = np.zeros((runs, size))
        self.tv = np.zeros((runs, size))
        self.scale = 1.0
        self.target_sqnorm = target.declared_norm ** 2
        if m0:
            self.centers[:, :m0] = f0.centers
            self.beta[:, :m0] = f0.coefficients
            self.u[:, :m0] = kernel.matrix(f0.centers, f0.centers) @ f0.coefficients
            self.tv[:, :m0] = target(f0.centers)

    @property
    def size(self) -> int:
        return self.m0 + self.k

    def step(self, x, y) -> None:
        m = self.size
        k = self.k
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        c = 1.0 - self.schedule.product(k)
        a = self.schedule.gain(k)
        krow = self.kernel(x[:, None], self.centers[:, :m])
        fx = self.scale * np.einsum("rj,rj->r", self.beta[:, :m], krow)
        alpha_new = -a * (fx - y)

        if c == 0.0:
            self.beta[:, :m] = 0.0
            self.u[:, :m] = 0.0
            new_scale = 1.0
        elif self.lazy_shrink:
            new_scale = self.scale * c
            if new_scale < _RESCALE_FLOOR:
                self.beta[:, :m] *= new_scale
                self.u[:, :m] *= new_scale
                new_scale = 1.0
        else:
            self.beta[:, :m] *= c
            self.u[:, :m] *= c
            new_scale = 1.0

        inc = alpha_new / new_scale
        self.u[:, :m] += inc[:, None] * krow
        self.beta[:, m] = inc
        self.u[:, m] = (c * fx + alpha_new * self.kernel(x, x)) / new_scale
        self.centers[:, m] = x
        self.tv[:, m] = self.target(x)
        self.scale = new_scale
        self.k = k + 1

    def coefficients(self) -> np.ndarray:
        return self.scale * self.beta[:, :self.size]

    def squared_errors(self) -> np.ndarray:
        """``sum_ij a_i a_j K(x_i, x_j) - 2 sum_i a_i f*(x_i) + ||f*||^2`` per run."""
        m = self.size
        s = self.scale
        quad = s * s * np.einsum("rj,rj->r", self.beta[:, :m], self.u[:, :m])
        lin = s * np.einsum("rj,rj->r", self.beta[:, :m], self.tv[:, :m])
        return np.maximum(quad - 2.0 * lin + self.target_sqnorm, 0.0)

    def hypotheses(self) -> List[KernelExpansion]:
        coef = self.coefficients()
        return [KernelExpansion(self.kernel, self.centers[r, :self.size], coef[r])
                for r in range(coef.shape[0])]


def run_batch(spec: StreamSpec, schedule: GainSchedule, T: int, record_every: int = 10,
              run_ids: Sequence[int] = (0,), f0: Optional[KernelExpansion] = None,
              lazy_shrink: bool = True) -> Trajectory:
    steps = record_steps(T, record_every)
    run_ids = np.asarray(run_ids, dtype=int)
    draws = [sample_path(spec, T, int(r)) for r in run_ids]
    xs = np.stack([d.x for d in draws])
    ys = np.stack([d.y for d in draws])
    eng = BatchLearner(schedule, spec.target, T, len(run_ids), f0, lazy_shrink)
    out = np.empty((len(run_ids), steps.size))
    j = 0
    for k in range(T):
        eng.step(xs[:, k], ys[:, k])
        if eng.k == steps[j]:
            out[:, j] = eng.squared_errors()
            j += 1
    return Trajectory(steps, out, run_ids)


def run(spec: StreamSpec, schedule: GainSchedule, T: int, record_every: int = 10,
        run_id: int = 0, f0: Optional[KernelExpansion] = None) -> Trajectory:
    """One learner run; ``errors[0]`` holds ``||f_k - f*||_K^2`` at ``steps``."""
    return run_batch(spec, schedule, T, record_every, (run_id,), f0)


@dataclass(frozen=True)
class NoiseFreeResult:
    """Noise-free iterates and the regularization bias term.

    ``identity_residual[t]`` is ``||(f~_{k+1} - f*) - (Phi(k,0)(f~_0 - f*) - B_k)||``
    at ``k + 1 = steps[t]``.
    """

    steps: np.ndarray
    error_norm: np.ndarray
    bias_norm: np.ndarray
    transient_norm: np.ndarray
    identity_residual: np.ndarray
    hypothesis: KernelExpansion
    bias: KernelExpansion


def run_noise_free(spec: StreamSpec, schedule: GainSchedule, T: int,
                   f0: Optional[KernelExpansion] = None, record_every: int = 1,
                   run_id: int = 0, tol: float = 1e-9) -> NoiseFreeResult:
    """Noise-free learner plus the separately propagated bias ``B_k``.

    ``B_k = sum_{i<=k} a_i lambda_i Phi(k, i+1) f*`` obeys
    ``B_k = F_k B_{k-1} + a_k lambda_k f*`` with ``F_k`` the step operator.
    Raises :class:`ContractError` if the identity residual exceeds
    ``tol * (1 + ||f*||)`` at a recorded step.
    """
    if spec.noise.kind != "zero":
        raise ContractError("run_noise_free needs a zero-noise stream")
    target = spec.target
    kernel = target.kernel
    if f0 is None:
        f0 = KernelExpansion.zero(kernel)
    steps = record_steps(T, record_every)
    draws = sample_path(spec, T, run_id)

    tstar = target.expansion
    anchors = np.concatenate([tstar.centers, f0.centers])
    nt = len(tstar)
    star_coef = np.concatenate([tstar.coefficients, np.zeros(len(f0))])
    f0_coef = np.concatenate([np.zeros(nt), f0.coefficients])

    basis = SharedBasis(kernel, anchors, T, 1)
    learner = basis.element(f0_coef)
    transient = basis.element(f0_coef - star_coef)
    bias = basis.element()
    star = basis.element(star_coef)

    rec = {name: np.empty(steps.size) for name in ("err", "bias", "trans", "res")}
    scale = 1.0 + target.declared_norm
    j = 0
    for k in range(T):
        x, y = draws.x[k], draws.y[k]
        a = schedule.gain(k)
        lam = schedule.reg(k)
        basis.advance(x)
        fx = learner.value_at_current()
        learner.scale(1.0 - a * lam)
        learner.add_current(-a * (fx - y))
        transient.step(a, lam)
        bias.step(a, lam)
        bias.add_anchor(a * lam * star_coef)
        if basis.k == steps[j]:
            err = learner.difference_norm(star)[0]
            res = learner.difference_norm(star, transient, bias,
                                          signs=[1.0, 1.0, -1.0])[0]
            rec["err"][j] = err
            rec["bias"][j] = bias.norm()[0]
            rec["trans"][j] = transient.norm()[0]
            rec["res"][j] = res
            if res > tol * scale:
                raise ContractError(
                    f"noise-free identity residual {res:.3e} at k={basis.k}")
            j += 1
    return NoiseFreeResult(steps, rec["err"], rec["bias"], rec["trans"], rec["res"],
                           learner.to_expansions()[0], bias.to_expansions()[0])

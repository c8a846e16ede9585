"""Numerical checks of the tracking-error structure.

The tracking error ``delta_k = f_k - f_lam(k)`` splits exactly into
``M_k + D_k`` where

    M_{k+1} = F_k M_k - a_k w_k,              M_0 = f_0
    D_{k+1} = F_k D_k - (f_lam(k+1) - f_lam(k)), D_0 = -f_lam(0)
    w_k = (H_k + lam_k I) f_lam(k) - H_k f* - v_k K_{x_k}

with ``H_k = K_{x_k} (x) K_{x_k}`` and ``F_k = I - a_k (H_k + lam_k I)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .basis import SharedBasis
from .errors import ParameterError
from .kernel import Kernel
from .learner import record_steps
from .path_oracle import PathCache
from .schedule import GainSchedule, log_contraction_product
from .stream import StreamSpec, sample_path


@dataclass(frozen=True)
class DecompositionTrace:
    """Per-run norms at ``steps``; arrays have shape ``(runs, len(steps))``."""

    steps: np.ndarray
    delta_norm: np.ndarray
    m_norm: np.ndarray
    d_norm: np.ndarray
    identity_residual: np.ndarray
    run_ids: np.ndarray

    def relative_residual(self) -> np.ndarray:
        return self.identity_residual / (1.0 + self.delta_norm)


class _ConstantLambda(GainSchedule):
    """Schedule whose regularization is pinned (diagnostic mode only)."""

    def __init__(self, base: GainSchedule, lam: float):
        object.__setattr__(self, "tau1", base.tau1)
        object.__setattr__(self, "tau2", base.tau2)
        object.__setattr__(self, "_lam", float(lam))

    def reg(self, k):
        k = np.asarray(k, dtype=float)
        out = np.full(k.shape, self._lam)
        return float(out) if out.ndim == 0 else out


def simulate_decomposition(kernel: Kernel, spec: StreamSpec, schedule: GainSchedule, T: int,
                           n: int = 64, run_ids: Sequence[int] = (0,), record_every: int = 1,
                           steps: Optional[Sequence[int]] = None,
                           f0_path: bool = False,
                           constant_lambda: Optional[float] = None,
                           paths: Optional[PathCache] = None) -> DecompositionTrace:
    """Run the learner and both error recursions on shared samples.

    ``f0_path=True`` starts the learner at ``f_lam(0)`` instead of 0.
    ``constant_lambda`` pins ``lambda_k`` (off-schedule diagnostic).
    """
    if T < 1:
        raise ParameterError("T must be >= 1")
    if constant_lambda is not None:
        schedule = _ConstantLambda(schedule, constant_lambda)
    if paths is None:
        paths = PathCache(kernel, spec, schedule, n)
    steps = record_steps(T, record_every) if steps is None else np.asarray(sorted(steps))
    run_ids = np.asarray(run_ids, dtype=int)
    R = run_ids.size
    draws = [sample_path(spec, T, int(r)) for r in run_ids]
    xs = np.stack([d.x for d in draws])
    vs = np.stack([d.v for d in draws])
    ys = np.stack([d.y for d in draws])

    tstar = spec.target.expansion
    ng = paths.grid.n
    anchors = np.concatenate([paths.grid.nodes, tstar.centers])
    star_coef = np.concatenate([np.zeros(ng), tstar.coefficients])

    def on_grid(c):
        return np.concatenate([c, np.zeros(len(tstar))])

    basis = SharedBasis(kernel, anchors, T, R)
    f0_coef = on_grid(paths.coefficients(0)) if f0_path else np.zeros(anchors.size)
    learner = basis.element(f0_coef)
    m_el = basis.element(f0_coef)
    d_el = basis.element(-on_grid(paths.coefficients(0)))

    out = {name: np.empty((R, steps.size)) for name in ("delta", "m", "d", "res")}
    j = 0
    if steps.size and steps[0] == 0:
        path = basis.element(on_grid(paths.coefficients(0)))
        _record(out, 0, learner, m_el, d_el, path)
        j = 1
    for k in range(T):
        a, lam = schedule.gain(k), schedule.reg(k)
        c_now = on_grid(paths.coefficients(k))
        c_next = on_grid(paths.coefficients(k + 1))
        basis.advance(xs[:, k])
        karow = basis.karow
        path_x = karow @ c_now
        star_x = karow @ star_coef

        fx = learner.value_at_current()
        learner.scale(1.0 - a * lam)
        learner.add_current(-a * (fx - ys[:, k]))

        m_el.step(a, lam)
        m_el.add_current(-a * (path_x - star_x - vs[:, k]))
        m_el.add_anchor(-a * lam * c_now)

        d_el.step(a, lam)
        d_el.add_anchor(-(c_next - c_now))

        if j < steps.size and basis.k == steps[j]:
            path = _anchor_only(basis, c_next)
            _record(out, j, learner, m_el, d_el, path)
            j += 1
    return DecompositionTrace(steps, out["delta"], out["m"], out["d"], out["res"], run_ids)


def _anchor_only(basis: SharedBasis, coef: np.ndarray):
    from .basis import BasisElement
    e = BasisElement(basis)
    e.p += coef
    return e


def _record(out, j, learner, m_el, d_el, path):
    out["delta"][:, j] = learner.difference_norm(path)
    out["m"][:, j] = m_el.norm()
    out["d"][:, j] = d_el.norm()
    out["res"][:, j] = learner.difference_norm(path, m_el, d_el)


def contraction_suite(kernel: Kernel, schedule: GainSchedule, T: int, trials: int,
                      seed: int = 0, max_terms: int = 8, start: int = 1) -> float:
    """Largest ``||Phi(k, start) f|| / (prod_{j=start}^k (1 - a_j lam_j) ||f||)``.

    Random expansions (1..``max_terms`` centers, standard normal coefficients)
    are pushed through random input chains ``x_start, ..., x_{start+T-1}``;
    the ratio is taken at every intermediate ``k``.
    """
    if trials < 1:
        raise ParameterError("trials must be >= 1")
    rng = np.random.default_rng(seed)
    lo, hi = kernel.domain
    m = max_terms
    basis = SharedBasis(kernel, np.empty(0), m + T, trials)
    f = basis.element()
    sizes = rng.integers(1, m + 1, size=trials)
    centers = rng.uniform(lo, hi, size=(trials, m))
    coefs = rng.standard_normal((trials, m)) * (np.arange(m)[None, :] < sizes[:, None])
    for i in range(m):
        basis.advance(centers[:, i])
        f.add_current(coefs[:, i])
    norm0 = f.norm()
    inputs = rng.uniform(lo, hi, size=(trials, T))
    worst = 0.0
    log_prod = 0.0
    for t in range(T):
        k = start + t
        a, lam = schedule.gain(k), schedule.reg(k)
        basis.advance(inputs[:, t])
        f.step(a, lam)
        log_prod += np.log1p(-a * lam)
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(norm0 > 0, f.norm() / (np.exp(log_prod) * norm0), 0.0)
        worst = max(worst, float(ratio.max()))
    return worst


@dataclass(frozen=True)
class MartingaleReport:
    steps: np.ndarray
    rms_norm: np.ndarray
    envelope: np.ndarray
    calibration_k: int
    constant: float
    fitted_slope: float
    envelope_exponent: float
    runs: int

    @property
    def tail(self) -> np.ndarray:
        return self.steps >= self.calibration_k

    @property
    def envelope_respected(self) -> bool:
        t = self.tail
        return bool(np.all(self.rms_norm[t] <= self.envelope[t]))


def martingale_envelope(steps, tau1: float, tau2: float) -> np.ndarray:
    k = np.asarray(steps, dtype=float)
    return np.log(k + 1.0) ** 1.5 * (k + 1.0) ** (-(tau1 - 3 * tau2) / 2)


def martingale_stability(kernel: Kernel, spec: StreamSpec, schedule: GainSchedule, T: int,
                         runs: int, n: int = 64, calibration_k: Optional[int] = None,
                         steps: Optional[Sequence[int]] = None,
                         w_zero: bool = False, m0=None,
                         paths: Optional[PathCache] = None) -> MartingaleReport:
    """Monte-Carlo ``sqrt(E ||M_k||^2)`` against ``C ln^{3/2}(k+1) (k+1)^{-(tau1-3tau2)/2}``.

    ``C`` is fitted at ``calibration_k`` (default ``min(1000, T // 10)``).
    ``w_zero`` drops the forcing so ``M_k = Phi(k-1, 0) M_0`` (needs ``m0``,
    anchor coefficients over the grid).
    """
    if runs < 1:
        raise ParameterError("runs must be >= 1")
    if paths is None:
        paths = PathCache(kernel, spec, schedule, n)
    if calibration_k is None:
        calibration_k = min(1000, max(1, T // 10))
    if steps is None:
        steps = np.unique(np.concatenate([
            np.geomspace(1, T, 60).astype(int),
            np.linspace(calibration_k, T, 46).astype(int)]))
    steps = np.asarray(sorted(set(int(s) for s in steps) | {calibration_k}))
    run_ids = np.arange(runs)
    draws = [sample_path(spec, T, int(r)) for r in run_ids]
    xs = np.stack([d.x for d in draws])
    vs = np.stack([d.v for d in draws])

    tstar = spec.target.expansion
    ng = paths.grid.n
    anchors = np.concatenate([paths.grid.nodes, tstar.centers])
    star_coef = np.concatenate([np.zeros(ng), tstar.coefficients])
    basis = SharedBasis(kernel, anchors, T, runs)
    init = np.zeros(anchors.size)
    if m0 is not None:
        init[:ng] = m0
    m_el = basis.element(init)

    sq = np.empty((runs, steps.size))
    j = 0
    for k in range(T):
        a, lam = schedule.gain(k), schedule.reg(k)
        basis.advance(xs[:, k])
        m_el.step(a, lam)
        if not w_zero:
            c_now = np.concatenate([paths.coefficients(k), np.zeros(len(tstar))])
            karow = basis.karow
            m_el.add_current(-a * (karow @ c_now - karow @ star_coef - vs[:, k]))
            m_el.add_anchor(-a * lam * c_now)
        if j < steps.size and basis.k == steps[j]:
            sq[:, j] = m_el.sqnorm()
            j += 1
    rms = np.sqrt(sq.mean(axis=0))
    shape = martingale_envelope(steps, schedule.tau1, schedule.tau2)
    ic = int(np.searchsorted(steps, calibration_k))
    constant = float(rms[ic] / shape[ic])
    tail = steps >= max(calibration_k, T // 10)
    slope = float(np.polyfit(np.log(steps[tail]), np.log(rms[tail]), 1)[0]) \
        if tail.sum() >= 2 and np.all(rms[tail] > 0) else float("nan")
    return MartingaleReport(steps, rms, constant * shape, calibration_k, constant, slope,
                            -(schedule.tau1 - 3 * schedule.tau2) / 2, runs)


@dataclass(frozen=True)
class RateBoundTable:
    """Exact scalar sums/products and their ratios to the stated envelopes.

    ``sum_a[k] = sum_{i=1}^k a_i^2 prod_{j=i+1}^k (1 - a_j lam_j)``,
    ``sum_b`` additionally weights term ``i`` by ``sqrt(k - i + 1)``, and
    ``product[k] = prod_{i=1}^k (1 - a_i lam_i)``.
    """

    ks: np.ndarray
    sum_a: np.ndarray
    sum_b: np.ndarray
    product: np.ndarray
    ratio_a: np.ndarray
    ratio_b: np.ndarray
    ratio_product: np.ndarray

    def bounded(self, factor: float = 2.0) -> dict:
        return {name: bool(np.max(r) <= factor * r[0])
                for name, r in (("a", self.ratio_a), ("b", self.ratio_b),
                                ("product", self.ratio_product))}


def _log_prefix_products(schedule: GainSchedule, k_max: int) -> np.ndarray:
    """``L[k] = sum_{j=1}^k log(1 - a_j lam_j)``, ``L[0] = 0``."""
    j = np.arange(1, k_max + 1, dtype=float)
    return np.concatenate([[0.0], np.cumsum(np.log1p(-((j + 1.0) ** -(schedule.tau1 + schedule.tau2))))])


def scalar_sums(schedule: GainSchedule, k: int, logp: Optional[np.ndarray] = None):
    """``(sum_a, sum_b, product)`` at a single ``k`` (sums from ``i = 1``)."""
    if k < 1:
        return 0.0, 0.0, 1.0
    if logp is None:
        logp = _log_prefix_products(schedule, k)
    i = np.arange(1, k + 1)
    a2 = (i + 1.0) ** (-2 * schedule.tau1)
    tail = np.exp(logp[k] - logp[i])
    terms = a2 * tail
    return (float(terms.sum()), float((terms * np.sqrt(k - i + 1.0)).sum()),
            float(np.exp(logp[k])))


def rate_bound_suite(schedule: GainSchedule, k_max: int, k_min: int = 100,
                     points: int = 40) -> RateBoundTable:
    if k_max < k_min:
        raise ParameterError(f"k_max must be >= {k_min}")
    ks = np.unique(np.geomspace(k_min, k_max, points).astype(int))
    logp = _log_prefix_products(schedule, k_max)
    vals = np.array([scalar_sums(schedule, int(k), logp) for k in ks])
    t1, t2 = schedule.tau1, schedule.tau2
    kk = ks + 1.0
    env_a = kk ** (t2 - t1) * np.log(kk)
    env_b = kk ** ((3 * t2 - t1) / 2) * np.log(kk) ** 1.5
    env_p = kk ** -(t1 + t2)
    return RateBoundTable(ks, vals[:, 0], vals[:, 1], vals[:, 2],
                          vals[:, 0] / env_a, vals[:, 1] / env_b, vals[:, 2] / env_p)


def product_log_bound_gap(schedule: GainSchedule, k: int) -> float:
    """``-sum_{j=1}^k a_j lam_j - log prod_{j=1}^k (1 - a_j lam_j)`` (nonnegative)."""
    j = np.arange(1, k + 1, dtype=float)
    return float(-np.sum((j + 1.0) ** -(schedule.tau1 + schedule.tau2))
                 - log_contraction_product(schedule, 1, k))

"""Input streams, noise, and piecewise-constant marginal measures.

Randomness is counter based: the draws for step ``k`` of run ``run_id`` are
the ``k``-th Philox block under a key derived from ``(seed, run_id)``, so a
single step can be regenerated without replaying the ones before it.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy.special import ndtri

from .errors import ParameterError
from .rkhs import TargetFunction

# cells shorter than this are treated as breakpoint coincidences
_TINY = 1e-15
_TWO53 = float(2 ** 53)


@dataclass(frozen=True, eq=False)
class MarginalMeasure:
    """Probability measure with density ``density[i]`` on ``[bp[i], bp[i+1])``."""

    breakpoints: np.ndarray
    density: np.ndarray

    def __post_init__(self):
        bp = np.array(self.breakpoints, dtype=float).reshape(-1)
        m = np.array(self.density, dtype=float).reshape(-1)
        if bp.size != m.size + 1 or bp.size < 2:
            raise ParameterError("need len(breakpoints) == len(density) + 1 >= 2")
        if np.any(np.diff(bp) < 0):
            raise ParameterError("breakpoints must be sorted")
        if np.any(m < 0):
            raise ParameterError("density must be nonnegative")
        bp.setflags(write=False)
        m.setflags(write=False)
        object.__setattr__(self, "breakpoints", bp)
        object.__setattr__(self, "density", m)

    @classmethod
    def uniform(cls, lo: float, hi: float, domain=(0.0, 1.0)) -> "MarginalMeasure":
        """Uniform law on ``[lo, hi]`` embedded in ``domain``."""
        dlo, dhi = domain
        if not dlo <= lo < hi <= dhi:
            raise ParameterError(f"[{lo}, {hi}] not a subinterval of {domain}")
        bp = [dlo, lo, hi, dhi]
        m = [0.0, 1.0 / (hi - lo), 0.0]
        return cls(bp, m).simplified()

    @property
    def domain(self) -> Tuple[float, float]:
        return float(self.breakpoints[0]), float(self.breakpoints[-1])

    def mass(self) -> float:
        return float(np.dot(np.diff(self.breakpoints), self.density))

    def simplified(self) -> "MarginalMeasure":
        """Remove zero-length cells."""
        width = np.diff(self.breakpoints)
        keep = width > _TINY
        if keep.all():
            return self
        bp = np.append(self.breakpoints[:-1][keep], self.breakpoints[-1])
        return MarginalMeasure(bp, self.density[keep])

    def density_at(self, x) -> np.ndarray:
        """Density value with the right-open cell convention (last cell closed)."""
        x = np.asarray(x, dtype=float)
        idx = np.searchsorted(self.breakpoints, x, side="right") - 1
        idx = np.clip(idx, 0, self.density.size - 1)
        # right-open convention picks the cell to the right of a jump, which
        # may be zero-length; skip forward past empty cells
        width = np.diff(self.breakpoints)
        while True:
            empty = (width[idx] <= _TINY) & (idx < self.density.size - 1)
            if not empty.any():
                break
            idx = np.where(empty, idx + 1, idx)
        out = self.density[idx]
        lo, hi = self.domain
        return np.where((x < lo) | (x > hi), 0.0, out)

    def ppf(self, u) -> np.ndarray:
        """Inverse CDF for ``u`` in ``[0, 1)``."""
        u = np.asarray(u, dtype=float)
        width = np.diff(self.breakpoints)
        cell_mass = width * self.density
        cdf = np.concatenate([[0.0], np.cumsum(cell_mass)])
        total = cdf[-1]
        target = u * total
        idx = np.searchsorted(cdf, target, side="right") - 1
        idx = np.clip(idx, 0, cell_mass.size - 1)
        # skip massless cells
        while True:
            bad = (cell_mass[idx] <= 0) & (idx < cell_mass.size - 1)
            if not bad.any():
                break
            idx = np.where(bad, idx + 1, idx)
        with np.errstate(divide="ignore", invalid="ignore"):
            frac = np.where(cell_mass[idx] > 0,
                            (target - cdf[idx]) / self.density[idx], 0.0)
        x = self.breakpoints[idx] + frac
        return np.minimum(np.maximum(x, self.breakpoints[idx]), self.breakpoints[idx + 1])


def _merged_partition(measures: Sequence[MarginalMeasure]):
    lo = {m.domain for m in measures}
    if len(lo) != 1:
        raise ParameterError("measures live on different domains")
    bp = np.unique(np.concatenate([m.breakpoints for m in measures]))
    mids = 0.5 * (bp[:-1] + bp[1:])
    return bp, mids


def dual_norm_drift(mu: MarginalMeasure, nu: MarginalMeasure) -> float:
    """``int |m_mu - m_nu|`` over the merged partition (exact for step densities)."""
    bp, mids = _merged_partition([mu, nu])
    diff = np.abs(mu.density_at(mids) - nu.density_at(mids))
    return float(np.dot(np.diff(bp), diff))


def average_measure(measures: Sequence[MarginalMeasure]) -> MarginalMeasure:
    if len(measures) == 0:
        raise ParameterError("cannot average an empty list of measures")
    bp, mids = _merged_partition(measures)
    dens = np.mean([m.density_at(mids) for m in measures], axis=0)
    return MarginalMeasure(bp, dens)


def dominates(mu: MarginalMeasure, gamma_scale: float) -> bool:
    """True iff ``density >= gamma_scale`` on every cell of positive length."""
    if not gamma_scale > 0:
        raise ParameterError("gamma_scale must be positive")
    width = np.diff(mu.breakpoints)
    live = width > _TINY
    return bool(np.all(mu.density[live] >= gamma_scale))


@dataclass(frozen=True)
class NoiseModel:
    kind: str = "gaussian"
    variance: float = 0.1

    def __post_init__(self):
        if self.kind not in ("gaussian", "zero"):
            raise ParameterError(f"unknown noise kind {self.kind!r}")
        if self.variance < 0:
            raise ParameterError("noise variance must be nonnegative")

    @classmethod
    def zero(cls) -> "NoiseModel":
        return cls("zero", 0.0)

    @property
    def beta(self) -> float:
        """Bound on the conditional variance."""
        return 0.0 if self.kind == "zero" else self.variance

    def from_uniform(self, u) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        if self.kind == "zero" or self.variance == 0:
            return np.zeros_like(u)
        return np.sqrt(self.variance) * ndtri(u)


def shifting_interval(k: int) -> Tuple[float, float]:
    """Support of the k-th input law of the shifting-uniform stream on [0, 1]."""
    if k < 0:
        raise ParameterError("k must be >= 0")
    if k == 0:
        return 0.0, 1.0
    lo = (1 + (-1) ** k) / (2 * (k + 1))
    return lo, lo + 1.0 - 1.0 / (1 + k)


@dataclass(frozen=True, eq=False)
class StreamSpec:
    """Independent input stream with measurement ``y_k = f*(x_k) + v_k``.

    ``kind`` is ``shifting_uniform`` (on [0, 1]), ``iid`` (``measures[0]``
    every step) or ``scripted`` (``measures[k % len(measures)]``).
    """

    kind: str
    target: TargetFunction
    noise: NoiseModel = field(default_factory=NoiseModel)
    seed: int = 0
    measures: Tuple[MarginalMeasure, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "measures", tuple(self.measures))
        if self.kind not in ("shifting_uniform", "iid", "scripted"):
            raise ParameterError(f"unknown stream kind {self.kind!r}")
        if self.kind in ("iid", "scripted") and not self.measures:
            raise ParameterError(f"{self.kind} stream needs at least one measure")
        if self.kind == "shifting_uniform" and self.target.kernel.domain != (0.0, 1.0):
            raise ParameterError("shifting_uniform stream lives on [0, 1]")

    @property
    def kernel(self):
        return self.target.kernel

    @property
    def independent(self) -> bool:
        return True

    def with_noise(self, noise: NoiseModel) -> "StreamSpec":
        return StreamSpec(self.kind, self.target, noise, self.seed, self.measures)

    def with_seed(self, seed: int) -> "StreamSpec":
        return StreamSpec(self.kind, self.target, self.noise, seed, self.measures)

    @classmethod
    def shifting_uniform(cls, target: TargetFunction, noise: Optional[NoiseModel] = None,
                         seed: int = 0) -> "StreamSpec":
        return cls("shifting_uniform", target, noise or NoiseModel(), seed)

    @classmethod
    def iid(cls, target: TargetFunction, measure: Optional[MarginalMeasure] = None,
            noise: Optional[NoiseModel] = None, seed: int = 0) -> "StreamSpec":
        if measure is None:
            measure = MarginalMeasure.uniform(*target.kernel.domain, domain=target.kernel.domain)
        return cls("iid", target, noise or NoiseModel(), seed, (measure,))

    @classmethod
    def scripted(cls, target: TargetFunction, measures: Sequence[MarginalMeasure],
                 noise: Optional[NoiseModel] = None, seed: int = 0) -> "StreamSpec":
        return cls("scripted", target, noise or NoiseModel(), seed, tuple(measures))


def marginal_at(spec: StreamSpec, k: int) -> MarginalMeasure:
    if k < 0:
        raise ParameterError("k must be >= 0")
    if spec.kind == "shifting_uniform":
        lo, hi = shifting_interval(k)
        if k == 0:
            return MarginalMeasure([0.0, 1.0], [1.0])
        # density (k+1)/k on I_k, written directly rather than 1/(hi - lo)
        dens = (k + 1) / k
        bp = [0.0, lo, hi, 1.0]
        return MarginalMeasure(bp, [0.0, dens, 0.0]).simplified()
    if spec.kind == "iid":
        return spec.measures[0]
    return spec.measures[k % len(spec.measures)]


def _philox_key(seed: int, run_id: int) -> np.ndarray:
    return np.random.SeedSequence([int(seed), int(run_id)]).generate_state(2, dtype=np.uint64)


def _to_unit(raw: np.ndarray) -> np.ndarray:
    # open interval (0, 1) so ndtri stays finite
    return ((raw >> np.uint64(11)).astype(float) + 0.5) / _TWO53


def _raw_blocks(seed: int, run_id: int, start: int, count: int) -> np.ndarray:
    bitgen = np.random.Philox(key=_philox_key(seed, run_id))
    if start:
        bitgen.advance(start)
    return bitgen.random_raw(4 * count).reshape(count, 4)


def _inputs_from_uniform(spec: StreamSpec, ks: np.ndarray, u: np.ndarray) -> np.ndarray:
    if spec.kind == "shifting_uniform":
        lo = np.where(ks == 0, 0.0, np.where(ks % 2 == 0, 1.0 / (ks + 1.0), 0.0))
        hi = np.where(ks == 0, 1.0, np.where(ks % 2 == 0, 1.0, ks / (ks + 1.0)))
        return lo + u * (hi - lo)
    if spec.kind == "iid":
        return spec.measures[0].ppf(u)
    x = np.empty_like(u)
    idx = ks % len(spec.measures)
    for j, m in enumerate(spec.measures):
        sel = idx == j
        x[sel] = m.ppf(u[sel])
    return x


@dataclass(frozen=True)
class StreamDraws:
    """Inputs, noise, and outputs for steps ``0..T-1`` of one run."""

    x: np.ndarray
    v: np.ndarray
    y: np.ndarray


def sample_path(spec: StreamSpec, T: int, run_id: int = 0, start: int = 0) -> StreamDraws:
    """Draws for steps ``start .. start+T-1``; identical to repeated :func:`sample`."""
    ks = np.arange(start, start + T)
    raw = _raw_blocks(spec.seed, run_id, start, T)
    x = _inputs_from_uniform(spec, ks, _to_unit(raw[:, 0]))
    v = spec.noise.from_uniform(_to_unit(raw[:, 1]))
    y = spec.target(x) + v
    return StreamDraws(x, v, y)


def sample(spec: StreamSpec, k: int, run_id: int = 0) -> Tuple[float, float]:
    d = sample_path(spec, 1, run_id, start=k)
    return float(d.x[0]), float(d.y[0])

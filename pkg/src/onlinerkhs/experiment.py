"""Monte-Carlo orchestration, configuration files, and result persistence."""

from __future__ import annotations

import dataclasses
import hashlib
import json
import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict, List, Optional

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from . import __version__
from .errors import ConfigError, OnlineRKHSError, ParameterError
from .kernel import Kernel
from .learner import Trajectory, run_batch
from .rkhs import KernelExpansion, TargetFunction
from .schedule import GainSchedule, violations
from .stream import MarginalMeasure, NoiseModel, StreamSpec

log = logging.getLogger(__name__)

CSV_HEADER = "k,mse_mean,mse_std,runs"


@dataclass
class ExperimentConfig:
    kernel: Dict[str, Any] = field(default_factory=lambda: {
        "family": "gaussian", "bandwidth": 1.0, "domain": [0.0, 1.0]})
    stream: Dict[str, Any] = field(default_factory=lambda: {"kind": "shifting_uniform"})
    noise: Dict[str, Any] = field(default_factory=lambda: {"kind": "gaussian", "variance": 0.1})
    target: Dict[str, Any] = field(default_factory=lambda: {"centers": [0.0], "coefficients": [1.0]})
    tau1: float = 0.7
    tau2: float = 0.15
    horizon: int = 5000
    runs: int = 50
    grid_n: int = 64
    record_every: int = 10
    seed: int = 0
    output: str = "results"
    threads: int = 1
    same_run_ids: bool = False

    def problems(self) -> List[str]:
        out = [f"schedule requires {v}" for v in violations(self.tau1, self.tau2)]
        if self.horizon < 1:
            out.append("horizon must be >= 1")
        if self.runs < 1:
            out.append("runs must be >= 1")
        if self.grid_n < 2:
            out.append("grid_n must be >= 2")
        if self.record_every < 1:
            out.append("record_every must be >= 1")
        if self.threads < 1:
            out.append("threads must be >= 1")
        try:
            self.build_stream()
        except OnlineRKHSError as exc:
            out.append(str(exc))
        return out

    def validate(self) -> "ExperimentConfig":
        bad = self.problems()
        if bad:
            raise ConfigError("; ".join(bad))
        return self

    def schedule(self) -> GainSchedule:
        return GainSchedule(self.tau1, self.tau2)

    def build_kernel(self) -> Kernel:
        return Kernel.from_config(self.kernel)

    def build_target(self) -> TargetFunction:
        kern = self.build_kernel()
        f = KernelExpansion(kern, self.target.get("centers", [0.0]),
                            self.target.get("coefficients", [1.0]))
        return TargetFunction.from_expansion(f)

    def build_noise(self) -> NoiseModel:
        kind = self.noise.get("kind", "gaussian")
        if kind == "zero":
            return NoiseModel.zero()
        return NoiseModel(kind, float(self.noise.get("variance", 0.1)))

    def build_stream(self) -> StreamSpec:
        target = self.build_target()
        noise = self.build_noise()
        kind = self.stream.get("kind", "shifting_uniform")
        domain = target.kernel.domain
        if kind == "shifting_uniform":
            return StreamSpec.shifting_uniform(target, noise, self.seed)
        if kind == "iid":
            m = self.stream.get("measure")
            measure = _measure_from_config(m, domain) if m else None
            return StreamSpec.iid(target, measure, noise, self.seed)
        if kind == "scripted":
            ms = [_measure_from_config(m, domain) for m in self.stream.get("measures", [])]
            return StreamSpec.scripted(target, ms, noise, self.seed)
        raise ConfigError(f"unknown stream kind {kind!r}")

    def to_dict(self) -> Dict[str, Any]:
        return dataclasses.asdict(self)

    def digest(self) -> str:
        d = self.to_dict()
        # presentation-only keys do not change results
        for key in ("output", "threads"):
            d.pop(key)
        blob = json.dumps(d, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "ExperimentConfig":
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - names
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        cfg = cls(**data)
        for name in ("horizon", "runs", "grid_n", "record_every", "seed", "threads"):
            setattr(cfg, name, int(getattr(cfg, name)))
        cfg.tau1, cfg.tau2 = float(cfg.tau1), float(cfg.tau2)
        return cfg

    def with_overrides(self, **kw) -> "ExperimentConfig":
        kw = {k: v for k, v in kw.items() if v is not None}
        return dataclasses.replace(self, **kw)


def _measure_from_config(m: Dict[str, Any], domain) -> MarginalMeasure:
    if "uniform" in m:
        lo, hi = m["uniform"]
        return MarginalMeasure.uniform(lo, hi, domain)
    try:
        return MarginalMeasure(m["breakpoints"], m["density"])
    except KeyError as exc:
        raise ConfigError(f"measure needs 'uniform' or breakpoints/density: {m}") from exc


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        with path.open("rb") as fh:
            data = tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    return ExperimentConfig.from_dict(data)


def paper_config(**overrides) -> ExperimentConfig:
    """Shifting-uniform stream, unit Gaussian kernel, f* = K(0, .), 50 runs."""
    return ExperimentConfig().with_overrides(**overrides)


@dataclass(frozen=True)
class RunResult:
    steps: np.ndarray
    errors: np.ndarray
    run_ids: np.ndarray
    metadata: Dict[str, Any]

    @property
    def runs(self) -> int:
        return self.errors.shape[0]

    @property
    def mean(self) -> np.ndarray:
        return self.errors.mean(axis=0)

    @property
    def std(self) -> np.ndarray:
        return self.errors.std(axis=0)


def run_experiment(cfg: ExperimentConfig) -> RunResult:
    cfg.validate()
    spec = cfg.build_stream()
    schedule = cfg.schedule()
    run_ids = np.zeros(cfg.runs, dtype=int) if cfg.same_run_ids else np.arange(cfg.runs)
    chunks = [c for c in np.array_split(run_ids, min(cfg.threads, cfg.runs)) if c.size]
    started = datetime.now(timezone.utc).isoformat()
    log.info("running %d runs x T=%d on %d worker(s)", cfg.runs, cfg.horizon, len(chunks))

    def work(ids) -> Trajectory:
        return run_batch(spec, schedule, cfg.horizon, cfg.record_every, ids)

    if len(chunks) == 1:
        parts = [work(chunks[0])]
    else:
        with ThreadPoolExecutor(max_workers=len(chunks)) as pool:
            parts = list(pool.map(work, chunks))
    errors = np.concatenate([p.errors for p in parts], axis=0)
    meta = {
        "config_hash": cfg.digest(),
        "config": cfg.to_dict(),
        "started": started,
        "finished": datetime.now(timezone.utc).isoformat(),
        "version": __version__,
    }
    return RunResult(parts[0].steps, errors, run_ids, meta)


def _fmt(x: float) -> str:
    return repr(float(x))


def emit_csv(result: RunResult, path) -> Path:
    path = Path(path)
    lines = [CSV_HEADER]
    for k, m, s in zip(result.steps, result.mean, result.std):
        lines.append(f"{int(k)},{_fmt(m)},{_fmt(s)},{result.runs}")
    _write_text(path, "\n".join(lines) + "\n")
    return path


def read_csv(path) -> Dict[str, np.ndarray]:
    path = Path(path)
    rows = path.read_text().splitlines()
    if not rows or rows[0] != CSV_HEADER:
        raise ParameterError(f"{path}: unexpected header")
    body = [r.split(",") for r in rows[1:] if r]
    cols = list(zip(*body)) if body else [(), (), (), ()]
    return {"k": np.array(cols[0], dtype=int), "mse_mean": np.array(cols[1], dtype=float),
            "mse_std": np.array(cols[2], dtype=float), "runs": np.array(cols[3], dtype=int)}


def emit_trajectories(result: RunResult, path) -> Path:
    lines = ["run_id,k,squared_error"]
    for r, row in zip(range(result.runs), result.errors):
        rid = int(result.run_ids[r])
        lines.extend(f"{rid},{int(k)},{_fmt(e)}" for k, e in zip(result.steps, row))
    _write_text(Path(path), "\n".join(lines) + "\n")
    return Path(path)


def chart_figure(result: RunResult, log_y: bool = False, horizon: Optional[int] = None):
    """Matplotlib figure of the mean squared error against ``k``."""
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(6.4, 4.0))
    marker = "o" if result.steps.size == 1 else None
    ax.plot(result.steps, result.mean, color="tab:blue", lw=1.2, marker=marker)
    if horizon is None:
        horizon = int(result.steps.max()) if result.steps.size else 1
    ax.set_xlim(0, horizon)
    ax.set_xlabel("k")
    ax.set_ylabel("mean squared error")
    if log_y:
        ax.set_yscale("log")
    ax.grid(alpha=0.3)
    fig.tight_layout()
    return fig


def emit_chart(result: RunResult, path, log_y: bool = False, horizon: Optional[int] = None) -> Path:
    import matplotlib
    import matplotlib.pyplot as plt

    path = Path(path)
    fig = chart_figure(result, log_y, horizon)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        # fixed id salt and no date keep the svg byte-stable across runs
        with matplotlib.rc_context({"svg.hashsalt": "onlinerkhs"}):
            fig.savefig(path, format="svg", metadata={"Date": None})
    except OSError as exc:
        raise OSError(f"cannot write chart {path}: {exc.strerror}") from exc
    finally:
        plt.close(fig)
    return path


def _write_text(path: Path, text: str):
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="\n") as fh:
            fh.write(text)
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror}") from exc


def write_outputs(result: RunResult, out_dir, log_y: bool = False) -> Dict[str, Path]:
    out_dir = Path(out_dir)
    paths = {
        "mse": emit_csv(result, out_dir / "mse.csv"),
        "trajectories": emit_trajectories(result, out_dir / "trajectories.csv"),
        "chart": emit_chart(result, out_dir / "mse.svg", log_y,
                            horizon=result.metadata["config"]["horizon"]),
    }
    meta = out_dir / "metadata.json"
    _write_text(meta, json.dumps(result.metadata, indent=2, sort_keys=True) + "\n")
    paths["metadata"] = meta
    return paths


def reproduce_paper(output_dir, horizon: int = 5000, runs: int = 50, threads: int = 1,
                    seed: int = 0, log_y: bool = False) -> RunResult:
    cfg = paper_config(horizon=horizon, runs=runs, threads=threads, seed=seed,
                       output=os.fspath(output_dir))
    result = run_experiment(cfg)
    write_outputs(result, output_dir, log_y)
    return result


def smoothed(values: np.ndarray, window: int) -> np.ndarray:
    """Trailing moving average over ``window`` consecutive records."""
    if window < 1 or values.size < window:
        raise ParameterError("window longer than series")
    return np.convolve(values, np.ones(window) / window, mode="valid")

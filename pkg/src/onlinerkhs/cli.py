"""Command-line entry point: ``onlinerkhs <subcommand>``.

Failures exit nonzero with one line on stderr, ``error: <category>: <message>``.
"""

from __future__ import annotations

import io
import logging
import sys
from pathlib import Path
from typing import Iterable, List, Optional, Sequence

import click
import numpy as np

from . import __version__
from .analysis import rate_bound_suite, simulate_decomposition
from .errors import ConfigError, OnlineRKHSError
from .excitation import eigen_floor, measure_pe_check, window_spectra
from .experiment import (ExperimentConfig, load_config, reproduce_paper, run_experiment,
                         write_outputs)
from .path_oracle import path_table

EXIT_DOMAIN = 2
EXIT_IO = 3
EXIT_INTERNAL = 4


def _fmt(x) -> str:
    return repr(float(x))


def _emit(rows: Iterable[Sequence], header: Sequence[str], out: Optional[str],
          trailer: Sequence[str] = ()):
    buf = io.StringIO()
    buf.write(",".join(header) + "\n")
    for row in rows:
        buf.write(",".join(v if isinstance(v, str) else
                           str(v) if isinstance(v, (int, np.integer)) else _fmt(v)
                           for v in row) + "\n")
    text = buf.getvalue()
    if out is None:
        click.echo(text, nl=False)
        for line in trailer:
            click.echo(line)
        return
    path = Path(out)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="\n") as fh:
            fh.write(text)
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror}") from exc
    for line in trailer:
        click.echo(line)


class _Group(click.Group):
    """Turns library exceptions into a single machine-parsable line."""

    def invoke(self, ctx):
        try:
            return super().invoke(ctx)
        except OnlineRKHSError as exc:
            _fail(exc.category, str(exc), EXIT_DOMAIN)
        except OSError as exc:
            _fail("io", str(exc), EXIT_IO)
        except (click.exceptions.Exit, click.ClickException, click.Abort):
            raise
        except Exception as exc:  # pragma: no cover - last resort
            _fail("internal", f"{type(exc).__name__}: {exc}", EXIT_INTERNAL)


def _fail(category: str, message: str, code: int):
    message = " ".join(str(message).split())
    click.echo(f"error: {category}: {message}", err=True)
    sys.exit(code)


def _config(ctx, **overrides) -> ExperimentConfig:
    obj = ctx.obj
    cfg = load_config(obj["config"]) if obj["config"] else ExperimentConfig()
    cfg = cfg.with_overrides(seed=obj["seed"], threads=obj["threads"], **overrides)
    return cfg


@click.group(cls=_Group)
@click.option("--config", "config_path", type=click.Path(dir_okay=False),
              help="TOML experiment config; flags override its values.")
@click.option("--seed", type=int, default=None, help="Master seed.")
@click.option("--out", type=click.Path(), default=None,
              help="Output file (CSV subcommands) or directory (run, reproduce-paper).")
@click.option("--threads", type=click.IntRange(min=1), default=None,
              help="Worker threads for Monte-Carlo runs.")
@click.option("-v", "--verbose", is_flag=True, help="Log progress to stderr.")
@click.version_option(__version__, prog_name="onlinerkhs")
@click.pass_context
def main(ctx, config_path, seed, out, threads, verbose):
    """Online regularized kernel learning under drifting input streams."""
    logging.basicConfig(level=logging.INFO if verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    ctx.obj = {"config": config_path, "seed": seed, "out": out, "threads": threads}


@main.command("validate-config")
@click.argument("path", required=False, type=click.Path(dir_okay=False))
@click.pass_context
def validate_config(ctx, path):
    """Check a config file and print ``ok`` or every problem found."""
    path = path or ctx.obj["config"]
    if not path:
        raise ConfigError("no config file given")
    cfg = _config(ctx) if path == ctx.obj["config"] else load_config(path)
    bad = cfg.problems()
    if bad:
        raise ConfigError("; ".join(bad))
    click.echo(f"ok {cfg.digest()}")


@main.command("run")
@click.option("--tau1", type=float, default=None)
@click.option("--tau2", type=float, default=None)
@click.option("--horizon", "-T", type=int, default=None)
@click.option("--runs", "-R", type=int, default=None)
@click.option("--record-every", type=int, default=None)
@click.option("--log-y", is_flag=True, help="Log-scaled y axis on the chart.")
@click.option("--same-run-ids", is_flag=True, default=None,
              help="Diagnostic: give every run the same random stream.")
@click.pass_context
def run_cmd(ctx, tau1, tau2, horizon, runs, record_every, log_y, same_run_ids):
    """Monte-Carlo learner runs; writes mse.csv, trajectories.csv, mse.svg."""
    cfg = _config(ctx, tau1=tau1, tau2=tau2, horizon=horizon, runs=runs,
                  record_every=record_every, same_run_ids=same_run_ids or None,
                  output=ctx.obj["out"])
    result = run_experiment(cfg)
    paths = write_outputs(result, cfg.output, log_y)
    click.echo(f"wrote {paths['mse']} ({result.runs} runs, config {result.metadata['config_hash']})")


@main.command("reproduce-paper")
@click.option("--horizon", "-T", type=int, default=5000, show_default=True)
@click.option("--runs", "-R", type=int, default=50, show_default=True)
@click.option("--log-y", is_flag=True)
@click.pass_context
def reproduce_cmd(ctx, horizon, runs, log_y):
    """Shifting-uniform benchmark with the default schedule and noise."""
    out = ctx.obj["out"] or "results"
    result = reproduce_paper(out, horizon=horizon, runs=runs,
                             threads=ctx.obj["threads"] or 1, seed=ctx.obj["seed"] or 0,
                             log_y=log_y)
    mean = result.mean
    click.echo(f"wrote {out} ({result.runs} runs)")
    for k in sorted({int(result.steps[0]), 50, 2000, int(result.steps[-1])}):
        i = int(np.searchsorted(result.steps, k))
        if i < result.steps.size and result.steps[i] == k:
            click.echo(f"mse({k})={mean[i]!r}")


def _int_list(text: str) -> List[int]:
    try:
        return [int(t) for t in text.split(",") if t.strip()]
    except ValueError as exc:
        raise click.BadParameter(f"expected comma-separated integers: {text}") from exc


@main.command("path")
@click.option("--ks", default="0,1,2,5,10,100,1000", show_default=True,
              help="Comma-separated step indices.")
@click.option("--grid-n", type=int, default=None)
@click.option("--tau1", type=float, default=None)
@click.option("--tau2", type=float, default=None)
@click.pass_context
def path_cmd(ctx, ks, grid_n, tau1, tau2):
    """Regularization path norms, errors and drifts."""
    cfg = _config(ctx, grid_n=grid_n, tau1=tau1, tau2=tau2).validate()
    spec = cfg.build_stream()
    rows = path_table(spec.kernel, spec, cfg.schedule(), _int_list(ks), cfg.grid_n)
    _emit(((r.k, r.lambda_k, r.path_norm, r.approx_error, r.drift, r.drift_over_ak_lk)
           for r in rows),
          ("k", "lambda_k", "path_norm", "approx_error", "drift", "drift_over_ak_lk"),
          ctx.obj["out"])


@main.command("pe-check")
@click.option("--window", "-h", "h", type=int, default=2, show_default=True)
@click.option("--j-max", type=int, default=10, show_default=True)
@click.option("--k-min", type=int, default=0, show_default=True)
@click.option("--k-max", type=int, default=200, show_default=True)
@click.option("--gamma", type=float, default=0.5, show_default=True)
@click.option("--grid-n", type=int, default=None)
@click.pass_context
def pe_cmd(ctx, h, j_max, k_min, k_max, gamma, grid_n):
    """Windowed eigenvalues per k and mode, then a summary block."""
    cfg = _config(ctx, grid_n=grid_n).validate()
    spec = cfg.build_stream()
    ks = range(k_min, k_max + 1)
    rows = [(k, j + 1, lam) for k, vals in
            window_spectra(spec.kernel, spec, h, j_max, ks, cfg.grid_n)
            for j, lam in enumerate(vals)]
    report = eigen_floor(spec.kernel, spec, h, j_max, (k_min, k_max), cfg.grid_n)
    dom = measure_pe_check(spec, h, gamma, (k_min, k_max))
    trailer = [f"# window={h} k_range=[{k_min},{k_max}] floor={report.floor_tolerance!r}"]
    trailer += [f"# inf j={j + 1}: {float(v)!r} at k={int(report.argmin_k[j])}"
                for j, v in enumerate(report.per_j_infimum)]
    trailer.append(f"# eigen_floor: {'pass' if report.excited else 'fail'}")
    verdict = "pass" if dom.verdict else f"fail at k={dom.first_failing_k}"
    trailer.append(f"# measure_domination gamma={gamma!r}: {verdict}")
    _emit(rows, ("k", "j", "lambda_j"), ctx.obj["out"], trailer)


@main.command("decompose")
@click.option("--horizon", "-T", type=int, default=300, show_default=True)
@click.option("--runs", "-R", type=int, default=5, show_default=True)
@click.option("--record-every", type=int, default=1, show_default=True)
@click.option("--grid-n", type=int, default=None)
@click.pass_context
def decompose_cmd(ctx, horizon, runs, record_every, grid_n):
    """Tracking error split into noise and drift parts, per run and step."""
    cfg = _config(ctx, grid_n=grid_n).validate()
    spec = cfg.build_stream()
    tr = simulate_decomposition(spec.kernel, spec, cfg.schedule(), horizon, cfg.grid_n,
                                run_ids=range(runs), record_every=record_every)
    rows = [(int(tr.run_ids[r]), int(k), tr.delta_norm[r, t], tr.m_norm[r, t],
             tr.d_norm[r, t], tr.identity_residual[r, t])
            for r in range(tr.run_ids.size) for t, k in enumerate(tr.steps)]
    _emit(rows, ("run_id", "k", "delta_norm", "m_norm", "d_norm", "identity_residual"),
          ctx.obj["out"],
          [f"# max relative residual {float(np.max(tr.relative_residual()))!r}"])


@main.command("bounds")
@click.option("--k-max", type=int, default=100000, show_default=True)
@click.option("--k-min", type=int, default=100, show_default=True)
@click.option("--points", type=int, default=40, show_default=True)
@click.option("--tau1", type=float, default=None)
@click.option("--tau2", type=float, default=None)
@click.pass_context
def bounds_cmd(ctx, k_max, k_min, points, tau1, tau2):
    """Scalar rate sums and their ratios to the polynomial envelopes."""
    cfg = _config(ctx, tau1=tau1, tau2=tau2)
    tab = rate_bound_suite(cfg.validate().schedule(), k_max, k_min, points)
    rows = zip(tab.ks, tab.sum_a, tab.ratio_a, tab.sum_b, tab.ratio_b,
               tab.product, tab.ratio_product)
    bounded = tab.bounded()
    _emit(rows, ("k", "sum_a", "ratio_a", "sum_b", "ratio_b", "product", "ratio_product"),
          ctx.obj["out"],
          [f"# bounded within 2x of k={k_min}: " +
           " ".join(f"{k}={'yes' if v else 'no'}" for k, v in bounded.items())])


if __name__ == "__main__":  # pragma: no cover
    main()

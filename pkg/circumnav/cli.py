#!/usr/bin/env python
# -*- coding: utf-8 -*-

"""
Command line entry point.

    python -m circumnav.cli run standoff_full_info --strict
    python -m circumnav.cli sweep heading_sweep --parallel 4
    python -m circumnav.cli validate my_scenario.json
    python -m circumnav.cli certificate standoff_output_feedback
    python -m circumnav.cli scenarios

Exit codes: 0 success, 1 scenario or runtime error, 2 gain validation failure.
"""

from __future__ import annotations

import json
import logging
from pathlib import Path

import click

from circumnav.analysis.lyapunov import estimator_certificate
from circumnav.analysis.metrics import compute_metrics
from circumnav.config import ScenarioLoader, apply_overrides, configure_logging
from circumnav.control.guidance import ControllerMode, validate_gains
from circumnav.errors import CircumnavError, GainConditionViolated
from circumnav.report.export import export_run
from circumnav.sim.dynamics import run as run_simulation
from circumnav.sweep import run_sweep, write_sweep_csv

logger = logging.getLogger(__name__)

EXIT_ERROR = 1
EXIT_GAINS = 2


def _fail(message: str, code: int = EXIT_ERROR) -> None:
    click.echo(f"error: {message}", err=True)
    raise SystemExit(code)


def _load(ctx, scenario, **overrides):
    loader = ctx.obj["loader"]
    loaded = loader.load(scenario)
    if any(v is not None for v in overrides.values()):
        loaded = apply_overrides(loaded, **overrides)
    return loaded


def _dump(payload: dict) -> str:
    return json.dumps(payload, ensure_ascii=False, indent=2)


def scenario_options(f):
    f = click.option("--reset-mode", type=click.Choice(["paper", "theory", "none"]), default=None,
                     help="Estimator reset applied when leaving the aim circle.")(f)
    f = click.option("--out", type=click.Path(), default=None, help="Output prefix for written artifacts.")(f)
    f = click.option("--duration", type=float, default=None, help="Simulated seconds.")(f)
    f = click.option("--step", type=float, default=None, help="Integration step in seconds.")(f)
    f = click.option("--strict", is_flag=True, default=False, help="Treat any failed gain condition as fatal.")(f)
    return f


@click.group()
@click.option("-v", "--verbose", is_flag=True, help="Debug logging.")
@click.pass_context
def cli(ctx, verbose):
    """Range-only circumnavigation guidance simulator."""
    try:
        loader = ScenarioLoader()
    except CircumnavError as e:
        _fail(str(e))
    configure_logging("DEBUG" if verbose else loader.log_level)
    ctx.obj = {"loader": loader}


@cli.command()
def scenarios():
    """List bundled scenarios."""
    for name in ScenarioLoader.bundled():
        click.echo(name)


@cli.command()
@click.argument("scenario")
@scenario_options
@click.pass_context
def run(ctx, scenario, strict, step, duration, out, reset_mode):
    """Run one scenario and write its artifacts."""
    try:
        loaded = _load(ctx, scenario, step=step, duration=duration, out=out,
                       strict=True if strict else None, reset_mode=reset_mode)
        trajectory, events = run_simulation(loaded.config)
        settings = loaded.analysis
        metrics = compute_metrics(
            trajectory, events, loaded.config,
            band=settings.settling_band, range_tol=settings.range_tol, rate_tol=settings.rate_tol,
        )
        export_run(trajectory, events, metrics, loaded.config, loaded.output_prefix, loaded.emit)
    except GainConditionViolated as e:
        _fail(f"{e}\n{_dump(e.report.to_dict())}", EXIT_GAINS)
    except (CircumnavError, ValueError, OSError) as e:
        _fail(str(e))
    click.echo(_dump(metrics.to_dict()))


@cli.command()
@click.argument("scenario")
@scenario_options
@click.option("--parallel", type=click.IntRange(min=1), default=1, show_default=True,
              help="Worker processes for the sweep.")
@click.pass_context
def sweep(ctx, scenario, strict, step, duration, out, reset_mode, parallel):
    """Run every point of a scenario's sweep grid into one CSV."""
    try:
        loaded = _load(ctx, scenario, step=step, duration=duration, out=out,
                       strict=True if strict else None, reset_mode=reset_mode)
        if not loaded.sweep:
            _fail(f"scenario '{loaded.name}' defines no sweep grid")
        frame = run_sweep(loaded, parallel=parallel)
        path = write_sweep_csv(frame, loaded.output_prefix)
    except (CircumnavError, ValueError, OSError) as e:
        _fail(str(e))
    failed = int((frame["error"].fillna("") != "").sum())
    click.echo(f"{len(frame)} points, {failed} failed -> {path}")


@cli.command()
@click.argument("scenario")
@click.option("--strict", is_flag=True, default=False, help="Fail on theorem-margin violations too.")
@click.pass_context
def validate(ctx, scenario, strict):
    """Check the gain conditions of a scenario without running it."""
    try:
        loaded = _load(ctx, scenario)
    except (CircumnavError, ValueError) as e:
        _fail(str(e))
    config = loaded.config
    est = config.estimator if config.controller_mode is ControllerMode.OUTPUT_FEEDBACK else None
    _, v_max = config.speed_bounds()
    report = validate_gains(config.guidance, est, mode=config.controller_mode, v_max=v_max)
    click.echo(_dump(report.to_dict()))
    if report.hard_failures or ((strict or config.strict) and not report.ok):
        raise SystemExit(EXIT_GAINS)


@cli.command()
@click.argument("scenario")
@click.option("--out", type=click.Path(), default=None, help="Also write the certificate JSON here.")
@click.pass_context
def certificate(ctx, scenario, out):
    """Emit the estimator Lyapunov certificate for a scenario's gains."""
    try:
        loaded = _load(ctx, scenario)
        config = loaded.config
        if config.estimator is None:
            _fail(f"scenario '{loaded.name}' has no estimator gains")
        _, v_max = config.speed_bounds()
        payload = estimator_certificate(config.guidance, config.estimator, v_max=v_max).to_dict()
    except (CircumnavError, ValueError) as e:
        _fail(str(e))
    text = _dump(payload)
    if out:
        path = Path(out)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text + "\n", encoding="utf-8")
        logger.info(f"wrote {path}")
    click.echo(text)


def main():
    cli()


if __name__ == "__main__":
    main()

#!/usr/bin/env python
# -*- coding: utf-8 -*-

"""
Parameter sweeps: expand a scenario grid, run every point, aggregate one
metrics row per point ordered by grid index.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import fields
from itertools import product
from pathlib import Path
from typing import Any, Dict, List, Tuple
import copy
import logging

import pandas as pd

from circumnav.analysis.metrics import RunMetrics, compute_metrics
from circumnav.config import ScenarioFile, ScenarioLoader, set_path
from circumnav.errors import ValidationError
from circumnav.sim.dynamics import run

logger = logging.getLogger(__name__)

METRIC_COLUMNS = [f.name for f in fields(RunMetrics)]


def expand_grid(scenario: ScenarioFile) -> List[Tuple[int, Dict[str, Any]]]:
    """
    Cartesian product of the sweep grid, in row-major order of the grid keys.

    Returns:
        list of (index, {dotted field: value})
    """
    grid = scenario.sweep
    if not grid or any(len(values) == 0 for values in grid.values()):
        raise ValidationError(["sweep.grid: must be a non-empty mapping of field -> non-empty values"])
    keys = list(grid)
    return [(i, dict(zip(keys, combo))) for i, combo in enumerate(product(*(grid[k] for k in keys)))]


def _point_raw(scenario: ScenarioFile, assignment: Dict[str, Any]) -> dict:
    raw = copy.deepcopy(scenario.raw)
    raw.pop("sweep", None)
    for path, value in assignment.items():
        set_path(raw, path, value)
    return raw


def run_point(job: Tuple[int, Dict[str, Any], dict, str]) -> Dict[str, Any]:
    """Run one grid point; failures are reported in the row instead of raised."""
    index, assignment, raw, name = job
    row: Dict[str, Any] = {"index": index, **{path: value for path, value in assignment.items()}}
    try:
        point = ScenarioLoader(defaults={}).from_dict(raw, default_name=name)
        trajectory, events = run(point.config)
        settings = point.analysis
        metrics = compute_metrics(
            trajectory, events, point.config,
            band=settings.settling_band, range_tol=settings.range_tol, rate_tol=settings.rate_tol,
        )
        row.update(metrics.to_dict())
        row["error"] = ""
    except Exception as e:
        logger.warning(f"sweep point {index} failed: {e}")
        row["error"] = f"{type(e).__name__}: {e}"
    return row


def run_sweep(scenario: ScenarioFile, parallel: int = 1) -> pd.DataFrame:
    """
    Execute every grid point on at most `parallel` worker processes.

    Args:
        scenario: scenario with a sweep grid
        parallel: worker count; 1 runs in-process

    Returns:
        DataFrame with one row per grid point sorted by index
    """
    points = expand_grid(scenario)
    jobs = [(i, assignment, _point_raw(scenario, assignment), scenario.name) for i, assignment in points]
    logger.info(f"sweep '{scenario.name}': {len(jobs)} points, {parallel} worker(s)")

    if parallel <= 1:
        rows = [run_point(job) for job in jobs]
    else:
        with ProcessPoolExecutor(max_workers=parallel) as pool:
            rows = list(pool.map(run_point, jobs))

    columns = ["index", *scenario.sweep.keys(), *METRIC_COLUMNS, "error"]
    frame = pd.DataFrame(rows).reindex(columns=columns)
    return frame.sort_values("index", kind="stable").reset_index(drop=True)


def write_sweep_csv(frame: pd.DataFrame, prefix) -> Path:
    path = Path(f"{prefix}_sweep.csv")
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False, float_format="%.17g", na_rep="", lineterminator="\n")
    logger.info(f"wrote {path}")
    return path

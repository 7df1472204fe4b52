#!/usr/bin/env python
# -*- coding: utf-8 -*-

"""
Artifact writers for a finished run.

Generates, under a common output prefix:
- <prefix>_trajectory.csv
- <prefix>_events.csv
- <prefix>_metrics.json
- <prefix>_lyapunov.csv
- <prefix>_certificate.json
"""

from __future__ import annotations

from pathlib import Path
from typing import Dict, Iterable, List, Optional
import json
import logging

import pandas as pd

from circumnav.analysis.lyapunov import (
    estimator_certificate,
    estimator_lyapunov_series,
    lyapunov_series,
)
from circumnav.analysis.metrics import RunMetrics
from circumnav.sim.dynamics import CrossingEvent, SimConfig, Trajectory
from circumnav.sim.geometry import CartesianState

logger = logging.getLogger(__name__)

ARTIFACTS = ("trajectory_csv", "events_csv", "metrics_json", "lyapunov_csv", "certificate_json")

# 17 significant digits round-trip every double exactly
_CSV_OPTIONS = dict(index=False, float_format="%.17g", na_rep="", lineterminator="\n")


def _target(prefix: Path, suffix: str) -> Path:
    path = Path(f"{prefix}_{suffix}")
    path.parent.mkdir(parents=True, exist_ok=True)
    return path


def _write_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(payload, ensure_ascii=False, indent=2) + "\n", encoding="utf-8")


def trajectory_frame(trajectory: Trajectory) -> pd.DataFrame:
    frame = trajectory.to_frame()
    frame["inside_Ca"] = frame["inside_Ca"].astype(int)
    return frame


def events_frame(events: Iterable[CrossingEvent]) -> pd.DataFrame:
    rows = []
    for ev in events:
        state = ev.state_at_event
        x, y = (state.x, state.y) if isinstance(state, CartesianState) else (float("nan"), float("nan"))
        rows.append({"kind": ev.kind.value, "t": ev.time, "x": x, "y": y, "r": ev.r})
    return pd.DataFrame(rows, columns=["kind", "t", "x", "y", "r"])


def lyapunov_frame(trajectory: Trajectory, config: SimConfig) -> pd.DataFrame:
    """Guidance Lyapunov value per sample, plus the estimator one when an estimator runs."""
    frame = pd.DataFrame({
        "t": trajectory.column("t"),
        "guidance": lyapunov_series(trajectory.column("r"), trajectory.column("theta"), config.guidance),
    })
    if config.estimator is not None:
        frame["estimator"] = estimator_lyapunov_series(trajectory, config.estimator)
    return frame


def write_trajectory_csv(trajectory: Trajectory, prefix: Path) -> Path:
    path = _target(prefix, "trajectory.csv")
    trajectory_frame(trajectory).to_csv(path, **_CSV_OPTIONS)
    return path


def write_events_csv(events: List[CrossingEvent], prefix: Path) -> Path:
    path = _target(prefix, "events.csv")
    events_frame(events).to_csv(path, **_CSV_OPTIONS)
    return path


def write_metrics_json(metrics: RunMetrics, prefix: Path) -> Path:
    path = _target(prefix, "metrics.json")
    _write_json(path, metrics.to_dict())
    return path


def write_lyapunov_csv(trajectory: Trajectory, config: SimConfig, prefix: Path) -> Path:
    path = _target(prefix, "lyapunov.csv")
    lyapunov_frame(trajectory, config).to_csv(path, **_CSV_OPTIONS)
    return path


def write_certificate_json(config: SimConfig, prefix: Path) -> Optional[Path]:
    if config.estimator is None:
        logger.warning("certificate_json requested for a run without estimator gains - skipped")
        return None
    _, v_max = config.speed_bounds()
    cert = estimator_certificate(config.guidance, config.estimator, v_max=v_max)
    path = _target(prefix, "certificate.json")
    _write_json(path, cert.to_dict())
    return path


def export_run(
    trajectory: Trajectory,
    events: List[CrossingEvent],
    metrics: RunMetrics,
    config: SimConfig,
    prefix,
    emit: Iterable[str],
) -> Dict[str, Path]:
    """Write every requested artifact and return their paths keyed by artifact name."""
    prefix = Path(prefix)
    written: Dict[str, Path] = {}
    for name in emit:
        if name == "trajectory_csv":
            path = write_trajectory_csv(trajectory, prefix)
        elif name == "events_csv":
            path = write_events_csv(events, prefix)
        elif name == "metrics_json":
            path = write_metrics_json(metrics, prefix)
        elif name == "lyapunov_csv":
            path = write_lyapunov_csv(trajectory, config, prefix)
        elif name == "certificate_json":
            path = write_certificate_json(config, prefix)
        else:
            raise ValueError(f"unknown artifact {name!r}")
        if path is not None:
            written[name] = path
            logger.info(f"wrote {path}")
    return written

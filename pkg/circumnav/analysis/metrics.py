#!/usr/bin/env python
# -*- coding: utf-8 -*-

"""Scalar summaries of a finished run, written to metrics JSON and sweep rows."""

from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import List, Optional
import math

import numpy as np

from circumnav.control.guidance import ControllerMode
from circumnav.sim.dynamics import CrossingEvent, CrossingKind, SimConfig, Trajectory


@dataclass
class RunMetrics:
    settling_time_to_band: Optional[float]
    final_radius_error: float
    max_abs_omega: float
    num_Ca_entries: int
    estimator_convergence_time: Optional[float] = None
    estimator_active_convergence_time: Optional[float] = None
    final_bearing_error: float = math.nan
    mean_settled_radius: float = math.nan
    max_coast_duration: float = 0.0
    coast_duration_bound: float = math.inf
    omega_bound: float = math.inf

    def to_dict(self) -> dict:
        out = asdict(self)
        # JSON has no inf/nan
        for key, value in out.items():
            if isinstance(value, float) and not math.isfinite(value):
                out[key] = None
        return out


def _settling_time(t: np.ndarray, err: np.ndarray, band: float) -> Optional[float]:
    outside = np.flatnonzero(err >= band)
    if len(outside) == 0:
        return float(t[0])
    last = outside[-1]
    if last + 1 >= len(t):
        return None
    return float(t[last + 1])


def _estimator_convergence(
    t: np.ndarray,
    ok: np.ndarray,
    frozen: np.ndarray,
) -> Optional[int]:
    """Index of the first active sample after which every active sample is within tolerance."""
    active = ~frozen
    bad = np.flatnonzero(active & ~ok)
    if len(bad) == 0:
        first = np.flatnonzero(active)
        return int(first[0]) if len(first) else None
    candidates = np.flatnonzero(active[bad[-1] + 1:])
    if len(candidates) == 0:
        return None
    return int(bad[-1] + 1 + candidates[0])


def coast_durations(events: List[CrossingEvent], t_end: float) -> List[float]:
    """Time spent inside C_a per visit; an unfinished visit runs to t_end."""
    out: List[float] = []
    entered = None
    for ev in events:
        if ev.kind is CrossingKind.ENTRY:
            entered = ev.time
        elif entered is not None:
            out.append(ev.time - entered)
            entered = None
    if entered is not None:
        out.append(t_end - entered)
    return out


def compute_metrics(
    trajectory: Trajectory,
    events: List[CrossingEvent],
    config: SimConfig,
    band: float = 0.005,
    range_tol: float = 1e-3,
    rate_tol: float = 1e-3,
) -> RunMetrics:
    """
    Extract RunMetrics from a completed run.

    Args:
        trajectory: recorded samples
        events: crossing events of the run
        config: the configuration that produced them
        band: settling band as a fraction of r_d
        range_tol: |xhat1 - r| tolerance for estimator convergence
        rate_tol: |xhat2 - r_dot| tolerance for estimator convergence
    """
    params = config.guidance
    t = trajectory.column("t")
    r = trajectory.column("r")
    theta = trajectory.column("theta")
    omega = trajectory.column("omega")
    inside = trajectory.column("inside_Ca")
    v_min, v_max = config.speed_bounds()

    err = np.abs(r - params.r_d)
    settling = _settling_time(t, err, band * params.r_d)
    if settling is not None:
        window = r[t >= max(settling, 0.75 * t[-1])]
    else:
        window = r[t >= 0.75 * t[-1]]

    metrics = RunMetrics(
        settling_time_to_band=settling,
        final_radius_error=float(err[-1]),
        max_abs_omega=float(np.max(np.abs(omega))),
        num_Ca_entries=sum(1 for ev in events if ev.kind is CrossingKind.ENTRY),
        final_bearing_error=float(abs(theta[-1] - math.pi / 2.0)),
        mean_settled_radius=float(np.mean(window)) if len(window) else math.nan,
        coast_duration_bound=2.0 * params.r_a / v_min,
    )
    coasts = coast_durations(events, float(t[-1]))
    metrics.max_coast_duration = max(coasts) if coasts else 0.0

    if config.controller_mode is ControllerMode.OUTPUT_FEEDBACK:
        xhat1 = trajectory.column("xhat1")
        xhat2 = trajectory.column("xhat2")
        r_dot = trajectory.column("r_dot")
        metrics.omega_bound = params.k * (v_max + float(np.max(np.abs(xhat2))))
        ok = (np.abs(xhat1 - r) < range_tol) & (np.abs(xhat2 - r_dot) < rate_tol)
        idx = _estimator_convergence(t, ok, inside)
        if idx is not None:
            metrics.estimator_convergence_time = float(t[idx])
            dt = np.diff(t[: idx + 1])
            active = ~inside[:idx]
            metrics.estimator_active_convergence_time = float(dt[active].sum())
    else:
        metrics.omega_bound = 2.0 * params.k * v_max
    return metrics

#!/usr/bin/env python
# -*- coding: utf-8 -*-

"""
Switching circumnavigation controllers and their parameter checks.

Outside the aim circle C_a (r >= r_a) the turn rate steers the range rate
toward the rate obtained when flying at a tangent point of C_a:

    omega = k [V cos(pi - asin(r_a / r)) - r_dot]

Inside C_a the UAV coasts on a straight line (omega = 0).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from enum import Enum
from typing import List, Optional
import math
import logging

from circumnav.errors import InvalidGain

logger = logging.getLogger(__name__)

class Branch(str, Enum):
    ACTIVE = "active"
    COAST = "coast"


class ControllerMode(str, Enum):
    FULL_INFORMATION = "full_information"
    OUTPUT_FEEDBACK = "output_feedback"


def compute_r_a(r_d: float, k: float) -> float:
    """Aim radius that places the stable circle exactly on r_d."""
    if r_d <= 0.0 or k <= 0.0:
        raise InvalidGain(f"r_d and k must be positive (r_d={r_d}, k={k})")
    # tested on k r_d: at k = 1/r_d the radicand rounds to a tiny positive value
    if k * r_d <= 1.0:
        raise InvalidGain(f"k={k} must exceed 1/r_d={1.0 / r_d}")
    return math.sqrt(r_d * r_d - 1.0 / (k * k))


def stable_radius(r_a: float, k: float) -> float:
    """Radius of the circular motion produced by an aim radius r_a."""
    return math.sqrt(r_a * r_a + 1.0 / (k * k))


@dataclass(frozen=True)
class GuidanceParams:
    r_d: float
    k: float
    V: float

    @cached_property
    def r_a(self) -> float:
        return compute_r_a(self.r_d, self.k)


@dataclass(frozen=True)
class ControlDecision:
    omega: float
    branch: Branch


def _tangent_rate(r: float, r_a: float, speed: float) -> float:
    # clamp only absorbs round-off on the switching surface
    ratio = min(1.0, r_a / r)
    return speed * math.cos(math.pi - math.asin(ratio))


def switching_turn_rate(r: float, r_dot: float, k: float, r_a: float, speed: float) -> float:
    """Turn rate of the switching law from already derived k and r_a."""
    if r < r_a:
        return 0.0
    return k * (_tangent_rate(r, r_a, speed) - r_dot)


def full_information_control(
    r: float,
    r_dot: float,
    params: GuidanceParams,
    speed: Optional[float] = None,
) -> ControlDecision:
    """
    Range + range-rate controller.

    Args:
        r: measured range
        r_dot: measured range rate
        params: guidance parameters
        speed: current airspeed when it differs from the nominal params.V
    """
    r_a = params.r_a
    v = params.V if speed is None else speed
    omega = switching_turn_rate(r, r_dot, params.k, r_a, v)
    return ControlDecision(omega=omega, branch=Branch.COAST if r < r_a else Branch.ACTIVE)


def output_feedback_control(
    r: float,
    xhat2: float,
    params: GuidanceParams,
    speed: Optional[float] = None,
) -> ControlDecision:
    """Same law with the range rate replaced by its estimate."""
    return full_information_control(r, xhat2, params, speed=speed)


@dataclass(frozen=True)
class GainCheck:
    name: str
    margin: float
    passed: bool
    hard: bool = False
    detail: str = ""


@dataclass
class ValidationReport:
    mode: ControllerMode
    checks: List[GainCheck] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return all(c.passed for c in self.checks)

    @property
    def failures(self) -> List[GainCheck]:
        return [c for c in self.checks if not c.passed]

    @property
    def hard_failures(self) -> List[GainCheck]:
        return [c for c in self.checks if not c.passed and c.hard]

    def to_dict(self) -> dict:
        return {
            "mode": self.mode.value,
            "ok": self.ok,
            "checks": [
                {"name": c.name, "margin": c.margin, "passed": c.passed, "hard": c.hard, "detail": c.detail}
                for c in self.checks
            ],
        }


def estimator_perturbation_bounds(params: GuidanceParams, r_a: float, v_max: Optional[float] = None):
    """(delta1, delta2) bounding the range acceleration seen by the estimator outside C_a."""
    v = params.V if v_max is None else v_max
    return v * v * (2.0 * params.k + 1.0 / r_a), params.k * v


def k2_threshold(params: GuidanceParams, k1: float, r_a: float, v_max: Optional[float] = None) -> float:
    delta1, delta2 = estimator_perturbation_bounds(params, r_a, v_max)
    return max(1.0 + delta1 * delta1 / k1, 0.5 * delta2 * delta2 + 2.0 * delta2)


def validate_gains(
    params: GuidanceParams,
    est=None,
    mode: Optional[ControllerMode] = None,
    v_max: Optional[float] = None,
) -> ValidationReport:
    """
    Evaluate every gain inequality and report margins.

    Full-information mode requires k > 1/r_d. Output-feedback mode requires
    k > 1/r_a and the estimator gain conditions. The mode defaults to
    output feedback whenever estimator gains are supplied.
    """
    if mode is None:
        mode = ControllerMode.OUTPUT_FEEDBACK if est is not None else ControllerMode.FULL_INFORMATION
    report = ValidationReport(mode=mode)
    checks = report.checks

    for name, value in (("r_d > 0", params.r_d), ("k > 0", params.k), ("V > 0", params.V)):
        checks.append(GainCheck(name=name, margin=float(value), passed=value > 0.0, hard=True))
    if any(not c.passed for c in checks):
        return report

    radicand = params.r_d ** 2 - 1.0 / params.k ** 2
    above = params.k * params.r_d > 1.0
    checks.append(GainCheck(
        name="k > 1/r_d",
        margin=params.k - 1.0 / params.r_d,
        passed=above,
        hard=True,
        detail=f"r_d^2 - 1/k^2 = {radicand:.6g}",
    ))
    if not above:
        return report
    r_a = math.sqrt(radicand)

    if mode is ControllerMode.OUTPUT_FEEDBACK:
        checks.append(GainCheck(name="k > 1/r_a", margin=params.k - 1.0 / r_a, passed=params.k > 1.0 / r_a))
        if est is None:
            checks.append(GainCheck(name="estimator gains present", margin=0.0, passed=False, hard=True))
            return report
        for name, value in (("k1 > 0", est.k1), ("k2 > 0", est.k2), ("k3 > 0", est.k3)):
            checks.append(GainCheck(name=name, margin=float(value), passed=value > 0.0, hard=True))
        if est.k1 > 0.0:
            threshold = k2_threshold(params, est.k1, r_a, v_max)
            checks.append(GainCheck(
                name="k2 > max{1 + delta1^2/k1, delta2^2/2 + 2 delta2}",
                margin=est.k2 - threshold,
                passed=est.k2 > threshold,
                detail=f"threshold = {threshold:.6f}",
            ))

    for c in report.failures:
        logger.debug(f"gain check failed: {c.name} (margin {c.margin:.6g})")
    return report

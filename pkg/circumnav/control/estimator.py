#!/usr/bin/env python
# -*- coding: utf-8 -*-

"""
Sliding-mode range-rate estimator driven by range measurements only.

Outside C_a:
    xhat1' = xhat2 + k1 |e|^(1/2) sgn(e)
    xhat2' = k2 sgn(e) + k3 e,          e = r - xhat1

Inside C_a both estimates are frozen. On exit xhat2 is negated and xhat1 is
reflected about a reset constant (r_d or r_a, see ResetMode).
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from enum import Enum
from typing import Optional, Tuple
import math

from circumnav.control.guidance import GuidanceParams
from circumnav.errors import AlreadyFrozen, NotFrozen


class ResetMode(str, Enum):
    PAPER_LITERAL_RD = "paper"       # xhat1 <- 2 r_d - xhat1
    THEORY_CONSISTENT_RA = "theory"  # xhat1 <- 2 r_a - xhat1
    NONE = "none"                    # unfreeze only, no reflection

    @classmethod
    def parse(cls, value: str) -> "ResetMode":
        for mode in cls:
            if value == mode.value or value == mode.name:
                return mode
        raise ValueError(f"unknown reset mode {value!r} (expected paper, theory or none)")


@dataclass(frozen=True)
class EstimatorParams:
    k1: float
    k2: float
    k3: float
    reset_mode: ResetMode = ResetMode.THEORY_CONSISTENT_RA
    initial: Optional[Tuple[float, float]] = None  # (xhat1, xhat2); default (r(0), 0)


@dataclass(frozen=True)
class EstimatorState:
    xhat1: float
    xhat2: float
    frozen: bool = False


def sgn(e: float) -> float:
    if e > 0.0:
        return 1.0
    if e < 0.0:
        return -1.0
    return 0.0


def observer_rates(e: float, xhat2: float, k1: float, k2: float, k3: float) -> Tuple[float, float]:
    """(xhat1', xhat2') for the range error e = r - xhat1."""
    s = sgn(e)
    return xhat2 + k1 * math.sqrt(abs(e)) * s, k2 * s + k3 * e


def estimator_rhs(est: EstimatorState, r: float, params: EstimatorParams) -> Tuple[float, float]:
    if est.frozen:
        return 0.0, 0.0
    return observer_rates(r - est.xhat1, est.xhat2, params.k1, params.k2, params.k3)


def initial_state(params: EstimatorParams, r0: float) -> EstimatorState:
    if params.initial is not None:
        xhat1, xhat2 = params.initial
        return EstimatorState(xhat1=float(xhat1), xhat2=float(xhat2))
    return EstimatorState(xhat1=r0, xhat2=0.0)


def freeze(est: EstimatorState) -> EstimatorState:
    if est.frozen:
        raise AlreadyFrozen("estimator is already frozen")
    return replace(est, frozen=True)


def reset_constant(params: EstimatorParams, guidance: GuidanceParams) -> Optional[float]:
    if params.reset_mode is ResetMode.PAPER_LITERAL_RD:
        return guidance.r_d
    if params.reset_mode is ResetMode.THEORY_CONSISTENT_RA:
        return guidance.r_a
    return None


def reset_at_exit(est: EstimatorState, params: EstimatorParams, guidance: GuidanceParams) -> EstimatorState:
    if not est.frozen:
        raise NotFrozen("reset requested while the estimator is running")
    center = reset_constant(params, guidance)
    if center is None:
        return replace(est, frozen=False)
    return EstimatorState(xhat1=2.0 * center - est.xhat1, xhat2=-est.xhat2, frozen=False)

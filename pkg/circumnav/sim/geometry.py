#!/usr/bin/env python
# -*- coding: utf-8 -*-

"""
World-frame and target-relative representations of the UAV state.

The bearing theta is the counterclockwise angle from the UAV->target vector
to the UAV heading, so that the range rate is always -V cos(theta).
"""

from __future__ import annotations

from dataclasses import dataclass
import math

from circumnav.errors import ZeroRange

TWO_PI = 2.0 * math.pi

# Below this range the UAV is treated as sitting on the target.
ZERO_RANGE_EPS = 1e-9


@dataclass(frozen=True)
class TargetPosition:
    x_T: float
    y_T: float


@dataclass(frozen=True)
class CartesianState:
    x: float
    y: float
    psi: float  # unwrapped heading


@dataclass(frozen=True)
class PolarState:
    r: float
    theta: float


def wrap_angle(a: float) -> float:
    """Map an angle onto [0, 2*pi)."""
    w = math.fmod(a, TWO_PI)
    if w < 0.0:
        w += TWO_PI
    # fmod of a tiny negative number can round up to exactly 2*pi
    if w >= TWO_PI:
        w = 0.0
    return w


def target_range(state: CartesianState, target: TargetPosition) -> float:
    return math.hypot(state.x - target.x_T, state.y - target.y_T)


def line_of_sight(state: CartesianState, target: TargetPosition) -> float:
    """Angle of the UAV->target vector in the world frame."""
    return math.atan2(target.y_T - state.y, target.x_T - state.x)


def bearing(state: CartesianState, target: TargetPosition) -> float:
    if target_range(state, target) < ZERO_RANGE_EPS:
        raise ZeroRange(f"UAV at ({state.x}, {state.y}) coincides with target")
    return wrap_angle(state.psi - line_of_sight(state, target))


def to_polar(state: CartesianState, target: TargetPosition) -> PolarState:
    r = target_range(state, target)
    if r < ZERO_RANGE_EPS:
        raise ZeroRange(f"UAV at ({state.x}, {state.y}) coincides with target")
    return PolarState(r=r, theta=wrap_angle(state.psi - line_of_sight(state, target)))


def from_polar(polar: PolarState, target: TargetPosition, position_angle: float) -> CartesianState:
    """
    Rebuild a Cartesian pose from (r, theta).

    Args:
        polar: range and bearing relative to the target
        target: target location
        position_angle: angle of the target->UAV vector in the world frame

    Returns:
        CartesianState whose heading is wrapped to [0, 2*pi)
    """
    x = target.x_T + polar.r * math.cos(position_angle)
    y = target.y_T + polar.r * math.sin(position_angle)
    los = position_angle + math.pi  # UAV->target direction
    return CartesianState(x=x, y=y, psi=wrap_angle(los + polar.theta))


def range_rate(theta: float, speed: float) -> float:
    return -speed * math.cos(theta)


def in_capture_cone(polar: PolarState, r_a: float) -> bool:
    """True when theta lies strictly between asin(r_a/r) and 2*pi - asin(r_a/r) outside C_a."""
    if polar.r < r_a:
        return False
    edge = math.asin(min(1.0, r_a / polar.r))
    return edge < polar.theta < TWO_PI - edge

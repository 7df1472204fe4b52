#!/usr/bin/env python
# -*- coding: utf-8 -*-

"""
Unicycle dynamics, fixed-step integration and the hybrid execution loop.

The control input is held constant over each integration step (zero-order
hold). Crossings of the aim circle C_a are localized by bisection and the
step is split there, so the estimator freeze/reset happens exactly at the
event and never inside an integration stage.

The integration loop works on plain float tuples (x, y, psi, xhat1, xhat2);
the dataclasses below are only built at the API boundary and at events.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Callable, Iterator, List, Optional, Tuple, Union
import logging
import math
import time

import numpy as np
import pandas as pd

from circumnav.control.estimator import (
    EstimatorParams,
    EstimatorState,
    freeze,
    initial_state as estimator_initial_state,
    observer_rates,
    reset_at_exit,
)
from circumnav.control.guidance import (
    ControllerMode,
    GuidanceParams,
    switching_turn_rate,
    validate_gains,
)
from circumnav.errors import GainConditionViolated, NoCrossing, ZeroRange
from circumnav.sim.geometry import (
    ZERO_RANGE_EPS,
    CartesianState,
    PolarState,
    TargetPosition,
    bearing,
    target_range,
    wrap_angle,
)

logger = logging.getLogger(__name__)

# Sub-intervals a single step may be split into by successive crossings.
_MAX_EVENTS_PER_STEP = 8

# (x, y, psi, xhat1, xhat2); the estimates are NaN when no estimator runs
FlowState = Tuple[float, float, float, float, float]


@dataclass(frozen=True)
class SpeedVariation:
    """Bounded airspeed V(t) = V (1 + amplitude sin(2 pi t / period))."""

    amplitude: float
    period: float

    def speed(self, nominal: float, t: float) -> float:
        return nominal * (1.0 + self.amplitude * math.sin(2.0 * math.pi * t / self.period))

    def bounds(self, nominal: float) -> Tuple[float, float]:
        return nominal * (1.0 - self.amplitude), nominal * (1.0 + self.amplitude)


@dataclass(frozen=True)
class SimConfig:
    target: TargetPosition
    initial_state: CartesianState
    guidance: GuidanceParams
    estimator: Optional[EstimatorParams] = None
    step_size: float = 1e-3
    duration: float = 300.0
    event_tolerance: float = 1e-9
    controller_mode: ControllerMode = ControllerMode.FULL_INFORMATION
    strict: bool = False
    speed_variation: Optional[SpeedVariation] = None

    def __post_init__(self):
        if not self.step_size > 0.0:
            raise ValueError(f"step_size must be positive, got {self.step_size}")
        if not self.duration > 0.0:
            raise ValueError(f"duration must be positive, got {self.duration}")
        if not self.event_tolerance > 0.0:
            raise ValueError(f"event_tolerance must be positive, got {self.event_tolerance}")
        if self.controller_mode is ControllerMode.OUTPUT_FEEDBACK and self.estimator is None:
            raise ValueError("output feedback requires estimator parameters")

    def speed_at(self, t: float) -> float:
        if self.speed_variation is None:
            return self.guidance.V
        return self.speed_variation.speed(self.guidance.V, t)

    def speed_bounds(self) -> Tuple[float, float]:
        if self.speed_variation is None:
            return self.guidance.V, self.guidance.V
        return self.speed_variation.bounds(self.guidance.V)


def step_count(duration: float, h: float) -> int:
    """
    Steps needed for the grid t = i*h to cover [0, duration].

    A duration that is not a multiple of h ends on the first grid time past it.
    """
    ratio = duration / h
    return max(1, math.ceil(ratio - 1e-9 * max(1.0, ratio)))


@dataclass(frozen=True)
class TrajectoryRecord:
    t: float
    state: CartesianState
    r: float
    theta: float
    r_dot: float
    omega: float
    xhat1: float
    xhat2: float
    inside_Ca: bool


class CrossingKind(str, Enum):
    ENTRY = "entry"
    EXIT = "exit"


@dataclass(frozen=True)
class CrossingEvent:
    kind: CrossingKind
    time: float
    state_at_event: Union[CartesianState, PolarState]
    r: float
    # (xhat1, xhat2) just before the freeze/reset is applied
    estimate: Optional[Tuple[float, float]] = None


class Trajectory:
    """Preallocated column store of TrajectoryRecord samples."""

    COLUMNS = ("t", "x", "y", "psi", "r", "theta", "r_dot", "omega", "xhat1", "xhat2", "inside_Ca")
    _FLOAT_COLUMNS = COLUMNS[:-1]

    def __init__(self, capacity: int):
        self._data = np.empty((capacity, len(self._FLOAT_COLUMNS)))
        self._inside = np.zeros(capacity, dtype=bool)
        self._size = 0

    def append(self, row: Tuple[float, ...], inside: bool) -> None:
        """Store one sample; row follows COLUMNS without inside_Ca."""
        i = self._size
        if i >= len(self._inside):
            raise IndexError(f"trajectory is full ({i} samples)")
        self._data[i] = row
        self._inside[i] = inside
        self._size = i + 1

    def __len__(self) -> int:
        return self._size

    def __getitem__(self, i: int) -> TrajectoryRecord:
        i = range(self._size)[i]
        t, x, y, psi, r, theta, r_dot, omega, xhat1, xhat2 = (float(v) for v in self._data[i])
        return TrajectoryRecord(
            t=t,
            state=CartesianState(x, y, psi),
            r=r,
            theta=theta,
            r_dot=r_dot,
            omega=omega,
            xhat1=xhat1,
            xhat2=xhat2,
            inside_Ca=bool(self._inside[i]),
        )

    def __iter__(self) -> Iterator[TrajectoryRecord]:
        for i in range(len(self)):
            yield self[i]

    def column(self, name: str) -> np.ndarray:
        if name == "inside_Ca":
            return self._inside[: self._size].copy()
        return self._data[: self._size, self._FLOAT_COLUMNS.index(name)].copy()

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({name: self.column(name) for name in self.COLUMNS}, columns=list(self.COLUMNS))


@dataclass(frozen=True)
class HybridState:
    t: float
    pose: CartesianState
    estimator: Optional[EstimatorState] = None


# --- right-hand sides ---

def cartesian_rhs(state: CartesianState, omega: float, V: float) -> Tuple[float, float, float]:
    return V * math.cos(state.psi), V * math.sin(state.psi), omega


def _polar_rates(r: float, theta: float, omega: float, V: float) -> Tuple[float, float]:
    return -V * math.cos(theta), omega + V * math.sin(theta) / r


def polar_rhs(state: PolarState, omega: float, V: float) -> Tuple[float, float]:
    if state.r < ZERO_RANGE_EPS:
        raise ZeroRange(f"polar dynamics are singular at r={state.r}")
    return _polar_rates(state.r, state.theta, omega, V)


# --- classical RK4 with omega and speed held ---

def _unicycle_rk4(x: float, y: float, psi: float, omega: float, speed: float, h: float) -> Tuple[float, float, float]:
    # the heading is linear in time, so stages 2 and 3 share their slope
    psi_mid = psi + 0.5 * h * omega
    psi_end = psi + h * omega
    f = h * speed / 6.0
    return (
        x + f * (math.cos(psi) + 4.0 * math.cos(psi_mid) + math.cos(psi_end)),
        y + f * (math.sin(psi) + 4.0 * math.sin(psi_mid) + math.sin(psi_end)),
        psi_end,
    )


def _coupled_rk4(
    s: FlowState,
    omega: float,
    speed: float,
    h: float,
    tx: float,
    ty: float,
    gains: Tuple[float, float, float],
) -> FlowState:
    """Unicycle and running estimator, the estimator fed the range at every stage."""
    x, y, psi, p1, p2 = s
    k1, k2, k3 = gains
    hh = 0.5 * h
    psi_mid = psi + hh * omega
    psi_end = psi + h * omega
    c0, s0 = speed * math.cos(psi), speed * math.sin(psi)
    cm, sm = speed * math.cos(psi_mid), speed * math.sin(psi_mid)
    ce, se = speed * math.cos(psi_end), speed * math.sin(psi_end)

    a1, b1 = observer_rates(math.hypot(x - tx, y - ty) - p1, p2, k1, k2, k3)
    a2, b2 = observer_rates(
        math.hypot(x + hh * c0 - tx, y + hh * s0 - ty) - (p1 + hh * a1), p2 + hh * b1, k1, k2, k3,
    )
    a3, b3 = observer_rates(
        math.hypot(x + hh * cm - tx, y + hh * sm - ty) - (p1 + hh * a2), p2 + hh * b2, k1, k2, k3,
    )
    a4, b4 = observer_rates(
        math.hypot(x + h * cm - tx, y + h * sm - ty) - (p1 + h * a3), p2 + h * b3, k1, k2, k3,
    )
    f = h / 6.0
    return (
        x + f * (c0 + 4.0 * cm + ce),
        y + f * (s0 + 4.0 * sm + se),
        psi_end,
        p1 + f * (a1 + 2.0 * a2 + 2.0 * a3 + a4),
        p2 + f * (b1 + 2.0 * b2 + 2.0 * b3 + b4),
    )


def _polar_rk4(r: float, theta: float, omega: float, speed: float, h: float) -> Tuple[float, float]:
    hh = 0.5 * h
    dr1, dt1 = _polar_rates(r, theta, omega, speed)
    dr2, dt2 = _polar_rates(r + hh * dr1, theta + hh * dt1, omega, speed)
    dr3, dt3 = _polar_rates(r + hh * dr2, theta + hh * dt2, omega, speed)
    dr4, dt4 = _polar_rates(r + h * dr3, theta + h * dt3, omega, speed)
    f = h / 6.0
    return (
        r + f * (dr1 + 2.0 * dr2 + 2.0 * dr3 + dr4),
        theta + f * (dt1 + 2.0 * dt2 + 2.0 * dt3 + dt4),
    )


def propagate(
    pose: CartesianState,
    omega: float,
    speed: float,
    h: float,
    target: Optional[TargetPosition] = None,
    est: Optional[EstimatorState] = None,
    est_params: Optional[EstimatorParams] = None,
) -> Tuple[CartesianState, Optional[EstimatorState]]:
    """
    Advance pose (and estimator, when given) by h with omega and speed held.

    The estimator is driven by the range measured at each stage, so target
    and est_params are required together with est.
    """
    if est is not None and not est.frozen:
        s = _coupled_rk4(
            (pose.x, pose.y, pose.psi, est.xhat1, est.xhat2), omega, speed, h,
            target.x_T, target.y_T, (est_params.k1, est_params.k2, est_params.k3),
        )
        return CartesianState(s[0], s[1], s[2]), EstimatorState(s[3], s[4])
    x, y, psi = _unicycle_rk4(pose.x, pose.y, pose.psi, omega, speed, h)
    return CartesianState(x, y, psi), est


# --- event localization ---

def _range_of(state, target: Optional[TargetPosition]) -> float:
    if isinstance(state, PolarState):
        return state.r
    return target_range(state, target)


def _interpolate(s0, s1, frac: float):
    if isinstance(s0, PolarState):
        return PolarState(s0.r + frac * (s1.r - s0.r), s0.theta + frac * (s1.theta - s0.theta))
    return CartesianState(
        s0.x + frac * (s1.x - s0.x),
        s0.y + frac * (s1.y - s0.y),
        s0.psi + frac * (s1.psi - s0.psi),
    )


def locate_crossing(
    prev: Tuple[float, Union[CartesianState, PolarState]],
    next_: Tuple[float, Union[CartesianState, PolarState]],
    r_a: float,
    tol: float,
    target: Optional[TargetPosition] = None,
    propagate_to: Optional[Callable[[float], Union[CartesianState, PolarState]]] = None,
    max_iter: int = 200,
) -> CrossingEvent:
    """
    Bisect a step for the instant the range crosses r_a.

    Args:
        prev: (t, state) at the start of the step
        next_: (t, state) at the end of the step
        r_a: aim radius
        tol: acceptable |r - r_a| at the returned event
        target: required for Cartesian states
        propagate_to: maps an offset tau in [0, h] to the state at t_prev + tau;
            defaults to linear interpolation between the endpoints

    Returns:
        CrossingEvent whose state lies on the same side of C_a as next_
    """
    t0, s0 = prev
    t1, s1 = next_
    r0 = _range_of(s0, target)
    r1 = _range_of(s1, target)
    # r == r_a counts as outside
    inside0, inside1 = r0 < r_a, r1 < r_a
    if inside0 == inside1:
        raise NoCrossing(f"no sign change of r - r_a over [{t0}, {t1}] (r: {r0} -> {r1})")
    kind = CrossingKind.ENTRY if inside1 else CrossingKind.EXIT

    span = t1 - t0
    if propagate_to is None:
        def propagate_to(tau):
            return _interpolate(s0, s1, tau / span)

    lo, hi = 0.0, span
    hi_state, r_hi = s1, r1
    for _ in range(max_iter):
        if abs(r_hi - r_a) <= tol:
            break
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        s = propagate_to(mid)
        r = _range_of(s, target)
        if (r < r_a) == inside1:
            hi, hi_state, r_hi = mid, s, r
        else:
            lo = mid
    return CrossingEvent(kind=kind, time=t0 + hi, state_at_event=hi_state, r=r_hi)


# --- hybrid execution ---

class HybridPlant:
    """
    Closed loop of UAV, controller and estimator for one SimConfig.

    The estimator flag passed around is None without an estimator, otherwise
    whether it is frozen.
    """

    def __init__(self, config: SimConfig):
        self.config = config
        self.target = config.target
        self.params = config.guidance
        self.r_a = config.guidance.r_a
        self.est_params = config.estimator
        self.output_feedback = config.controller_mode is ControllerMode.OUTPUT_FEEDBACK
        self._tx, self._ty = config.target.x_T, config.target.y_T
        self._k = config.guidance.k
        self._v = config.guidance.V
        self._variation = config.speed_variation
        est = config.estimator
        self._gains = (est.k1, est.k2, est.k3) if est is not None else None

    def speed_at(self, t: float) -> float:
        if self._variation is None:
            return self._v
        return self._variation.speed(self._v, t)

    def range_of(self, s: FlowState) -> float:
        return math.hypot(s[0] - self._tx, s[1] - self._ty)

    def bearing_of(self, s: FlowState) -> float:
        return wrap_angle(s[2] - math.atan2(self._ty - s[1], self._tx - s[0]))

    def turn_rate(self, r: float, theta: float, xhat2: float, speed: float) -> float:
        r_dot = xhat2 if self.output_feedback else -speed * math.cos(theta)
        return switching_turn_rate(r, r_dot, self._k, self.r_a, speed)

    def flow(self, s: FlowState, frozen: Optional[bool], omega: float, speed: float, h: float) -> FlowState:
        if frozen is False:
            return _coupled_rk4(s, omega, speed, h, self._tx, self._ty, self._gains)
        x, y, psi = _unicycle_rk4(s[0], s[1], s[2], omega, speed, h)
        return x, y, psi, s[3], s[4]

    @staticmethod
    def unpack(hs: HybridState) -> Tuple[FlowState, Optional[bool]]:
        p, est = hs.pose, hs.estimator
        if est is None:
            return (p.x, p.y, p.psi, math.nan, math.nan), None
        return (p.x, p.y, p.psi, est.xhat1, est.xhat2), est.frozen

    @staticmethod
    def pack(t: float, s: FlowState, frozen: Optional[bool]) -> HybridState:
        est = EstimatorState(s[3], s[4], frozen) if frozen is not None else None
        return HybridState(t=t, pose=CartesianState(s[0], s[1], s[2]), estimator=est)

    def initial(self) -> Tuple[HybridState, List[CrossingEvent]]:
        pose = self.config.initial_state
        r0 = target_range(pose, self.target)
        if r0 < ZERO_RANGE_EPS:
            raise ZeroRange("initial state coincides with the target")
        est = estimator_initial_state(self.est_params, r0) if self.est_params is not None else None
        events: List[CrossingEvent] = []
        if r0 < self.r_a:
            # starting inside C_a counts as an entry at t = 0
            estimate = (est.xhat1, est.xhat2) if est is not None else None
            events.append(CrossingEvent(CrossingKind.ENTRY, 0.0, pose, r0, estimate))
            if est is not None:
                est = freeze(est)
        return HybridState(t=0.0, pose=pose, estimator=est), events

    def apply_event(
        self, s: FlowState, frozen: Optional[bool], event: CrossingEvent,
    ) -> Tuple[FlowState, Optional[bool], CrossingEvent]:
        if frozen is not None:
            event = replace(event, estimate=(s[3], s[4]))
            est = EstimatorState(s[3], s[4], frozen)
            if event.kind is CrossingKind.ENTRY:
                est = freeze(est)
            else:
                est = reset_at_exit(est, self.est_params, self.params)
            s, frozen = (s[0], s[1], s[2], est.xhat1, est.xhat2), est.frozen
        logger.debug(f"{event.kind.value} at t={event.time:.6f} r={event.r:.12f}")
        return s, frozen, event

    def advance(
        self,
        s: FlowState,
        frozen: Optional[bool],
        r: float,
        omega: float,
        speed: float,
        t: float,
        h: float,
        events: List[CrossingEvent],
    ) -> Tuple[FlowState, Optional[bool], float]:
        """
        Advance from t by h, splitting at every crossing of C_a.

        Args:
            s, frozen: state at t
            r: range at t
            omega, speed: values held from t
            events: crossing events are appended here

        Returns:
            (state, estimator flag, range) at t + h
        """
        r_a = self.r_a
        remaining = h
        for _ in range(_MAX_EVENTS_PER_STEP):
            nxt = self.flow(s, frozen, omega, speed, remaining)
            r_next = self.range_of(nxt)
            if r_next < ZERO_RANGE_EPS:
                raise ZeroRange(f"UAV reached the target at t={t + remaining}")
            if (r < r_a) == (r_next < r_a):
                return nxt, frozen, r_next

            start, held, v = s, omega, speed
            event = locate_crossing(
                (t, self._pose(start)), (t + remaining, self._pose(nxt)), r_a,
                self.config.event_tolerance, target=self.target,
                propagate_to=lambda tau: self._pose(self.flow(start, frozen, held, v, tau)),
            )
            tau = event.time - t
            s = self.flow(start, frozen, held, v, tau) if tau < remaining else nxt
            s, frozen, event = self.apply_event(s, frozen, event)
            events.append(event)
            r = self.range_of(s)
            t = event.time
            remaining -= tau
            if remaining <= 0.0:
                return s, frozen, r
            speed = self.speed_at(t)
            omega = self.turn_rate(r, self.bearing_of(s), s[4], speed)

        s = self.flow(s, frozen, omega, speed, remaining)
        return s, frozen, self.range_of(s)

    @staticmethod
    def _pose(s: FlowState) -> CartesianState:
        return CartesianState(s[0], s[1], s[2])


def step(state: HybridState, config: SimConfig, h: float) -> Tuple[HybridState, TrajectoryRecord]:
    """
    One fixed step without event handling.

    Returns the next state and the record of the starting sample, whose
    omega is the value held over the step.
    """
    if not h > 0.0:
        raise ValueError(f"step size must be positive, got {h}")
    plant = HybridPlant(config)
    s, frozen = plant.unpack(state)
    r = plant.range_of(s)
    if r < ZERO_RANGE_EPS:
        raise ZeroRange(f"UAV at ({s[0]}, {s[1]}) coincides with target")
    theta = plant.bearing_of(s)
    speed = plant.speed_at(state.t)
    omega = plant.turn_rate(r, theta, s[4], speed)
    record = TrajectoryRecord(
        t=state.t,
        state=state.pose,
        r=r,
        theta=theta,
        r_dot=-speed * math.cos(theta),
        omega=omega,
        xhat1=s[3],
        xhat2=s[4],
        inside_Ca=r < plant.r_a,
    )
    return plant.pack(state.t + h, plant.flow(s, frozen, omega, speed, h), frozen), record


def check_gains(config: SimConfig):
    """Validate gains for a run; raise when the failure is fatal, otherwise warn."""
    est = config.estimator if config.controller_mode is ControllerMode.OUTPUT_FEEDBACK else None
    _, v_max = config.speed_bounds()
    report = validate_gains(config.guidance, est, mode=config.controller_mode, v_max=v_max)
    if report.hard_failures or (config.strict and not report.ok):
        raise GainConditionViolated(report)
    for c in report.failures:
        logger.warning(f"gain condition not met: {c.name} (margin {c.margin:.6g}) - running anyway")
    return report


def run(config: SimConfig) -> Tuple[Trajectory, List[CrossingEvent]]:
    """Integrate the closed loop for config.duration seconds."""
    check_gains(config)
    started = time.perf_counter()
    plant = HybridPlant(config)
    hs, events = plant.initial()
    h = config.step_size
    n_steps = step_count(config.duration, h)
    r_a = plant.r_a

    trajectory = Trajectory(n_steps + 1)
    s, frozen = plant.unpack(hs)
    r = plant.range_of(s)
    for i in range(n_steps + 1):
        t = i * h
        theta = plant.bearing_of(s)
        speed = plant.speed_at(t)
        omega = plant.turn_rate(r, theta, s[4], speed)
        trajectory.append((t, s[0], s[1], s[2], r, theta, -speed * math.cos(theta), omega, s[3], s[4]), r < r_a)
        if i == n_steps:
            break
        s, frozen, r = plant.advance(s, frozen, r, omega, speed, t, h, events)

    logger.info(
        f"run finished: {n_steps} steps, {len(events)} crossing events, "
        f"{time.perf_counter() - started:.2f}s wall"
    )
    return trajectory, events


@dataclass
class PolarTrace:
    t: np.ndarray
    r: np.ndarray
    theta: np.ndarray
    omega: np.ndarray
    events: List[CrossingEvent] = field(default_factory=list)


def run_polar(config: SimConfig) -> PolarTrace:
    """Full-information closed loop integrated in (r, theta) coordinates."""
    check_gains(config)
    k, r_a = config.guidance.k, config.guidance.r_a
    pose = config.initial_state
    r = target_range(pose, config.target)
    if r < ZERO_RANGE_EPS:
        raise ZeroRange("initial state coincides with the target")
    theta = bearing(pose, config.target)
    h = config.step_size
    n_steps = step_count(config.duration, h)

    def turn_rate(r, theta, speed):
        return switching_turn_rate(r, -speed * math.cos(theta), k, r_a, speed)

    cols = np.empty((4, n_steps + 1))
    events: List[CrossingEvent] = []
    if r < r_a:
        events.append(CrossingEvent(CrossingKind.ENTRY, 0.0, PolarState(r, theta), r))

    for i in range(n_steps + 1):
        t = i * h
        speed = config.speed_at(t)
        omega = turn_rate(r, theta, speed)
        cols[:, i] = (t, r, wrap_angle(theta), omega)
        if i == n_steps:
            break
        remaining = h
        for _ in range(_MAX_EVENTS_PER_STEP):
            nr, nth = _polar_rk4(r, theta, omega, speed, remaining)
            if (r < r_a) == (nr < r_a):
                r, theta = nr, nth
                break
            r0, th0, held, v = r, theta, omega, speed
            event = locate_crossing(
                (t, PolarState(r0, th0)), (t + remaining, PolarState(nr, nth)),
                r_a, config.event_tolerance,
                propagate_to=lambda tau: PolarState(*_polar_rk4(r0, th0, held, v, tau)),
            )
            events.append(event)
            remaining -= event.time - t
            r, theta = event.state_at_event.r, event.state_at_event.theta
            t = event.time
            if remaining <= 0.0:
                break
            speed = config.speed_at(t)
            omega = turn_rate(r, theta, speed)
        else:
            r, theta = _polar_rk4(r, theta, omega, speed, remaining)
        if r < ZERO_RANGE_EPS:
            raise ZeroRange(f"UAV reached the target at t={(i + 1) * h}")

    return PolarTrace(t=cols[0], r=cols[1], theta=cols[2], omega=cols[3], events=events)

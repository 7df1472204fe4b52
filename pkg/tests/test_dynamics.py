import logging
import math
import time

import numpy as np
import pytest

from circumnav.control.estimator import EstimatorParams
from circumnav.control.guidance import ControllerMode, GuidanceParams
from circumnav.errors import GainConditionViolated, NoCrossing, ZeroRange
from circumnav.sim.dynamics import (
    CrossingKind,
    HybridPlant,
    SimConfig,
    SpeedVariation,
    Trajectory,
    cartesian_rhs,
    locate_crossing,
    polar_rhs,
    propagate,
    run,
    run_polar,
    step,
    step_count,
)
from circumnav.sim.geometry import CartesianState, PolarState, TargetPosition, bearing, target_range

from conftest import GUIDANCE, full_info_config, output_feedback_config

SQRT_HALF = math.sqrt(0.5)


@pytest.mark.parametrize(
    "psi, omega, expected",
    [
        (0.0, 0.0, (1.0, 0.0, 0.0)),
        (math.pi / 2.0, 0.3, (0.0, 1.0, 0.3)),
        (5.0 * math.pi / 4.0, 0.0, (-SQRT_HALF, -SQRT_HALF, 0.0)),
    ],
)
def test_cartesian_rhs(psi, omega, expected):
    assert cartesian_rhs(CartesianState(1.0, 2.0, psi), omega, 1.0) == pytest.approx(expected, abs=1e-15)


@pytest.mark.parametrize(
    "state, omega, expected",
    [
        (PolarState(10.0, math.pi / 2.0), -0.1, (0.0, 0.0)),
        (PolarState(5.0, 0.0), 0.0, (-1.0, 0.0)),
        (PolarState(2.0, math.pi), 0.2, (1.0, 0.2)),
    ],
)
def test_polar_rhs(state, omega, expected):
    assert polar_rhs(state, omega, 1.0) == pytest.approx(expected, abs=1e-15)


def test_polar_rhs_singular_at_target():
    with pytest.raises(ZeroRange):
        polar_rhs(PolarState(0.0, 1.0), 0.0, 1.0)


def test_zero_turn_rate_is_a_straight_line():
    pose = CartesianState(1.0, -3.0, 0.7)
    nxt, _ = propagate(pose, 0.0, 2.0, 0.25)
    assert nxt.x == pytest.approx(1.0 + 0.5 * math.cos(0.7), abs=1e-14)
    assert nxt.y == pytest.approx(-3.0 + 0.5 * math.sin(0.7), abs=1e-14)
    assert nxt.psi == 0.7


def test_step_inside_aim_circle_coasts():
    config = full_info_config(initial_state=CartesianState(1.0, -10.0, 0.3))
    plant = HybridPlant(config)
    hs, _ = plant.initial()
    nxt, record = step(hs, config, 0.1)
    assert record.omega == 0.0
    assert record.inside_Ca
    assert nxt.pose.psi == 0.3
    assert nxt.pose.x == pytest.approx(1.0 + 0.1 * math.cos(0.3), abs=1e-14)


def test_first_step_agrees_with_two_half_steps():
    config = full_info_config()
    hs, _ = HybridPlant(config).initial()
    one, _ = step(hs, config, 0.01)
    half, _ = step(hs, config, 0.005)
    two, _ = step(half, config, 0.005)
    assert one.pose.x == pytest.approx(two.pose.x, abs=1e-7)
    assert one.pose.y == pytest.approx(two.pose.y, abs=1e-7)
    assert one.pose.psi == pytest.approx(two.pose.psi, abs=1e-6)


def test_step_rejects_nonpositive_h():
    config = full_info_config()
    hs, _ = HybridPlant(config).initial()
    with pytest.raises(ValueError):
        step(hs, config, 0.0)


def test_locate_crossing_on_radial_line():
    r_a = GUIDANCE.r_a
    origin = TargetPosition(0.0, 0.0)
    prev = (0.0, CartesianState(r_a + 0.5, 0.0, math.pi))
    nxt = (1.0, CartesianState(r_a - 0.5, 0.0, math.pi))
    event = locate_crossing(prev, nxt, r_a, 1e-9, target=origin)
    assert event.kind is CrossingKind.ENTRY
    assert event.time == pytest.approx(0.5, abs=1e-8)
    assert abs(event.r - r_a) <= 1e-9
    # event state sits on the post-crossing side
    assert event.r < r_a


def test_locate_crossing_exit_is_outside():
    r_a = GUIDANCE.r_a
    prev = (2.0, PolarState(r_a - 0.3, math.pi))
    nxt = (2.5, PolarState(r_a + 0.2, math.pi))
    event = locate_crossing(prev, nxt, r_a, 1e-9)
    assert event.kind is CrossingKind.EXIT
    assert event.r >= r_a
    assert event.time == pytest.approx(2.3, abs=1e-8)


def test_locate_crossing_without_sign_change():
    r_a = GUIDANCE.r_a
    with pytest.raises(NoCrossing):
        locate_crossing((0.0, PolarState(r_a + 1.0, 1.0)), (1.0, PolarState(r_a + 1.0, 1.2)), r_a, 1e-9)
    # touching the circle counts as outside
    with pytest.raises(NoCrossing):
        locate_crossing((0.0, PolarState(r_a, 1.0)), (1.0, PolarState(r_a + 1.0, 1.2)), r_a, 1e-9)


def test_full_information_run_converges(full_info_run):
    config, trajectory, events = full_info_run
    t = trajectory.column("t")
    r = trajectory.column("r")
    theta = trajectory.column("theta")
    late = t >= 200.0
    assert np.all(np.abs(r[late] - 10.0) < 0.05)
    assert abs(r[-1] - 10.0) < 0.05
    assert abs(theta[-1] - math.pi / 2.0) < 0.01
    assert sum(ev.kind is CrossingKind.ENTRY for ev in events) <= 1


def test_records_lie_on_the_step_grid(full_info_run):
    config, trajectory, _ = full_info_run
    t = trajectory.column("t")
    n = int(round(config.duration / config.step_size))
    assert len(trajectory) == n + 1
    assert t[0] == 0.0
    assert t[-1] == pytest.approx(config.duration, abs=1e-9)
    assert np.allclose(np.diff(t), config.step_size, atol=1e-9)


def test_full_information_turn_rate_bound(full_info_run):
    config, trajectory, _ = full_info_run
    bound = 2.0 * config.guidance.k * config.guidance.V
    assert np.max(np.abs(trajectory.column("omega"))) <= bound + 1e-12


def test_polar_twin_agrees_with_cartesian_run(full_info_run):
    config, trajectory, _ = full_info_run
    trace = run_polar(config)
    assert len(trace.r) == len(trajectory)
    assert np.max(np.abs(trace.r - trajectory.column("r"))) <= 1e-3


def test_equilibrium_start_stays_on_orbit():
    config = SimConfig(
        target=TargetPosition(0.0, 0.0),
        initial_state=CartesianState(10.0, 0.0, 3.0 * math.pi / 2.0),
        guidance=GUIDANCE,
        step_size=0.01,
        duration=100.0,
    )
    trajectory, events = run(config)
    assert np.max(np.abs(trajectory.column("r") - 10.0)) < 1e-3
    assert events == []


def test_start_on_target_raises():
    config = full_info_config(initial_state=CartesianState(0.0, -10.0, 0.0), duration=1.0)
    with pytest.raises(ZeroRange):
        run(config)


def test_start_inside_counts_as_entry_and_freezes_estimator():
    config = output_feedback_config(
        initial_state=CartesianState(3.0, -10.0, 0.5), step_size=0.01, duration=30.0,
    )
    trajectory, events = run(config)
    assert events[0].kind is CrossingKind.ENTRY
    assert events[0].time == 0.0
    assert events[0].estimate == (10.0, 0.0)
    t = trajectory.column("t")
    first_exit = events[1].time if len(events) > 1 else math.inf
    inside = trajectory.column("inside_Ca") & (t < first_exit)
    xhat1 = trajectory.column("xhat1")[inside]
    xhat2 = trajectory.column("xhat2")[inside]
    assert inside[0]
    assert np.all(xhat1 == 10.0)
    assert np.all(xhat2 == 0.0)


def test_crossing_events_alternate(crossing_run):
    _, _, events = crossing_run
    assert len(events) >= 2
    kinds = [ev.kind for ev in events]
    assert kinds[0] is CrossingKind.ENTRY
    assert all(a is not b for a, b in zip(kinds, kinds[1:]))


def test_crossing_states_lie_on_the_aim_circle(crossing_run):
    config, _, events = crossing_run
    r_a = config.guidance.r_a
    for ev in events:
        assert abs(target_range(ev.state_at_event, config.target) - r_a) <= 1e-9
        assert abs(ev.r - r_a) <= 1e-9


def test_config_rejects_bad_values():
    with pytest.raises(ValueError):
        full_info_config(step_size=0.0)
    with pytest.raises(ValueError):
        full_info_config(duration=-1.0)
    with pytest.raises(ValueError):
        full_info_config(controller_mode=ControllerMode.OUTPUT_FEEDBACK)


def test_hard_gain_failure_aborts_even_when_permissive():
    config = full_info_config(guidance=GuidanceParams(r_d=10.0, k=0.05, V=1.0), duration=1.0)
    with pytest.raises(GainConditionViolated) as info:
        run(config)
    assert "k > 1/r_d" in str(info.value)


def test_margin_failure_warns_unless_strict(caplog):
    weak = EstimatorParams(k1=2.0, k2=1.0, k3=0.1)
    with pytest.raises(GainConditionViolated):
        run(output_feedback_config(estimator=weak, strict=True, duration=1.0))
    with caplog.at_level(logging.WARNING):
        trajectory, _ = run(output_feedback_config(estimator=weak, step_size=0.01, duration=1.0))
    assert len(trajectory) == 101
    assert any("gain condition not met" in rec.message for rec in caplog.records)


def test_varying_speed_keeps_the_stable_radius():
    variation = SpeedVariation(amplitude=0.3, period=40.0)
    config = full_info_config(step_size=0.01, duration=300.0, speed_variation=variation)
    trajectory, _ = run(config)
    t = trajectory.column("t")
    r = trajectory.column("r")
    assert abs(np.mean(r[t >= 250.0]) - 10.0) < 0.02
    omega = trajectory.column("omega")
    assert np.max(np.abs(omega)) <= 2.0 * 0.2 * 1.3 + 1e-12


def test_trajectory_frame_columns(crossing_run):
    _, trajectory, _ = crossing_run
    frame = trajectory.to_frame()
    assert list(frame.columns) == list(Trajectory.COLUMNS)
    assert len(frame) == len(trajectory)
    assert frame["inside_Ca"].dtype == bool
    assert trajectory[5].t == frame["t"].iloc[5]


def test_exit_bearing_points_away_from_the_target(crossing_run):
    config, _, events = crossing_run
    exits = [ev for ev in events if ev.kind is CrossingKind.EXIT]
    assert exits
    for ev in exits:
        theta = bearing(ev.state_at_event, config.target)
        assert math.pi / 2.0 < theta < 3.0 * math.pi / 2.0


def test_coasting_between_entry_and_exit_is_straight(crossing_run):
    _, trajectory, events = crossing_run
    t = trajectory.column("t")
    psi = trajectory.column("psi")
    omega = trajectory.column("omega")
    pairs = list(zip(events[::2], events[1::2]))
    assert pairs
    for entry, exit_ in pairs:
        assert entry.kind is CrossingKind.ENTRY and exit_.kind is CrossingKind.EXIT
        coast = (t > entry.time) & (t < exit_.time)
        assert coast.sum() > 10
        assert np.all(omega[coast] == 0.0)
        assert np.ptp(psi[coast]) == 0.0


def test_constant_turn_rate_follows_an_exact_arc():
    omega, speed, h = 0.2, 1.5, 0.01
    radius = speed / omega
    pose = CartesianState(0.0, 0.0, 0.0)
    for _ in range(500):
        pose, _ = propagate(pose, omega, speed, h)
    t = 500 * h
    assert pose.x == pytest.approx(radius * math.sin(omega * t), abs=1e-9)
    assert pose.y == pytest.approx(radius * (1.0 - math.cos(omega * t)), abs=1e-9)
    assert pose.psi == pytest.approx(omega * t, abs=1e-12)
    assert math.hypot(pose.x, pose.y - radius) == pytest.approx(radius, abs=1e-10)


def test_recorded_range_rate_matches_range_differences(full_info_run):
    config, trajectory, events = full_info_run
    h = config.step_size
    t = trajectory.column("t")[1:-1]
    r = trajectory.column("r")
    r_dot = trajectory.column("r_dot")
    central = (r[2:] - r[:-2]) / (2.0 * h)
    # the turn rate jumps on C_a, so skip the samples next to a crossing
    smooth = np.ones(len(t), dtype=bool)
    for ev in events:
        smooth &= np.abs(t - ev.time) > 2.0 * h
    assert smooth.sum() > 0.99 * len(t)
    assert np.max(np.abs(central[smooth] - r_dot[1:-1][smooth])) < 1e-5


def test_recorded_bearing_matches_the_pose(crossing_run):
    config, trajectory, _ = crossing_run
    for i in range(0, len(trajectory), 997):
        rec = trajectory[i]
        assert rec.theta == pytest.approx(bearing(rec.state, config.target), abs=1e-12)
        assert rec.r_dot == pytest.approx(-config.guidance.V * math.cos(rec.theta), abs=1e-12)


@pytest.mark.parametrize("duration, h, expected", [
    (300.0, 1e-3, 300000),
    (1.0005, 1e-3, 1001),
    (0.7, 0.1, 7),
    (0.01, 1.0, 1),
])
def test_step_count_covers_the_duration(duration, h, expected):
    assert step_count(duration, h) == expected
    assert step_count(duration, h) * h >= duration - 1e-12


def test_run_does_not_stop_short_of_the_duration():
    trajectory, _ = run(full_info_config(step_size=1e-3, duration=1.0005))
    t = trajectory.column("t")
    assert len(trajectory) == 1002
    assert t[-1] >= 1.0005


def test_trajectory_storage_is_preallocated():
    trajectory = Trajectory(2)
    trajectory.append((0.0, 1.0, 2.0, 0.5, 3.0, 0.1, -0.9, 0.0, math.nan, math.nan), False)
    trajectory.append((0.1, 1.1, 2.0, 0.5, 2.9, 0.1, -0.9, 0.0, math.nan, math.nan), True)
    with pytest.raises(IndexError):
        trajectory.append((0.2,) * 10, True)
    assert len(trajectory) == 2
    assert trajectory.column("x").tolist() == [1.0, 1.1]
    assert trajectory.column("inside_Ca").tolist() == [False, True]
    assert trajectory[-1].inside_Ca


def test_published_run_is_fast():
    started = time.perf_counter()
    trajectory, _ = run(full_info_config())
    assert time.perf_counter() - started < 5.0
    assert len(trajectory) == 300001

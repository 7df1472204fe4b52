import math

import pytest

from circumnav.control.estimator import EstimatorParams
from circumnav.control.guidance import (
    Branch,
    ControllerMode,
    GuidanceParams,
    compute_r_a,
    full_information_control,
    k2_threshold,
    output_feedback_control,
    stable_radius,
    validate_gains,
)
from circumnav.errors import InvalidGain

PARAMS = GuidanceParams(r_d=10.0, k=0.2, V=1.0)
GAINS = EstimatorParams(k1=2.0, k2=1.2, k3=0.1)


def test_aim_radius_of_published_values():
    assert compute_r_a(10.0, 0.2) == pytest.approx(8.6603, abs=5e-5)
    assert compute_r_a(2.0, 1.0) == pytest.approx(math.sqrt(3.0), abs=1e-12)


@pytest.mark.parametrize("r_d, k", [(10.0, 0.1), (10.0, 0.05), (0.0, 1.0), (10.0, -0.2)])
def test_aim_radius_rejects_weak_gain(r_d, k):
    with pytest.raises(InvalidGain):
        compute_r_a(r_d, k)


def test_invalid_gain_is_a_value_error():
    with pytest.raises(ValueError):
        GuidanceParams(r_d=10.0, k=0.1, V=1.0).r_a


def test_stable_radius():
    assert stable_radius(8.6603, 0.2) == pytest.approx(10.0, abs=1e-4)
    assert stable_radius(0.0, 0.4) == pytest.approx(2.5)
    assert stable_radius(3.0, 0.25) == pytest.approx(5.0)
    assert stable_radius(PARAMS.r_a, PARAMS.k) == pytest.approx(PARAMS.r_d, abs=1e-12)


def test_control_at_equilibrium():
    decision = full_information_control(10.0, 0.0, PARAMS)
    assert decision.branch is Branch.ACTIVE
    assert decision.omega == pytest.approx(-0.1, abs=1e-12)


def test_control_on_the_aim_circle():
    decision = full_information_control(PARAMS.r_a, 0.0, PARAMS)
    assert decision.branch is Branch.ACTIVE
    assert decision.omega == pytest.approx(0.0, abs=1e-15)


def test_control_coasts_inside():
    decision = full_information_control(PARAMS.r_a / 2.0, 0.7, PARAMS)
    assert decision == full_information_control(PARAMS.r_a / 2.0, -0.3, PARAMS)
    assert decision.omega == 0.0
    assert decision.branch is Branch.COAST


def test_output_feedback_matches_full_information():
    for r, r_dot in [(12.0, 0.3), (9.0, -0.8), (20.0, 1.0), (4.0, 0.1)]:
        assert output_feedback_control(r, r_dot, PARAMS) == full_information_control(r, r_dot, PARAMS)


def test_output_feedback_hand_computation():
    expected = 0.2 * (math.cos(math.pi - math.asin(PARAMS.r_a / 12.0)) - 0.3)
    decision = output_feedback_control(12.0, 0.3, PARAMS)
    assert decision.omega == pytest.approx(expected, abs=1e-15)
    assert output_feedback_control(5.0, 0.3, PARAMS).branch is Branch.COAST


def test_turn_rate_bound_over_the_active_region():
    for r in (PARAMS.r_a, 9.0, 10.0, 15.0, 100.0):
        for theta in (0.0, 0.5, math.pi / 2.0, 2.0, math.pi, 4.0):
            r_dot = -PARAMS.V * math.cos(theta)
            assert abs(full_information_control(r, r_dot, PARAMS).omega) <= 2.0 * PARAMS.k * PARAMS.V + 1e-12


def test_published_gains_pass():
    report = validate_gains(PARAMS, GAINS)
    assert report.mode is ControllerMode.OUTPUT_FEEDBACK
    assert report.ok
    assert k2_threshold(PARAMS, GAINS.k1, PARAMS.r_a) == pytest.approx(1.132857, abs=1e-5)
    check = report.checks[-1]
    assert check.margin == pytest.approx(1.2 - 1.132857, abs=1e-5)


def test_full_information_needs_only_k_above_inverse_radius():
    report = validate_gains(PARAMS)
    assert report.mode is ControllerMode.FULL_INFORMATION
    assert report.ok
    assert [c.name for c in report.checks][-1] == "k > 1/r_d"


def test_weak_k_fails_hard():
    report = validate_gains(GuidanceParams(r_d=10.0, k=0.05, V=1.0))
    assert not report.ok
    assert [c.name for c in report.hard_failures] == ["k > 1/r_d"]


@pytest.mark.parametrize("r_d, k", [(10.0, 0.1), (4.0, 0.25), (3.0, 1.0 / 3.0)])
def test_boundary_gain_fails_hard(r_d, k):
    report = validate_gains(GuidanceParams(r_d=r_d, k=k, V=1.0))
    assert not report.ok
    assert [c.name for c in report.hard_failures] == ["k > 1/r_d"]
    with pytest.raises(InvalidGain):
        GuidanceParams(r_d=r_d, k=k, V=1.0).r_a


def test_zero_k3_fails():
    report = validate_gains(PARAMS, EstimatorParams(k1=2.0, k2=1.2, k3=0.0))
    assert not report.ok
    assert "k3 > 0" in [c.name for c in report.failures]


def test_low_k2_is_a_margin_failure():
    report = validate_gains(PARAMS, EstimatorParams(k1=2.0, k2=1.0, k3=0.1))
    assert not report.ok
    assert report.hard_failures == []
    assert report.failures[0].margin < 0.0


def test_output_feedback_requires_estimator_gains():
    report = validate_gains(PARAMS, None, mode=ControllerMode.OUTPUT_FEEDBACK)
    assert "estimator gains present" in [c.name for c in report.hard_failures]


def test_report_serializes():
    payload = validate_gains(PARAMS, GAINS).to_dict()
    assert payload["mode"] == "output_feedback"
    assert payload["ok"] is True
    assert all({"name", "margin", "passed"} <= set(c) for c in payload["checks"])

#!/usr/bin/env python
# -*- coding: utf-8 -*-

"""
Lyapunov functions of the guidance loop and of the range-rate estimator,
and numerical checks built on them.

Guidance loop (valid for r >= r_a, theta in [0, pi]):

    W(r, theta) = 1 - sin(theta) + phi(r)
    phi(r) = integral_{r_d}^{r} (1/r_d - 1/z + k sqrt(1 - r_a^2/z^2) - k sqrt(1 - r_a^2/r_d^2)) dz

The constant terms cancel when r_a is the aim radius of r_d.

Estimator, with p = r - xhat1 and q = r_dot - xhat2:

    U(p, q) = 2 k2 |p| + k3 p^2 + q^2 / 2 + (k1 |p|^(1/2) sgn(p) - q)^2 / 2
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple
import math

import numpy as np
import pandas as pd
from scipy.integrate import fixed_quad, quad
from scipy.linalg import eigvalsh

from circumnav.control.estimator import EstimatorParams, EstimatorState, reset_at_exit
from circumnav.control.guidance import GuidanceParams, estimator_perturbation_bounds
from circumnav.errors import DomainError
from circumnav.sim.dynamics import CrossingKind, SimConfig, Trajectory
from circumnav.sim.geometry import bearing

QUAD_TOLERANCE = 1e-10


def _columns(trajectory, *names: str) -> List[np.ndarray]:
    if isinstance(trajectory, Trajectory):
        return [trajectory.column(n) for n in names]
    if isinstance(trajectory, pd.DataFrame):
        return [trajectory[n].to_numpy(dtype=float) for n in names]
    raise TypeError(f"unsupported trajectory container {type(trajectory).__name__}")


# --- guidance loop ---

def _phi_integrand(params: GuidanceParams, r_a: float):
    r_d, k = params.r_d, params.k
    offset = 1.0 / r_d - k * math.sqrt(1.0 - (r_a / r_d) ** 2)

    def f(z):
        return offset - 1.0 / z + k * np.sqrt(1.0 - (r_a / z) ** 2)

    return f


def guidance_lyapunov(r: float, theta: float, params: GuidanceParams, rule: str = "quad") -> float:
    """
    Evaluate W(r, theta) by quadrature.

    Args:
        r: range, must satisfy r >= r_a
        theta: bearing in [0, pi]
        params: guidance parameters
        rule: "quad" (adaptive Gauss-Kronrod) or "gauss" (fixed Gauss-Legendre cross-check)
    """
    r_a = params.r_a
    if r < r_a:
        raise DomainError(f"r={r} lies inside the aim circle (r_a={r_a})")
    integrand = _phi_integrand(params, r_a)
    if rule == "quad":
        phi, _ = quad(integrand, params.r_d, r, epsabs=QUAD_TOLERANCE, epsrel=0.0, limit=200)
    elif rule == "gauss":
        phi, _ = fixed_quad(integrand, params.r_d, r, n=96)
    else:
        raise ValueError(f"unknown quadrature rule {rule!r}")
    # phi >= 0 analytically; clip quadrature round-off
    return 1.0 - math.sin(theta) + max(0.0, float(phi))


def _tangent_antiderivative(z: np.ndarray, a: float) -> np.ndarray:
    # d/dz [sqrt(z^2 - a^2) - a acos(a/z)] = sqrt(1 - a^2/z^2)
    return np.sqrt(np.maximum(z * z - a * a, 0.0)) - a * np.arccos(np.clip(a / z, -1.0, 1.0))


def lyapunov_series(r: np.ndarray, theta: np.ndarray, params: GuidanceParams) -> np.ndarray:
    """Closed-form W over arrays; NaN where r < r_a."""
    r = np.asarray(r, dtype=float)
    theta = np.asarray(theta, dtype=float)
    r_a, r_d, k = params.r_a, params.r_d, params.k
    c_d = math.sqrt(1.0 - (r_a / r_d) ** 2)
    with np.errstate(invalid="ignore", divide="ignore"):
        phi = (
            (r - r_d) / r_d
            - np.log(r / r_d)
            + k * (_tangent_antiderivative(r, r_a) - _tangent_antiderivative(np.array(r_d), r_a))
            - k * c_d * (r - r_d)
        )
    w = 1.0 - np.sin(theta) + np.maximum(phi, 0.0)
    return np.where(r >= r_a, w, np.nan)


def guidance_lyapunov_rate(r: float, theta: float, params: GuidanceParams, speed: Optional[float] = None) -> float:
    """Analytic dW/dt along the closed loop outside C_a."""
    r_a, r_d, k = params.r_a, params.r_d, params.k
    v = params.V if speed is None else speed
    slack = k * math.sqrt(1.0 - (r_a / r_d) ** 2) - 1.0 / r_d  # zero for the aim radius of r_d
    return v * math.cos(theta) * (-k * math.cos(theta) - math.sin(theta) / r + 1.0 / r + slack)


@dataclass(frozen=True)
class LyapunovSample:
    t: float
    value: float
    derivative_estimate: float  # forward difference to the next sample


def lyapunov_samples(trajectory, params: GuidanceParams) -> List[LyapunovSample]:
    """W and its forward-difference rate at every sample with r >= r_a, except the last one."""
    t, r, theta = _columns(trajectory, "t", "r", "theta")
    w = lyapunov_series(r, theta, params)
    out: List[LyapunovSample] = []
    for i in range(len(t) - 1):
        if np.isnan(w[i]) or np.isnan(w[i + 1]) or t[i + 1] == t[i]:
            continue
        out.append(LyapunovSample(float(t[i]), float(w[i]), float((w[i + 1] - w[i]) / (t[i + 1] - t[i]))))
    return out


@dataclass
class DescentReport:
    eligible: int
    violations: int
    worst_slope: float
    worst_t: Optional[float]
    eps_slope: float

    @property
    def ok(self) -> bool:
        return self.violations == 0


def check_lyapunov_descent(
    trajectory,
    params: GuidanceParams,
    t_start: float = 0.0,
    eps_slope: Optional[float] = None,
) -> DescentReport:
    """
    Finite-difference check that W does not increase.

    Only consecutive sample pairs with t >= t_start, r >= r_a and
    theta in [0, pi] are eligible. The default slack is 1e-6 plus the
    sample spacing, covering the O(h) error of the forward difference.
    """
    t, r, theta = _columns(trajectory, "t", "r", "theta")
    if len(t) < 2:
        return DescentReport(0, 0, -math.inf, None, eps_slope or 1e-6)
    dt = np.diff(t)
    if eps_slope is None:
        eps_slope = 1e-6 + float(np.median(np.abs(dt)))
    mask = (t >= t_start) & (r >= params.r_a) & (theta <= math.pi)
    pair = mask[:-1] & mask[1:] & (dt != 0.0)
    w = lyapunov_series(r, theta, params)
    slopes = np.full(dt.shape, -math.inf)
    slopes[pair] = np.diff(w)[pair] / dt[pair]
    bad = slopes > eps_slope
    eligible = int(pair.sum())
    if eligible == 0:
        return DescentReport(0, 0, -math.inf, None, eps_slope)
    i = int(np.argmax(slopes))
    return DescentReport(
        eligible=eligible,
        violations=int(bad.sum()),
        worst_slope=float(slopes[i]),
        worst_t=float(t[i]),
        eps_slope=eps_slope,
    )


# --- estimator ---

def estimator_lyapunov(p, q, est: EstimatorParams):
    """U(p, q); works on scalars and numpy arrays."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    root = np.sqrt(np.abs(p)) * np.sign(p)
    u = 2.0 * est.k2 * np.abs(p) + est.k3 * p * p + 0.5 * q * q + 0.5 * (est.k1 * root - q) ** 2
    return float(u) if u.ndim == 0 else u


def estimation_errors(trajectory) -> Tuple[np.ndarray, np.ndarray]:
    r, r_dot, xhat1, xhat2 = _columns(trajectory, "r", "r_dot", "xhat1", "xhat2")
    return r - xhat1, r_dot - xhat2


def estimator_lyapunov_series(trajectory, est: EstimatorParams) -> np.ndarray:
    """U along a trajectory; NaN while the estimator is frozen."""
    p, q = estimation_errors(trajectory)
    u = estimator_lyapunov(p, q, est)
    (inside,) = _columns(trajectory, "inside_Ca")
    return np.where(inside.astype(bool), np.nan, u)


@dataclass
class EstimatorLyapunovCertificate:
    P: np.ndarray
    Q1: np.ndarray
    Q2: np.ndarray
    Q3: np.ndarray
    Q4: np.ndarray
    delta1: float
    delta2: float
    p_eigenvalues: np.ndarray
    margin_q1_q3: float
    margin_q2_q4: float
    eta: float
    assumptions: Dict[str, str] = field(default_factory=dict)

    @property
    def p_positive_definite(self) -> bool:
        return bool(self.p_eigenvalues[0] > 0.0)

    @property
    def valid(self) -> bool:
        return self.p_positive_definite and self.margin_q1_q3 > 0.0 and self.margin_q2_q4 > 0.0

    def lyapunov(self, p: float, q: float) -> float:
        """xi^T P xi with xi = (|p|^(1/2) sgn(p), p, q)."""
        xi = np.array((math.copysign(math.sqrt(abs(p)), p) if p != 0.0 else 0.0, p, q))
        return float(xi @ self.P @ xi)

    def convergence_time_bound(self, u0: float) -> Optional[float]:
        """Upper bound on the time U needs to reach zero from u0, if certified."""
        if not self.valid:
            return None
        return 2.0 * math.sqrt(u0) * math.sqrt(float(self.p_eigenvalues[-1])) / self.margin_q1_q3

    def to_dict(self) -> dict:
        return {
            "valid": self.valid,
            "P": self.P.tolist(),
            "Q1": self.Q1.tolist(),
            "Q2": self.Q2.tolist(),
            "Q3": self.Q3.tolist(),
            "Q4": self.Q4.tolist(),
            "delta1": self.delta1,
            "delta2": self.delta2,
            "P_eigenvalues": self.p_eigenvalues.tolist(),
            "P_positive_definite": self.p_positive_definite,
            "margin_Q1_minus_Q3": self.margin_q1_q3,
            "margin_Q2_minus_Q4": self.margin_q2_q4,
            "eta": self.eta,
            "assumptions": dict(self.assumptions),
        }


def estimator_certificate(
    guidance: GuidanceParams,
    est: EstimatorParams,
    v_max: Optional[float] = None,
) -> EstimatorLyapunovCertificate:
    """Assemble the quadratic-form certificate for the estimator error dynamics."""
    k1, k2, k3 = est.k1, est.k2, est.k3
    delta1, delta2 = estimator_perturbation_bounds(guidance, guidance.r_a, v_max)

    P = 0.5 * np.array([
        [4.0 * k2 + k1 ** 2, 0.0, -k1],
        [0.0, 2.0 * k3, 0.0],
        [-k1, 0.0, 2.0],
    ])
    Q1 = 0.5 * k1 * np.array([
        [2.0 * k2 + k1 ** 2, 0.0, -k1],
        [0.0, 2.0 * k3, 0.0],
        [-k1, 0.0, 1.0],
    ])
    # the middle entry of Q2 is taken as k3
    Q2 = k2 * np.diag([k2 + 2.0 * k1 ** 2, k3, 1.0])
    Q3 = np.diag([delta1 * (1.0 + k1), 0.0, delta1])
    Q4 = np.diag([0.5 * k1 ** 2, 0.0, 0.5 * delta2 ** 2 + 2.0 * delta2])

    p_eig = eigvalsh(P)
    margin13 = float(eigvalsh(Q1 - Q3)[0])
    margin24 = float(eigvalsh(Q2 - Q4)[0])
    eta = margin13 / math.sqrt(p_eig[-1]) if p_eig[-1] > 0.0 else -math.inf
    return EstimatorLyapunovCertificate(
        P=P, Q1=Q1, Q2=Q2, Q3=Q3, Q4=Q4,
        delta1=delta1, delta2=delta2,
        p_eigenvalues=p_eig,
        margin_q1_q3=margin13,
        margin_q2_q4=margin24,
        eta=float(eta),
        assumptions={"Q2[1][1]": "assumed k3"},
    )


@dataclass(frozen=True)
class ResetJump:
    t_entry: float
    t_exit: float
    before: float
    after: float

    @property
    def jump(self) -> float:
        return abs(self.after - self.before)


def reset_lyapunov_jumps(events, config: SimConfig) -> List[ResetJump]:
    """U just before entering C_a versus U just after the exit reset, per coast interval."""
    est_params = config.estimator
    jumps: List[ResetJump] = []
    entry = None
    for ev in events:
        if ev.kind is CrossingKind.ENTRY:
            entry = ev
            continue
        if entry is None or ev.estimate is None or entry.estimate is None:
            continue
        r_dot_e = -config.speed_at(entry.time) * math.cos(bearing(entry.state_at_event, config.target))
        r_dot_x = -config.speed_at(ev.time) * math.cos(bearing(ev.state_at_event, config.target))
        x1_e, x2_e = entry.estimate
        after = reset_at_exit(EstimatorState(*ev.estimate, frozen=True), est_params, config.guidance)
        jumps.append(ResetJump(
            t_entry=entry.time,
            t_exit=ev.time,
            before=estimator_lyapunov(entry.r - x1_e, r_dot_e - x2_e, est_params),
            after=estimator_lyapunov(ev.r - after.xhat1, r_dot_x - after.xhat2, est_params),
        ))
        entry = None
    return jumps


@dataclass
class DecayReport:
    average_rate: float
    required_rate: float
    active_time: float

    @property
    def ok(self) -> bool:
        return self.average_rate >= self.required_rate


def check_estimator_decay(
    trajectory,
    est: EstimatorParams,
    certificate: EstimatorLyapunovCertificate,
    t_conv: float,
) -> DecayReport:
    """
    Average decrease rate of sqrt(U) over the active samples before t_conv,
    compared against a quarter of the certified rate eta.
    """
    (t,) = _columns(trajectory, "t")
    u = estimator_lyapunov_series(trajectory, est)
    active = ~np.isnan(u) & (t <= t_conv)
    idx = np.flatnonzero(active)
    if len(idx) < 2:
        return DecayReport(average_rate=math.inf, required_rate=certificate.eta / 4.0, active_time=0.0)
    dt = np.diff(t)
    both = active[:-1] & active[1:]
    active_time = float(dt[both].sum())
    root = np.sqrt(u[idx])
    rate = (root[0] - root[-1]) / active_time if active_time > 0.0 else math.inf
    return DecayReport(average_rate=float(rate), required_rate=certificate.eta / 4.0, active_time=active_time)

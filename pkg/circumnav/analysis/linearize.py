#!/usr/bin/env python
# -*- coding: utf-8 -*-

"""
Local stability of the circular orbit (r_d, pi/2).

The closed loop outside C_a in polar coordinates is

    r'     = -V cos(theta)
    theta' = k V (cos(theta) - sqrt(1 - r_a^2 / r^2)) + V sin(theta) / r
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Tuple
import math

import numpy as np

from circumnav.control.guidance import GuidanceParams
from circumnav.errors import InvalidGain

# relative size below which a discriminant is round-off
_DISCRIMINANT_FLOOR = 1e-9


@dataclass(frozen=True)
class LinearizationResult:
    A: np.ndarray
    eigenvalues: Tuple[complex, complex]
    hurwitz: bool
    # (-kV +/- sqrt((kV)^2 - V a))/2 with a = -A[1][0], i.e. without the factor 4
    stated_eigenvalues: Tuple[complex, complex] = (0j, 0j)

    def to_dict(self) -> dict:
        return {
            "A": self.A.tolist(),
            "eigenvalues": [[z.real, z.imag] for z in self.eigenvalues],
            "hurwitz": self.hurwitz,
            "stated_eigenvalues": [[z.real, z.imag] for z in self.stated_eigenvalues],
        }


def closed_loop_rhs(r: float, theta: float, params: GuidanceParams) -> Tuple[float, float]:
    """Right-hand side of the polar closed loop on the active branch."""
    v, k, r_a = params.V, params.k, params.r_a
    ratio = min(1.0, r_a / r)
    return -v * math.cos(theta), k * v * (math.cos(theta) - math.sqrt(1.0 - ratio * ratio)) + v * math.sin(theta) / r


def linearize_closed_loop(params: GuidanceParams) -> LinearizationResult:
    if params.V <= 0.0:
        raise InvalidGain(f"V must be positive, got {params.V}")
    r_a = params.r_a  # raises InvalidGain for k <= 1/r_d
    r_d, k, v = params.r_d, params.k, params.V
    root = math.sqrt(1.0 - (r_a / r_d) ** 2)
    a21 = -k * v * r_a ** 2 / (r_d ** 3 * root) - v / r_d ** 2
    A = np.array([[0.0, v], [a21, -k * v]])

    trace = -k * v
    det = -v * a21
    disc = complex(trace * trace - 4.0 * det)
    sq = complex(np.emath.sqrt(disc))
    eig = ((trace + sq) / 2.0, (trace - sq) / 2.0)

    stated_disc = (k * v) ** 2 - v * (-a21)
    # identically zero under the aim-radius identity; drop the round-off residue
    if abs(stated_disc) < _DISCRIMINANT_FLOOR * (k * v) ** 2:
        stated_disc = 0.0
    stated = complex(np.emath.sqrt(stated_disc))
    stated_eig = ((trace + stated) / 2.0, (trace - stated) / 2.0)
    return LinearizationResult(
        A=A,
        eigenvalues=eig,
        hurwitz=all(z.real < 0.0 for z in eig),
        stated_eigenvalues=stated_eig,
    )


def finite_difference_jacobian(params: GuidanceParams, step: float = 1e-6) -> np.ndarray:
    """Central-difference Jacobian of closed_loop_rhs at (r_d, pi/2)."""
    r0, th0 = params.r_d, math.pi / 2.0
    J = np.zeros((2, 2))
    for j, (dr, dth) in enumerate(((step, 0.0), (0.0, step))):
        plus = closed_loop_rhs(r0 + dr, th0 + dth, params)
        minus = closed_loop_rhs(r0 - dr, th0 - dth, params)
        J[:, j] = (np.asarray(plus) - np.asarray(minus)) / (2.0 * step)
    return J

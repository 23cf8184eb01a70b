"""CoM balancing on the ankles and the ankle-roll oscillation."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .joints import INDEX, NUM_JOINTS, JointId


@dataclass(frozen=True)
class BalanceConfig:
    kp: float = 1.5e-4         # rad per mm^alpha
    kd: float = 2.0e-3         # rad per mm of error change per cycle
    alpha: float = 2.0
    clamp: float = math.radians(8.0)
    deadband: float = 15.0     # mm of error ignored on each axis
    pitch_joints: tuple[JointId, ...] = (JointId.LAnklePitch, JointId.RAnklePitch)
    roll_joints: tuple[JointId, ...] = (JointId.LAnkleRoll, JointId.RAnkleRoll)
    # Positive ankle pitch rotates the body backwards over flat soles, so a CoM
    # behind its reference needs a negative pitch offset.
    x_sign: float = -1.0
    y_sign: float = 1.0

    def __post_init__(self):
        if self.kp < 0 or self.kd < 0:
            raise ValueError("balance gains must be >= 0")
        if self.alpha < 1:
            raise ValueError("balance exponent must be >= 1")
        if self.clamp <= 0:
            raise ValueError("balance clamp must be > 0")
        if self.deadband < 0:
            raise ValueError("balance deadband must be >= 0")


def com_reference_at(prev: tuple[float, float], end: tuple[float, float], s: float):
    return (prev[0] + s * (end[0] - prev[0]), prev[1] + s * (end[1] - prev[1]))


def _deadband(e: float, width: float) -> float:
    if width == 0.0:
        return e
    return math.copysign(max(abs(e) - width, 0.0), e)


def control_law(e: float, prev_e: float, cfg: BalanceConfig) -> float:
    u = math.copysign(cfg.kp * abs(e) ** cfg.alpha, e) + cfg.kd * (e - prev_e)
    return max(-cfg.clamp, min(cfg.clamp, u))


def pd_balance(expected, measured, prev_error, cfg: BalanceConfig):
    """Return (joint offsets, error) for one cycle.

    The returned error is what the next cycle passes back as ``prev_error``.
    Each axis output is split equally over its actuated joints.
    """
    ex = _deadband(expected[0] - measured[0], cfg.deadband)
    ey = _deadband(expected[1] - measured[1], cfg.deadband)
    ux = control_law(ex, prev_error[0], cfg)
    uy = control_law(ey, prev_error[1], cfg)
    off = np.zeros(NUM_JOINTS)
    for j in cfg.pitch_joints:
        off[INDEX[j]] += cfg.x_sign * ux / len(cfg.pitch_joints)
    for j in cfg.roll_joints:
        off[INDEX[j]] += cfg.y_sign * uy / len(cfg.roll_joints)
    return off, (ex, ey)


@dataclass(frozen=True)
class OscillatorState:
    amplitude: float = math.radians(1.0)
    period_ms: float = 200.0

    def __post_init__(self):
        if not 0 <= self.amplitude <= math.radians(1.0) + 1e-12:
            raise ValueError("oscillation amplitude must be within [0, 1] deg")
        if self.period_ms <= 0:
            raise ValueError("oscillation period must be > 0")


def ankle_oscillation(clock_ms: float, osc: OscillatorState) -> float:
    """Roll offset for the left ankle; the right ankle gets the negated value."""
    return osc.amplitude * math.sin(2.0 * math.pi * clock_ms / osc.period_ms)


def oscillation_offsets(clock_ms: float, osc: OscillatorState) -> np.ndarray:
    v = ankle_oscillation(clock_ms, osc)
    off = np.zeros(NUM_JOINTS)
    off[INDEX[JointId.LAnkleRoll]] = v
    off[INDEX[JointId.RAnkleRoll]] = -v
    return off

"""Joint identifiers, angle ranges and the joint-vector helpers."""
from __future__ import annotations

import math
from enum import Enum

import numpy as np


class JointId(str, Enum):
    HeadYaw = "HeadYaw"
    HeadPitch = "HeadPitch"
    LShoulderPitch = "LShoulderPitch"
    LShoulderRoll = "LShoulderRoll"
    LElbowYaw = "LElbowYaw"
    LElbowRoll = "LElbowRoll"
    LWristYaw = "LWristYaw"
    LHand = "LHand"
    RShoulderPitch = "RShoulderPitch"
    RShoulderRoll = "RShoulderRoll"
    RElbowYaw = "RElbowYaw"
    RElbowRoll = "RElbowRoll"
    RWristYaw = "RWristYaw"
    RHand = "RHand"
    HipYawPitch = "HipYawPitch"
    LHipRoll = "LHipRoll"
    LHipPitch = "LHipPitch"
    LKneePitch = "LKneePitch"
    LAnklePitch = "LAnklePitch"
    LAnkleRoll = "LAnkleRoll"
    RHipRoll = "RHipRoll"
    RHipPitch = "RHipPitch"
    RKneePitch = "RKneePitch"
    RAnklePitch = "RAnklePitch"
    RAnkleRoll = "RAnkleRoll"

    def __str__(self) -> str:
        return self.value


JOINTS: tuple[JointId, ...] = tuple(JointId)
NUM_JOINTS = len(JOINTS)
INDEX = {j: i for i, j in enumerate(JOINTS)}

# Degrees. Hands are grippers: their "angle" is an opening fraction mapped onto [0, 1] rad.
LIMITS_DEG: dict[JointId, tuple[float, float]] = {
    JointId.HeadYaw: (-119.5, 119.5),
    JointId.HeadPitch: (-38.5, 29.5),
    JointId.LShoulderPitch: (-119.5, 119.5),
    JointId.LShoulderRoll: (-18.0, 76.0),
    JointId.LElbowYaw: (-119.5, 119.5),
    JointId.LElbowRoll: (-88.5, 0.0),
    JointId.LWristYaw: (-104.5, 104.5),
    JointId.LHand: (0.0, math.degrees(1.0)),
    JointId.RShoulderPitch: (-119.5, 119.5),
    JointId.RShoulderRoll: (-76.0, 18.0),
    JointId.RElbowYaw: (-119.5, 119.5),
    JointId.RElbowRoll: (0.0, 88.5),
    JointId.RWristYaw: (-104.5, 104.5),
    JointId.RHand: (0.0, math.degrees(1.0)),
    JointId.HipYawPitch: (-65.62, 42.44),
    JointId.LHipRoll: (-21.74, 45.29),
    JointId.LHipPitch: (-88.0, 27.73),
    JointId.LKneePitch: (-5.9, 121.04),
    JointId.LAnklePitch: (-68.15, 52.86),
    JointId.LAnkleRoll: (-22.79, 44.06),
    JointId.RHipRoll: (-45.29, 21.74),
    JointId.RHipPitch: (-88.0, 27.73),
    JointId.RKneePitch: (-5.9, 121.04),
    JointId.RAnklePitch: (-68.15, 52.86),
    JointId.RAnkleRoll: (-44.06, 22.79),
}

LOWER = np.radians([LIMITS_DEG[j][0] for j in JOINTS])
UPPER = np.radians([LIMITS_DEG[j][1] for j in JOINTS])

# Never used as compensation or balance outputs unless a script names them explicitly.
HANDS_AND_WRISTS = frozenset(
    {JointId.LHand, JointId.RHand, JointId.LWristYaw, JointId.RWristYaw})


def joint(name: str) -> JointId:
    """Look up a joint by its exact name; raises KeyError for unknown names."""
    try:
        return JointId(name)
    except ValueError:
        raise KeyError(name) from None


def zeros() -> np.ndarray:
    return np.zeros(NUM_JOINTS)


def clamp(vec: np.ndarray) -> np.ndarray:
    return np.minimum(np.maximum(vec, LOWER), UPPER)


def within_limits(vec: np.ndarray, tol: float = 1e-12) -> bool:
    return bool(np.all(vec >= LOWER - tol) and np.all(vec <= UPPER + tol))


def from_degrees(mapping: dict[JointId, float], base: np.ndarray | None = None) -> np.ndarray:
    out = zeros() if base is None else base.copy()
    for j, deg in mapping.items():
        out[INDEX[j]] = math.radians(deg)
    return out

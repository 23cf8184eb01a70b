"""Reduced 2-DoF torso orientation model driven by CoM and support geometry.

The torso is never simulated as a rigid body in contact. Each support mode names
the contact markers that touch the ground; a least-squares plane through them
gives the torso orientation at which that support face lies flat. While the
CoM, seen in that resting orientation, projects inside the contact span the
torso relaxes toward it; otherwise the body tips over the nearest edge.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..script import SupportMode
from .kinematics import KinematicTable, positions_and_com

DEFAULT_CONTACTS: dict[SupportMode, tuple[str, ...]] = {
    SupportMode.FrontLying: ("ChestL", "ChestR", "LKnee", "RKnee"),
    SupportMode.BackLying: ("BackL", "BackR", "ButtL", "ButtR"),
    SupportMode.ArmsHead: ("LHandTip", "RHandTip", "LKnee", "RKnee"),
    SupportMode.Sitting: ("ButtL", "ButtR", "LHeelOut", "LHeelIn", "RHeelOut", "RHeelIn"),
    SupportMode.Soles: ("LToeOut", "LToeIn", "LHeelOut", "LHeelIn",
                        "RToeOut", "RToeIn", "RHeelOut", "RHeelIn"),
    SupportMode.LeftLeg: ("LToeOut", "LToeIn", "LHeelOut", "LHeelIn"),
    SupportMode.RightLeg: ("RToeOut", "RToeIn", "RHeelOut", "RHeelIn"),
}

# Modes whose support face constrains roll; lying and arms/head modes leave it at zero.
ROLL_CONSTRAINED = frozenset({SupportMode.Soles, SupportMode.LeftLeg, SupportMode.RightLeg,
                              SupportMode.Sitting})


def orientation_matrix(pitch: float, roll: float) -> np.ndarray:
    """World-from-torso rotation: Ry(pitch) @ Rx(roll)."""
    cp, sp = math.cos(pitch), math.sin(pitch)
    cr, sr = math.cos(roll), math.sin(roll)
    ry = np.array([[cp, 0.0, sp], [0.0, 1.0, 0.0], [-sp, 0.0, cp]])
    rx = np.array([[1.0, 0.0, 0.0], [0.0, cr, -sr], [0.0, sr, cr]])
    return ry @ rx


def implied_orientation(points: np.ndarray, com: np.ndarray, roll_constrained: bool):
    """Torso (pitch, roll) at which the plane through ``points`` is level with ``com`` above it."""
    centroid = points.mean(axis=0)
    d = points - centroid
    # normal = direction of least spread
    n = np.linalg.eigh(d.T @ d)[1][:, 0]
    if n @ (com - centroid) < 0:
        n = -n
    roll = math.atan2(n[1], n[2]) if roll_constrained else 0.0
    pitch = math.atan2(-n[0], n[1] * math.sin(roll) + n[2] * math.cos(roll))
    return pitch, roll


def _wrap(a: float) -> float:
    return (a + math.pi) % (2 * math.pi) - math.pi


@dataclass
class BodyModel:
    table: KinematicTable
    contacts: dict[SupportMode, tuple[str, ...]] = field(
        default_factory=lambda: dict(DEFAULT_CONTACTS))
    k_fall: float = 0.1           # rad/s^2 per mm of overhang
    tau_ms: float = 150.0         # righting time constant
    fall_tau_ms: float = 250.0    # time constant of the uncontrolled fall to lying
    lateral_margin: float = 10.0  # mm added on each side of the lateral contact span
    ground_tilt: float = 0.0      # rad, positive tilts the ground face forward
    pitch: float = 0.0
    roll: float = 0.0
    pitch_rate: float = 0.0       # rad/s
    roll_rate: float = 0.0
    com: np.ndarray = field(default_factory=lambda: np.zeros(3))
    com_ground: np.ndarray = field(default_factory=lambda: np.zeros(2))
    implied: tuple[float, float] = (0.0, 0.0)
    overhang: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        self._contact_idx = {m: np.array([self.table.index[n] for n in names])
                             for m, names in self.contacts.items()}

    def push(self, pitch_rate: float) -> None:
        self.pitch_rate += pitch_rate

    def support_geometry(self, joints: np.ndarray, mode: SupportMode | None):
        pos, com = positions_and_com(joints, self.table)
        if mode is None:
            return com, None
        return com, pos[self._contact_idx[mode]]

    def step(self, joints: np.ndarray, mode: SupportMode | None, dt_ms: float) -> None:
        """Advance torso pitch/roll by ``dt_ms`` for the given measured joints and support."""
        dt = dt_ms / 1000.0
        com, points = self.support_geometry(joints, mode)
        self.com = com
        if points is None:
            self._fall(dt)
            return
        target_pitch, target_roll = implied_orientation(points, com, mode in ROLL_CONSTRAINED)
        target_pitch += self.ground_tilt
        # keep the target on the branch nearest to the current pitch
        target_pitch = self.pitch + _wrap(target_pitch - self.pitch)
        self.implied = (target_pitch, target_roll)

        # what the robot senses: CoM over the support centre at its current orientation
        rot = orientation_matrix(self.pitch, self.roll)
        self.com_ground = (rot @ com)[:2] - (points @ rot.T).mean(axis=0)[:2]

        # static stability: is the CoM inside the contact span once the support face rests flat?
        rest = orientation_matrix(target_pitch, target_roll)
        world_pts = points @ rest.T
        world_com = rest @ com
        x_lo, x_hi = world_pts[:, 0].min(), world_pts[:, 0].max()
        y_lo = world_pts[:, 1].min() - self.lateral_margin
        y_hi = world_pts[:, 1].max() + self.lateral_margin
        over_x = _overhang(world_com[0], x_lo, x_hi)
        over_y = _overhang(world_com[1], y_lo, y_hi)
        self.overhang = (over_x, over_y)

        decay = math.exp(-dt / (self.tau_ms / 1000.0))
        if over_x == 0.0:
            self.pitch_rate *= decay
            relax = (target_pitch - self.pitch) * (1.0 - decay)
            self.pitch += relax + self.pitch_rate * dt
        else:
            # tipping forward over the +x edge increases pitch
            self.pitch_rate += self.k_fall * over_x * dt
            self.pitch += self.pitch_rate * dt
        if over_y == 0.0:
            self.roll_rate *= decay
            self.roll += (target_roll - self.roll) * (1.0 - decay) + self.roll_rate * dt
        else:
            # points above the ground move toward -y as roll grows
            self.roll_rate -= self.k_fall * over_y * dt
            self.roll += self.roll_rate * dt

    def _fall(self, dt: float) -> None:
        decay = math.exp(-dt / (self.fall_tau_ms / 1000.0))
        self.pitch_rate = 0.0
        self.roll_rate = 0.0
        if abs(self.roll) > math.radians(45):
            target = (self.pitch, math.copysign(math.pi / 2, self.roll))
        else:
            target = (math.copysign(math.pi / 2, self.pitch) + self.ground_tilt, 0.0)
        self.implied = target
        self.overhang = (0.0, 0.0)
        self.pitch += (target[0] - self.pitch) * (1.0 - decay)
        self.roll += (target[1] - self.roll) * (1.0 - decay)
        self.com_ground = np.zeros(2)


def _overhang(v: float, lo: float, hi: float) -> float:
    if v > hi:
        return v - hi
    if v < lo:
        return v - lo
    return 0.0

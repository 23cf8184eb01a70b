"""Kinematic/mass table parsing, forward kinematics and center of mass."""
from __future__ import annotations

import math
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numba
import numpy as np

from ..joints import INDEX, JointId, joint
from ..errors import ParseError


@dataclass(frozen=True)
class Link:
    name: str
    parent: str | None
    joint: JointId | None
    offset: np.ndarray      # mm, in parent frame
    axis: np.ndarray        # unit vector in link frame
    mass: float             # g
    com_offset: np.ndarray  # mm, in link frame


class KinematicTable:
    """Links in topological order (every parent precedes its children)."""

    def __init__(self, links: list[Link]):
        if not links or links[0].parent is not None:
            raise ValueError("first link must be the root (parent none)")
        names = {}
        for i, link in enumerate(links):
            if link.name in names:
                raise ValueError(f"duplicate link {link.name}")
            if link.parent is not None and link.parent not in names:
                raise ValueError(f"link {link.name}: parent {link.parent} not defined before it")
            names[link.name] = i
        self.links = links
        self.index = names
        self.parent_idx = [names[l.parent] if l.parent else -1 for l in links]
        self.joint_idx = [INDEX[l.joint] if l.joint is not None else -1 for l in links]
        self.offsets = np.array([l.offset for l in links])
        self.axes = np.array([l.axis for l in links])
        self.masses = np.array([l.mass for l in links])
        self.com_offsets = np.array([l.com_offset for l in links])
        self.total_mass = float(self.masses.sum())
        depth = [0] * len(links)
        for i in range(1, len(links)):
            depth[i] = depth[self.parent_idx[i]] + 1
        self.levels = []
        for d in range(1, max(depth) + 1):
            members = np.array([i for i in range(len(links)) if depth[i] == d])
            self.levels.append((members, np.array([self.parent_idx[i] for i in members])))
        self.jointed = np.array([i for i in range(len(links)) if self.joint_idx[i] >= 0])
        self.jointed_q = np.array([self.joint_idx[i] for i in self.jointed])
        if self.total_mass <= 0:
            raise ValueError("total mass must be positive")
        self._parent = np.array(self.parent_idx, dtype=np.int64)
        self._joint = np.array(self.joint_idx, dtype=np.int64)

    def __len__(self) -> int:
        return len(self.links)


def parse_kinematics(text: str, source: str = "<string>") -> KinematicTable:
    links = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tok = line.split()
        try:
            if len(tok) != 20 or tok[0] != "link" or tok[2] != "parent" or tok[4] != "joint" \
                    or tok[6] != "offset" or tok[10] != "axis" or tok[14] != "mass_g" \
                    or tok[16] != "com_offset":
                raise ValueError("expected 'link <name> parent <name> joint <J|fixed> offset x y z "
                                 "axis x y z mass_g m com_offset x y z'")
            jname = None if tok[5] == "fixed" else joint(tok[5])
            axis = np.array([float(v) for v in tok[11:14]])
            if jname is not None:
                n = np.linalg.norm(axis)
                if n == 0:
                    raise ValueError("joint axis must be non-zero")
                axis = axis / n
            links.append(Link(
                name=tok[1],
                parent=None if tok[3] == "none" else tok[3],
                joint=jname,
                offset=np.array([float(v) for v in tok[7:10]]),
                axis=axis,
                mass=float(tok[15]),
                com_offset=np.array([float(v) for v in tok[17:20]]),
            ))
        except KeyError as exc:
            raise ParseError(source, lineno, f"unknown joint {exc.args[0]!r}") from None
        except ValueError as exc:
            raise ParseError(source, lineno, str(exc)) from None
    try:
        return KinematicTable(links)
    except ValueError as exc:
        raise ParseError(source, 0, str(exc)) from None


def load_kinematics(path: str | Path | None = None) -> KinematicTable:
    if path is None:
        text = resources.files("standup.data").joinpath("nao_like.kin").read_text()
        return parse_kinematics(text, "nao_like.kin")
    path = Path(path)
    return parse_kinematics(path.read_text(), str(path))


def _rotations(axes: np.ndarray, angles: np.ndarray) -> np.ndarray:
    """Batched axis-angle rotation matrices, shape (n, 3, 3)."""
    x, y, z = axes[:, 0], axes[:, 1], axes[:, 2]
    c, s = np.cos(angles), np.sin(angles)
    t = 1.0 - c
    out = np.empty((len(angles), 3, 3))
    out[:, 0, 0] = c + x * x * t
    out[:, 0, 1] = x * y * t - z * s
    out[:, 0, 2] = x * z * t + y * s
    out[:, 1, 0] = y * x * t + z * s
    out[:, 1, 1] = c + y * y * t
    out[:, 1, 2] = y * z * t - x * s
    out[:, 2, 0] = z * x * t - y * s
    out[:, 2, 1] = z * y * t + x * s
    out[:, 2, 2] = c + z * z * t
    return out


def forward_kinematics(joints: np.ndarray, table: KinematicTable):
    """Return (positions, rotations) of every link frame in the torso frame."""
    n = len(table)
    local = np.empty((n, 3, 3))
    local[:] = np.eye(3)
    local[table.jointed] = _rotations(table.axes[table.jointed], joints[table.jointed_q])
    pos = np.zeros((n, 3))
    rot = np.empty((n, 3, 3))
    rot[0] = np.eye(3)
    # siblings share a depth, so each level is one batched product
    for members, parents in table.levels:
        prot = rot[parents]
        pos[members] = pos[parents] + np.einsum("nij,nj->ni", prot, table.offsets[members])
        rot[members] = prot @ local[members]
    return pos, rot


def com_of(joints: np.ndarray, table: KinematicTable, fk=None) -> np.ndarray:
    """Mass-weighted mean of link CoM points, mm, torso frame."""
    pos, rot = fk if fk is not None else forward_kinematics(joints, table)
    points = pos + np.einsum("nij,nj->ni", rot, table.com_offsets)
    return table.masses @ points / table.total_mass


@numba.njit(cache=True)
def _walk(q, parent, joint_idx, offsets, axes, masses, com_offsets):
    n = parent.shape[0]
    pos = np.zeros((n, 3))
    rot = np.zeros((n, 3, 3))
    for k in range(3):
        rot[0, k, k] = 1.0
    com = np.zeros(3)
    for k in range(3):
        com[k] += masses[0] * (com_offsets[0, 0] * rot[0, k, 0] + com_offsets[0, 1] * rot[0, k, 1]
                               + com_offsets[0, 2] * rot[0, k, 2])
    local = np.zeros((3, 3))
    for i in range(1, n):
        p = parent[i]
        for a in range(3):
            pos[i, a] = pos[p, a] + rot[p, a, 0] * offsets[i, 0] + rot[p, a, 1] * offsets[i, 1] \
                + rot[p, a, 2] * offsets[i, 2]
        j = joint_idx[i]
        if j < 0:
            for a in range(3):
                for b in range(3):
                    rot[i, a, b] = rot[p, a, b]
        else:
            x, y, z = axes[i, 0], axes[i, 1], axes[i, 2]
            c, s = math.cos(q[j]), math.sin(q[j])
            t = 1.0 - c
            local[0, 0] = c + x * x * t
            local[0, 1] = x * y * t - z * s
            local[0, 2] = x * z * t + y * s
            local[1, 0] = y * x * t + z * s
            local[1, 1] = c + y * y * t
            local[1, 2] = y * z * t - x * s
            local[2, 0] = z * x * t - y * s
            local[2, 1] = z * y * t + x * s
            local[2, 2] = c + z * z * t
            for a in range(3):
                for b in range(3):
                    rot[i, a, b] = rot[p, a, 0] * local[0, b] + rot[p, a, 1] * local[1, b] \
                        + rot[p, a, 2] * local[2, b]
        if masses[i] != 0.0:
            for a in range(3):
                com[a] += masses[i] * (pos[i, a] + rot[i, a, 0] * com_offsets[i, 0]
                                       + rot[i, a, 1] * com_offsets[i, 1]
                                       + rot[i, a, 2] * com_offsets[i, 2])
    return pos, com


def positions_and_com(joints: np.ndarray, table: KinematicTable):
    """Compiled single pass: every link origin and the CoM, torso frame, mm."""
    pos, weighted = _walk(np.asarray(joints, dtype=np.float64), table._parent, table._joint,
                          table.offsets, table.axes, table.masses, table.com_offsets)
    return pos, weighted / table.total_mass

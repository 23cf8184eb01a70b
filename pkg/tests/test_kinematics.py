import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import KIN_TEXT
from oracles import chain_walk
from standup.errors import ParseError
from standup.joints import INDEX, JOINTS, LOWER, UPPER, JointId, from_degrees
from standup.script import SupportMode
from standup.sim.body import BodyModel, implied_orientation
from standup.sim.kinematics import com_of, forward_kinematics, parse_kinematics, positions_and_com

# computed once with the quaternion chain walk in oracles.py and checked by hand
ZERO_POSE_COM = (21.236942070275404, 0.0, -31.75014245014245)

poses = st.lists(st.floats(0, 1), min_size=len(JOINTS), max_size=len(JOINTS)).map(
    lambda u: LOWER + np.array(u) * (UPPER - LOWER))


def test_zero_pose_golden(table):
    com = positions_and_com(np.zeros(len(JOINTS)), table)[1]
    assert tuple(com) == pytest.approx(ZERO_POSE_COM, abs=1e-9)
    assert chain_walk(KIN_TEXT, {})[1] == pytest.approx(ZERO_POSE_COM, abs=1e-12)


@given(poses)
def test_matches_independent_chain_walk(table, q):
    pos, com = positions_and_com(q, table)
    frames, ref = chain_walk(KIN_TEXT, {j.value: q[INDEX[j]] for j in JOINTS})
    assert com == pytest.approx(ref, abs=1e-9)
    for name, i in table.index.items():
        assert pos[i] == pytest.approx(frames[name], abs=1e-9)


@given(poses)
def test_compiled_and_vectorised_agree(table, q):
    pos, com = positions_and_com(q, table)
    fk = forward_kinematics(q, table)
    assert np.allclose(pos, fk[0], atol=1e-10)
    assert np.allclose(com, com_of(q, table, fk), atol=1e-10)


def _mirror_left(q):
    """Copy left-side angles onto the right side; rolls and yaws change sign."""
    out = q.copy()
    out[INDEX[JointId.HeadYaw]] = 0.0
    for j in JOINTS:
        if j.value.startswith("R") and j.value[1].isupper():
            left, right = INDEX[JointId("L" + j.value[1:])], INDEX[j]
            flip = -1.0 if ("Roll" in j.value or "Yaw" in j.value) else 1.0
            # left and right ranges are not exact mirrors; keep both sides legal
            lo, hi = sorted((flip * LOWER[right], flip * UPPER[right]))
            v = min(max(q[left], lo), hi)
            out[left], out[right] = v, flip * v
    return out


@given(poses)
def test_mirrored_pose_centres_y(table, q):
    sym = _mirror_left(q)
    assert np.all((sym >= LOWER) & (sym <= UPPER))
    assert positions_and_com(sym, table)[1][1] == pytest.approx(0.0, abs=1e-9)


def test_symmetric_examples(table):
    for deg in (0, 20, 45):
        q = from_degrees({JointId.LHipPitch: -deg, JointId.RHipPitch: -deg,
                          JointId.LKneePitch: deg, JointId.RKneePitch: deg,
                          JointId.LShoulderRoll: deg / 3, JointId.RShoulderRoll: -deg / 3})
        assert positions_and_com(q, table)[1][1] == pytest.approx(0.0, abs=1e-9)


@given(st.floats(-2.08, 2.08))
def test_head_yaw_moves_com_within_bound(table, yaw):
    head = [l for l in table.links if l.name in ("Neck", "Head")]
    lever = max(math.hypot(l.com_offset[0], l.com_offset[1]) for l in head)
    bound = sum(l.mass for l in head) / table.total_mass * 2 * lever
    q = np.zeros(len(JOINTS))
    base = positions_and_com(q, table)[1]
    q[INDEX[JointId.HeadYaw]] = yaw
    moved = positions_and_com(q, table)[1]
    assert math.hypot(*(moved - base)[:2]) <= bound + 1e-12
    assert moved[2] == pytest.approx(base[2], abs=1e-9)


def test_parse_errors():
    with pytest.raises(ParseError) as exc:
        parse_kinematics("link Torso parent none joint fixed offset 0 0 0 axis 0 0 0 mass_g 1 com_offset 0 0 0\n"
                         "link X parent Torso joint Elbow offset 0 0 0 axis 0 0 1 mass_g 1 com_offset 0 0 0\n", "t.kin")
    assert exc.value.line == 2
    with pytest.raises(ParseError):
        parse_kinematics("link X parent Y joint fixed offset 0 0 0 axis 0 0 0 mass_g 1 com_offset 0 0 0\n")


# --- body model ----------------------------------------------------------------

def test_standing_upright_is_equilibrium(table):
    b = BodyModel(table)
    for _ in range(50):
        b.step(np.zeros(len(JOINTS)), SupportMode.Soles, 12)
    assert b.overhang == (0.0, 0.0)
    assert b.pitch == pytest.approx(0.0, abs=1e-12) and b.roll == pytest.approx(0.0, abs=1e-12)


def test_overhang_accelerates_at_k_fall(table):
    # feet pitched so the resting torso leans past the toes
    q = from_degrees({JointId.LAnklePitch: -20, JointId.RAnklePitch: -20})
    b = BodyModel(table, k_fall=0.002)
    b.step(q, SupportMode.Soles, 10)
    over = b.overhang[0]
    assert over > 0
    r0 = b.pitch_rate
    for _ in range(100):
        b.step(q, SupportMode.Soles, 10)
    assert b.pitch_rate - r0 == pytest.approx(0.002 * over * 1.0, rel=1e-9)
    # 30 mm at 0.002 rad/s^2/mm is 0.06 rad/s gained per second
    assert (b.pitch_rate - r0) / over * 30 == pytest.approx(0.06)


def test_plane_fit_recovers_tilt():
    rng = np.random.default_rng(1)
    pts = np.c_[rng.uniform(-50, 50, (8, 2)), np.zeros(8)]
    for pitch in (-0.4, 0.0, 0.3):
        c, s = math.cos(pitch), math.sin(pitch)
        rot = np.array([[c, 0, -s], [0, 1, 0], [s, 0, c]])  # inverse of the torso rotation
        p, r = implied_orientation(pts @ rot.T, rot @ np.array([0, 0, 300.0]), True)
        assert p == pytest.approx(pitch, abs=1e-9) and r == pytest.approx(0.0, abs=1e-9)


def test_no_support_falls_to_lying(table):
    b = BodyModel(table, pitch=0.3)
    for _ in range(400):
        b.step(np.zeros(len(JOINTS)), None, 12)
    assert b.pitch == pytest.approx(math.pi / 2, abs=1e-3)

import math

import pytest
from hypothesis import given, strategies as st

from conftest import SCENARIOS
from standup.config import VARIANTS, EngineConfig
from standup.engine import Mode
from standup.errors import ParseError
from standup.joints import JOINTS
from standup.sim.scenario import (FaultSpec, Outcome, Push, Scenario, load_scenario, parse_scenario,
                                  run_scenario, serialize_scenario)
from standup.trace import trace_text


def test_bundled_scenarios_parse():
    names = {p.stem for p in SCENARIOS.glob("*.scenario")}
    assert {"back_clean", "front_clean", "hyp_stuck", "dead_knee", "dead_shoulder"} <= names
    for p in SCENARIOS.glob("*.scenario"):
        assert load_scenario(p).name == p.stem


@pytest.mark.parametrize("text, line", [
    ("initial back\nend\n", 1),
    ("scenario x\ninitial upside_down\nend\n", 2),
    ("scenario x\nseed -1\nend\n", 2),
    ("scenario x\nfault Knee hold from_cycle 0\nend\n", 2),
    ("scenario x\nfault HeadYaw lag 0 from_cycle 0\nend\n", 2),
    ("scenario x\nfault HeadYaw hold from_cycle 0 until_cycle\nend\n", 2),
    ("scenario x\npush at_ms 10\nend\n", 2),
    ("scenario x\ninitial back\n", 2),
    ("scenario x\nend\ninitial back\n", 3),
])
def test_parse_errors_carry_line(text, line):
    with pytest.raises(ParseError) as exc:
        parse_scenario(text, "s.scenario")
    assert exc.value.line == line


scenarios = st.builds(
    Scenario,
    name=st.from_regex(r"[a-z][a-z0-9_]{0,10}", fullmatch=True),
    initial=st.sampled_from(["front", "back", "side_left", "side_right"]),
    ground_tilt=st.floats(-0.1, 0.1),
    seed=st.integers(0, 2**64 - 1),
    noise=st.floats(0, 0.01),
    faults=st.lists(st.builds(FaultSpec, st.sampled_from(JOINTS), st.just("lag"), st.integers(0, 500),
                              st.none() | st.integers(501, 900), magnitude=st.floats(0.01, 0.3)),
                    max_size=2).map(tuple),
    pushes=st.lists(st.builds(Push, st.integers(0, 9000), st.floats(-1, 1)), max_size=2).map(
        lambda ps: tuple(sorted(ps, key=lambda p: p.at_ms))),
)


@given(scenarios)
def test_scenario_round_trip(sc):
    # angles are stored in degrees, so radians come back within rounding
    back = parse_scenario(serialize_scenario(sc))
    assert (back.name, back.initial, back.seed, back.pushes) == (sc.name, sc.initial, sc.seed, sc.pushes)
    assert back.ground_tilt == pytest.approx(sc.ground_tilt, rel=1e-12, abs=1e-15)
    assert back.noise == pytest.approx(sc.noise, rel=1e-12, abs=1e-15)
    assert len(back.faults) == len(sc.faults)
    for f, g in zip(back.faults, sc.faults):
        assert (f.joint, f.kind, f.from_cycle, f.until_cycle) == (g.joint, g.kind, g.from_cycle, g.until_cycle)
        assert f.magnitude == pytest.approx(g.magnitude, rel=1e-12)


def test_clean_back_finishes(library):
    r = run_scenario(load_scenario(SCENARIOS / "back_clean.scenario"), library)
    assert r.outcome == Outcome.Finished and r.attempts == 1 and r.breakups == 0
    modes = [o.mode for o in r.outputs]
    assert modes[0] == Mode.DecideAction and modes[-1] == Mode.Finished
    assert set(modes) <= {Mode.DecideAction, Mode.Working, Mode.Waiting, Mode.Finished}
    assert [o.keyframe for o in r.outputs if o.mode == Mode.Working][-1] == "stand"


def test_side_start_rolls_over_first(library):
    r = run_scenario(Scenario("s", "side_left"), library)
    motions = [o.motion for o in r.outputs if o.motion]
    assert motions[0] == "side_recovery" and motions[-1] == "back"
    assert r.outcome == Outcome.Finished


def test_stuck_arm_frees_itself(library):
    r = run_scenario(load_scenario(SCENARIOS / "stuck_arm.scenario"), library)
    assert "free_arms" in {o.motion for o in r.outputs}
    assert r.outcome == Outcome.Finished and r.attempts == 1


def test_dead_shoulder_flagged_broken(library):
    r = run_scenario(load_scenario(SCENARIOS / "dead_shoulder.scenario"), library)
    assert r.outcome == Outcome.HelpMe and r.breakups == 1


def test_dead_knee_gives_up_after_max_failures(library):
    r = run_scenario(load_scenario(SCENARIOS / "dead_knee.scenario"), library)
    assert r.outcome == Outcome.HelpMe and r.breakups == library["back"].max_failures


def test_same_seed_same_trace(library):
    sc = load_scenario(SCENARIOS / "tilted_push.scenario")
    texts = [trace_text(r.inputs, r.outputs, library, EngineConfig(),
                        VARIANTS["full"]) for r in (run_scenario(sc, library), run_scenario(sc, library))]
    assert texts[0] == texts[1]


def test_noise_seed_changes_run(library):
    a = run_scenario(Scenario("a", "back", seed=1, noise=math.radians(0.3)), library)
    b = run_scenario(Scenario("a", "back", seed=2, noise=math.radians(0.3)), library)
    assert any((x.measured != y.measured).any() for x, y in zip(a.inputs, b.inputs))


def test_cycle_cap(library):
    r = run_scenario(Scenario("c", "back"), library, max_cycles=50)
    assert r.outcome == Outcome.CycleCap and r.cycles == 50

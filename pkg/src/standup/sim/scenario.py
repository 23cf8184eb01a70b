"""Scenario files and the closed engine/plant loop."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np

from ..config import EngineConfig, Variant
from ..engine import TERMINAL, CycleInput, CycleOutput, Mode, StandupEngine
from ..errors import ParseError
from ..joints import LOWER, NUM_JOINTS, UPPER, JointId, from_degrees, joint
from ..script import ScriptLibrary
from .body import BodyModel
from .kinematics import KinematicTable, load_kinematics
from .servo import Fault, ServoModel

INITIAL_KINDS = ("front", "back", "side_left", "side_right")

# lying with arms along the body
LYING_POSE = from_degrees({
    JointId.LShoulderPitch: 90.0, JointId.RShoulderPitch: 90.0,
    JointId.LShoulderRoll: 8.0, JointId.RShoulderRoll: -8.0,
    JointId.LElbowRoll: -20.0, JointId.RElbowRoll: 20.0,
})

INITIAL_ORIENTATION = {
    "front": (math.pi / 2, 0.0),
    "back": (-math.pi / 2, 0.0),
    "side_left": (0.0, -math.pi / 2),
    "side_right": (0.0, math.pi / 2),
}

DEFAULT_MAX_CYCLES = 5000


@dataclass(frozen=True)
class FaultSpec:
    joint: JointId
    kind: str = "hold"
    from_cycle: int = 0
    until_cycle: int | None = None
    release_below: float | None = None  # rad
    stuck_at: float | None = None       # rad
    magnitude: float = 0.0              # rad, lag faults


@dataclass(frozen=True)
class Push:
    at_ms: int
    pitch_rate: float  # rad/s


@dataclass(frozen=True)
class Scenario:
    name: str
    initial: str = "back"
    ground_tilt: float = 0.0  # rad
    seed: int = 0
    noise: float = 0.0        # rad, servo measurement sigma
    faults: tuple[FaultSpec, ...] = ()
    pushes: tuple[Push, ...] = ()


# --- file format -------------------------------------------------------------

def _num(tok: str, source: str, lineno: int, cast=float):
    try:
        v = cast(tok)
    except ValueError:
        raise ParseError(source, lineno, f"expected a number, got {tok!r}") from None
    if isinstance(v, float) and not math.isfinite(v):
        raise ParseError(source, lineno, f"non-finite number {tok!r}")
    return v


def _parse_fault(tok: list[str], source: str, lineno: int) -> FaultSpec:
    # fault <Joint> hold [at <deg>] | lag <deg>  from_cycle <n>  [until_cycle <n> | release_on_error_below <deg>]
    if len(tok) < 3:
        raise ParseError(source, lineno, "incomplete fault line")
    try:
        j = joint(tok[1])
    except KeyError:
        raise ParseError(source, lineno, f"unknown joint {tok[1]!r}") from None
    kind = tok[2]
    rest = tok[3:]
    kw: dict = {"joint": j, "kind": kind}
    if kind == "hold":
        if rest[:1] == ["at"]:
            if len(rest) < 2:
                raise ParseError(source, lineno, "hold at needs an angle")
            kw["stuck_at"] = math.radians(_num(rest[1], source, lineno))
            rest = rest[2:]
    elif kind == "lag":
        if not rest:
            raise ParseError(source, lineno, "lag needs an angle")
        kw["magnitude"] = math.radians(_num(rest[0], source, lineno))
        if kw["magnitude"] <= 0:
            raise ParseError(source, lineno, "lag angle must be > 0")
        rest = rest[1:]
    else:
        raise ParseError(source, lineno, f"unknown fault kind {kind!r}")
    if len(rest) < 2 or rest[0] != "from_cycle":
        raise ParseError(source, lineno, "fault needs from_cycle <n>")
    kw["from_cycle"] = _num(rest[1], source, lineno, int)
    rest = rest[2:]
    if rest:
        if len(rest) != 2:
            raise ParseError(source, lineno, "trailing tokens on fault line")
        if rest[0] == "until_cycle":
            kw["until_cycle"] = _num(rest[1], source, lineno, int)
        elif rest[0] == "release_on_error_below":
            kw["release_below"] = math.radians(_num(rest[1], source, lineno))
        else:
            raise ParseError(source, lineno, f"unknown fault end {rest[0]!r}")
    return FaultSpec(**kw)


def parse_scenario(text: str, source: str = "<string>") -> Scenario:
    kw: dict = {}
    faults: list[FaultSpec] = []
    pushes: list[Push] = []
    ended = False
    for lineno, raw in enumerate(text.splitlines(), 1):
        tok = raw.split("#", 1)[0].split()
        if not tok:
            continue
        if ended:
            raise ParseError(source, lineno, "content after 'end'")
        key = tok[0]
        if key != "scenario" and "name" not in kw:
            raise ParseError(source, lineno, "file must start with 'scenario <name>'")
        if key in ("scenario", "initial", "ground_tilt_deg", "seed", "noise_deg") and len(tok) != 2:
            raise ParseError(source, lineno, f"{key} takes exactly one value")
        if key == "scenario":
            if "name" in kw:
                raise ParseError(source, lineno, "duplicate scenario line")
            kw["name"] = tok[1]
        elif key == "initial":
            if tok[1] not in INITIAL_KINDS:
                raise ParseError(source, lineno, f"unknown initial pose {tok[1]!r}")
            kw["initial"] = tok[1]
        elif key == "ground_tilt_deg":
            kw["ground_tilt"] = math.radians(_num(tok[1], source, lineno))
        elif key == "seed":
            seed = _num(tok[1], source, lineno, int)
            if not 0 <= seed < 2**64:
                raise ParseError(source, lineno, "seed must be an unsigned 64-bit integer")
            kw["seed"] = seed
        elif key == "noise_deg":
            noise = _num(tok[1], source, lineno)
            if noise < 0:
                raise ParseError(source, lineno, "noise must be >= 0")
            kw["noise"] = math.radians(noise)
        elif key == "fault":
            faults.append(_parse_fault(tok, source, lineno))
        elif key == "push":
            if len(tok) != 5 or tok[1] != "at_ms" or tok[3] != "pitch_rad_s":
                raise ParseError(source, lineno, "expected 'push at_ms <n> pitch_rad_s <x>'")
            pushes.append(Push(_num(tok[2], source, lineno, int), _num(tok[4], source, lineno)))
        elif key == "end":
            ended = True
        else:
            raise ParseError(source, lineno, f"unknown key {key!r}")
    if "name" not in kw:
        raise ParseError(source, 1, "empty scenario")
    if not ended:
        raise ParseError(source, len(text.splitlines()), "missing 'end'")
    return Scenario(faults=tuple(faults), pushes=tuple(sorted(pushes, key=lambda p: p.at_ms)), **kw)


def serialize_scenario(sc: Scenario) -> str:
    out = [f"scenario {sc.name}", f"initial {sc.initial}",
           f"ground_tilt_deg {math.degrees(sc.ground_tilt)!r}", f"seed {sc.seed}",
           f"noise_deg {math.degrees(sc.noise)!r}"]
    for f in sc.faults:
        line = f"fault {f.joint.value} {f.kind}"
        if f.kind == "hold" and f.stuck_at is not None:
            line += f" at {math.degrees(f.stuck_at)!r}"
        if f.kind == "lag":
            line += f" {math.degrees(f.magnitude)!r}"
        line += f" from_cycle {f.from_cycle}"
        if f.until_cycle is not None:
            line += f" until_cycle {f.until_cycle}"
        if f.release_below is not None:
            line += f" release_on_error_below {math.degrees(f.release_below)!r}"
        out.append(line)
    for p in sc.pushes:
        out.append(f"push at_ms {p.at_ms} pitch_rad_s {p.pitch_rate!r}")
    out.append("end")
    return "\n".join(out) + "\n"


def load_scenario(path: str | Path) -> Scenario:
    path = Path(path)
    return parse_scenario(path.read_text(encoding="utf-8"), str(path))


# --- the plant -----------------------------------------------------------------

def quantize(x):
    """Round sensor values to the 6 decimals a trace stores, so traces replay exactly."""
    return np.round(x, 6)


class Plant:
    """Servos plus torso model, stepped once per engine cycle."""

    def __init__(self, scenario: Scenario, table: KinematicTable | None = None,
                 cycle_ms: int = 12, delay: int = 3, max_speed: float = 0.12):
        from ..joints import INDEX
        self.scenario = scenario
        self.cycle_ms = cycle_ms
        self.table = table or load_kinematics()
        rng = np.random.default_rng(scenario.seed)
        faults = [Fault(INDEX[f.joint], f.kind, f.from_cycle, f.until_cycle, f.release_below,
                        f.stuck_at, f.magnitude) for f in scenario.faults]
        self.servo = ServoModel(LYING_POSE, delay, max_speed, scenario.noise, faults,
                                LOWER, UPPER, rng)
        pitch, roll = INITIAL_ORIENTATION[scenario.initial]
        self.body = BodyModel(self.table, ground_tilt=scenario.ground_tilt,
                              pitch=pitch + scenario.ground_tilt, roll=roll)
        self.support = None
        self.stiffness = 1.0
        self._pushes = list(scenario.pushes)

    def sense(self, cycle: int) -> CycleInput:
        measured = self.servo.advance(cycle, self.stiffness)
        while self._pushes and self._pushes[0].at_ms <= cycle * self.cycle_ms:
            self.body.push(self._pushes.pop(0).pitch_rate)
        # torso motion follows the actual (noise-free) joint angles
        self.body.step(self.servo.position, self.support, self.cycle_ms)
        measured = quantize(measured)
        com = quantize(self.body.com_ground)
        return CycleInput(measured, float(quantize(self.body.pitch)), float(quantize(self.body.roll)),
                          (float(com[0]), float(com[1])), cycle)

    def actuate(self, out: CycleOutput, cycle: int) -> None:
        self.servo.command(out.request, cycle)
        self.stiffness = out.stiffness
        self.support = out.support


class Outcome(str, Enum):
    Finished = "Finished"
    HelpMe = "HelpMe"
    CycleCap = "CycleCap"


@dataclass
class RunResult:
    outcome: Outcome
    cycles: int
    inputs: list[CycleInput] = field(default_factory=list)
    outputs: list[CycleOutput] = field(default_factory=list)
    attempts: int = 0
    successes: int = 0
    breakups: int = 0
    first_attempt_ok: bool = False
    rejected: list = field(default_factory=list)


def run_scenario(scenario: Scenario, library: ScriptLibrary, config: EngineConfig | None = None,
                 variant: Variant | None = None, max_cycles: int = DEFAULT_MAX_CYCLES,
                 table: KinematicTable | None = None, record: bool = True) -> RunResult:
    config = config or EngineConfig()
    plant = Plant(scenario, table, config.cycle_ms, config.delay_cycles)
    engine = StandupEngine(library, config, variant)
    inputs, outputs = [], []
    outcome = Outcome.CycleCap
    cycles = 0
    for cycle in range(max_cycles):
        inp = plant.sense(cycle)
        out = engine.step(inp)
        plant.actuate(out, cycle)
        cycles = cycle + 1
        if record:
            inputs.append(inp)
            outputs.append(out)
        # stop once a terminal mode has produced its first output row
        if out.mode in TERMINAL:
            outcome = Outcome(out.mode.value)
            break
    st = engine.state
    return RunResult(outcome, cycles, inputs, outputs, st.attempts, st.successes, st.breakups,
                     bool(st.first_attempt_ok), list(plant.servo.rejected))

"""Keyframes and motion scripts: domain types, the line-oriented file format, validation."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from importlib import resources
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np

from .errors import ParseError
from .joints import INDEX, JOINTS, LIMITS_DEG, JointId, joint

MAX_WAIT_MS = 2000
MAX_FACTOR = 4.0
DEFAULT_COMP_THRESHOLD_DEG = 2.0


class Interpolation(str, Enum):
    Linear = "linear"
    Cosine = "cosine"


class SupportMode(str, Enum):
    FrontLying = "front"
    BackLying = "back"
    ArmsHead = "arms_head"
    Soles = "soles"
    LeftLeg = "left_leg"
    RightLeg = "right_leg"
    Sitting = "sitting"


FEET_SUPPORT = frozenset({SupportMode.Soles, SupportMode.LeftLeg, SupportMode.RightLeg})


class Entry(str, Enum):
    """Lying situation a motion starts from. ``side`` motions roll the robot onto its
    back or front; ``none`` marks helper motions (e.g. freeing the arms)."""
    Front = "front"
    Back = "back"
    Side = "side"
    Nil = "none"


@dataclass(frozen=True)
class WaitCondition:
    pitch_min: float  # rad
    pitch_max: float
    max_wait_ms: int

    def satisfied(self, pitch: float) -> bool:
        return self.pitch_min <= pitch <= self.pitch_max


@dataclass(frozen=True)
class ArmCheck:
    joints: tuple[JointId, ...]
    threshold: float  # rad
    action: str       # "retry" or "free_arms"
    target: str       # keyframe name (retry) or motion name (free_arms)


@dataclass(frozen=True)
class CompensationRule:
    watched: JointId
    threshold: float  # rad
    targets: tuple[tuple[JointId, float], ...]


@dataclass(frozen=True)
class Keyframe:
    name: str
    duration_ms: int
    support: SupportMode
    targets: Mapping[JointId, float] = field(default_factory=dict)  # rad; unset joints hold
    interpolation: Interpolation = Interpolation.Linear
    pitch_range: tuple[float, float] = (-math.pi, math.pi)
    roll_range: tuple[float, float] = (-math.pi, math.pi)
    wait: WaitCondition | None = None
    arm_check: ArmCheck | None = None
    rules: tuple[CompensationRule, ...] = ()
    balance_ref: tuple[float, float] | None = None  # mm
    oscillate: bool = False


@dataclass(frozen=True)
class MotionScript:
    name: str
    entry: Entry
    keyframes: tuple[Keyframe, ...]
    max_failures: int | None = None

    def index_of(self, name: str) -> int:
        for i, kf in enumerate(self.keyframes):
            if kf.name == name:
                return i
        raise KeyError(name)

    def watched_joints(self) -> set[JointId]:
        return {r.watched for kf in self.keyframes for r in kf.rules}


@dataclass(frozen=True)
class Diagnostic:
    keyframe: str | None
    message: str

    def __str__(self) -> str:
        return f"{self.keyframe}: {self.message}" if self.keyframe else self.message


# --- parsing ---------------------------------------------------------------

_SINGLE_KEYS = {"duration_ms", "interpolation", "support", "torso_pitch_range",
                "torso_roll_range", "wait", "check_arms", "balance", "oscillate"}


def _float(tok: str) -> float:
    v = float(tok)
    if not math.isfinite(v):
        raise ValueError(f"non-finite number {tok!r}")
    return v


def _int(tok: str) -> int:
    try:
        return int(tok)
    except ValueError:
        raise ValueError(f"expected integer, got {tok!r}") from None


def _joint(tok: str) -> JointId:
    try:
        return joint(tok)
    except KeyError:
        raise ValueError(f"unknown joint {tok!r}") from None


def _enum(cls, tok: str, what: str):
    try:
        return cls(tok)
    except ValueError:
        choices = "|".join(m.value for m in cls)
        raise ValueError(f"bad {what} {tok!r}, expected {choices}") from None


def _range(tok: list[str], what: str) -> tuple[float, float]:
    if len(tok) != 2:
        raise ValueError(f"{what} takes <min_deg> <max_deg>")
    lo, hi = math.radians(_float(tok[0])), math.radians(_float(tok[1]))
    if lo > hi:
        raise ValueError(f"{what}: min > max")
    return lo, hi


def _parse_compensate(tok: list[str]) -> CompensationRule:
    # compensate <Joint> [threshold <deg>] -> <Joint>*<factor>[, <Joint>*<factor> ...]
    if "->" not in tok:
        raise ValueError("compensate needs '->' before the target list")
    arrow = tok.index("->")
    head, tail = tok[:arrow], " ".join(tok[arrow + 1:])
    if len(head) == 1:
        threshold = DEFAULT_COMP_THRESHOLD_DEG
    elif len(head) == 3 and head[1] == "threshold":
        threshold = _float(head[2])
    else:
        raise ValueError("expected 'compensate <Joint> [threshold <deg>] -> ...'")
    if threshold < 0:
        raise ValueError("activation threshold must be >= 0")
    watched = _joint(head[0])
    targets = []
    for item in filter(None, (s.strip() for s in tail.split(","))):
        name, star, factor = item.partition("*")
        if not star:
            raise ValueError(f"bad compensation target {item!r}, expected Joint*factor")
        targets.append((_joint(name.strip()), _float(factor)))
    if not targets:
        raise ValueError("compensate needs at least one target")
    seen = [t for t, _ in targets]
    if watched in seen:
        raise ValueError("watched joint cannot be its own compensation target")
    if len(set(seen)) != len(seen):
        raise ValueError("duplicate compensation target")
    for t, p in targets:
        if abs(p) > MAX_FACTOR:
            raise ValueError(f"factor {p} for {t} exceeds |p| <= {MAX_FACTOR}")
    return CompensationRule(watched, math.radians(threshold), tuple(targets))


def _parse_check(tok: list[str]) -> ArmCheck:
    # check_arms <J,J,...> threshold <deg> action retry <kf>|free_arms <motion>
    if len(tok) != 6 or tok[1] != "threshold" or tok[3] != "action":
        raise ValueError("expected 'check_arms <J,J,...> threshold <deg> action retry <kf>|free_arms <motion>'")
    joints = tuple(_joint(n) for n in tok[0].split(",") if n)
    if not joints:
        raise ValueError("check_arms needs at least one joint")
    threshold = _float(tok[2])
    if threshold <= 0:
        raise ValueError("check_arms threshold must be > 0")
    if tok[4] not in ("retry", "free_arms"):
        raise ValueError(f"bad arm-check action {tok[4]!r}, expected retry|free_arms")
    return ArmCheck(joints, math.radians(threshold), tok[4], tok[5])


def parse_script(text: str, source: str = "<string>") -> MotionScript:
    """Parse one motion script; raises ParseError with the offending line."""
    name = entry = None
    max_failures = None
    keyframes: list[Keyframe] = []
    kf: dict | None = None
    kf_line = 0
    seen: set[str] = set()
    ended = False

    def finish(lineno: int):
        nonlocal kf
        if kf is None:
            return
        if "duration_ms" not in kf:
            raise ParseError(source, kf_line, f"keyframe {kf['name']!r} missing duration_ms")
        if "support" not in kf:
            raise ParseError(source, kf_line, f"keyframe {kf['name']!r} missing support")
        if kf.get("oscillate") and kf.get("balance_ref") is None:
            raise ParseError(source, kf_line,
                             f"keyframe {kf['name']!r}: oscillate on requires a balance reference")
        if any(k.name == kf["name"] for k in keyframes):
            raise ParseError(source, kf_line, f"duplicate keyframe name {kf['name']!r}")
        keyframes.append(Keyframe(**kf))
        kf = None

    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if ended:
            raise ParseError(source, lineno, "content after 'end'")
        key, *tok = line.split()
        try:
            if key == "motion":
                if name is not None:
                    raise ValueError("duplicate 'motion' line")
                if len(tok) != 3 or tok[1] != "entry":
                    raise ValueError("expected 'motion <name> entry front|back|side|none'")
                name, entry = tok[0], _enum(Entry, tok[2], "entry")
                continue
            if name is None:
                raise ValueError("file must start with 'motion <name> entry ...'")
            if key == "max_failures":
                if kf is not None or keyframes or max_failures is not None or len(tok) != 1:
                    raise ValueError("'max_failures <n>' must appear once, before the first keyframe")
                max_failures = _int(tok[0])
                if max_failures < 1:
                    raise ValueError("max_failures must be >= 1")
            elif key == "keyframe":
                finish(lineno)
                if len(tok) != 1:
                    raise ValueError("expected 'keyframe <name>'")
                kf = {"name": tok[0], "targets": {}, "rules": ()}
                kf_line = lineno
                seen = set()
            elif key == "end":
                if tok:
                    raise ValueError("'end' takes no arguments")
                finish(lineno)
                ended = True
            elif kf is None:
                raise ValueError(f"unknown key {key!r} outside a keyframe")
            elif key in _SINGLE_KEYS and key in seen:
                raise ValueError(f"duplicate {key!r} in keyframe")
            else:
                _keyframe_field(kf, key, tok)
                seen.add(key)
        except ValueError as exc:
            raise ParseError(source, lineno, str(exc)) from None

    if name is None:
        raise ParseError(source, 0, "empty script")
    if not ended:
        finish(0)
        raise ParseError(source, 0, "missing 'end'")
    script = MotionScript(name, entry, tuple(keyframes), max_failures)
    if not keyframes:
        raise ParseError(source, 0, "script has no keyframes")
    for i, k in enumerate(keyframes):
        if k.arm_check and k.arm_check.action == "retry":
            try:
                if script.index_of(k.arm_check.target) > i:
                    raise ParseError(source, 0, f"keyframe {k.name!r}: retry target "
                                     f"{k.arm_check.target!r} is not a previous keyframe")
            except KeyError:
                raise ParseError(source, 0, f"keyframe {k.name!r}: dangling retry target "
                                 f"{k.arm_check.target!r}") from None
    return script


def _keyframe_field(kf: dict, key: str, tok: list[str]) -> None:
    if key == "duration_ms":
        if len(tok) != 1:
            raise ValueError("expected 'duration_ms <int>'")
        d = _int(tok[0])
        if d <= 0:
            raise ValueError("duration_ms must be > 0")
        kf["duration_ms"] = d
    elif key == "interpolation":
        kf["interpolation"] = _enum(Interpolation, _one(tok, key), "interpolation")
    elif key == "support":
        kf["support"] = _enum(SupportMode, _one(tok, key), "support")
    elif key == "target":
        if len(tok) != 2:
            raise ValueError("expected 'target <Joint> <deg>'")
        j, deg = _joint(tok[0]), _float(tok[1])
        lo, hi = LIMITS_DEG[j]
        if not lo <= deg <= hi:
            raise ValueError(f"target {j} {deg} outside range [{lo}, {hi}]")
        if j in kf["targets"]:
            raise ValueError(f"duplicate target {j}")
        kf["targets"][j] = math.radians(deg)
    elif key == "torso_pitch_range":
        kf["pitch_range"] = _range(tok, key)
    elif key == "torso_roll_range":
        kf["roll_range"] = _range(tok, key)
    elif key == "wait":
        if len(tok) != 5 or tok[0] != "torso_pitch" or tok[3] != "max_ms":
            raise ValueError("expected 'wait torso_pitch <min_deg> <max_deg> max_ms <int>'")
        lo, hi = _range(tok[1:3], "wait torso_pitch")
        ms = _int(tok[4])
        if ms < 0:
            raise ValueError("wait max_ms must be >= 0")
        kf["wait"] = WaitCondition(lo, hi, ms)
    elif key == "check_arms":
        kf["arm_check"] = _parse_check(tok)
    elif key == "compensate":
        kf["rules"] = kf["rules"] + (_parse_compensate(tok),)
    elif key == "balance":
        if len(tok) != 3 or tok[0] != "com":
            raise ValueError("expected 'balance com <x_mm> <y_mm>'")
        kf["balance_ref"] = (_float(tok[1]), _float(tok[2]))
    elif key == "oscillate":
        v = _one(tok, key)
        if v not in ("on", "off"):
            raise ValueError("expected 'oscillate on|off'")
        kf["oscillate"] = v == "on"
    else:
        raise ValueError(f"unknown key {key!r}")


def _one(tok: list[str], key: str) -> str:
    if len(tok) != 1:
        raise ValueError(f"{key!r} takes exactly one value")
    return tok[0]


# --- serialization -----------------------------------------------------------

def _deg(rad: float) -> str:
    """Shortest decimal degree string that parses back to exactly ``rad``."""
    d = math.degrees(rad)
    for cand in (d, math.nextafter(d, math.inf), math.nextafter(d, -math.inf)):
        if math.radians(cand) == rad:
            return repr(cand)
    # fall back to a bounded neighbourhood search
    lo = hi = d
    for _ in range(64):
        lo, hi = math.nextafter(lo, -math.inf), math.nextafter(hi, math.inf)
        for cand in (lo, hi):
            if math.radians(cand) == rad:
                return repr(cand)
    return repr(d)


def serialize_script(script: MotionScript) -> str:
    out = [f"motion {script.name} entry {script.entry.value}"]
    if script.max_failures is not None:
        out.append(f"max_failures {script.max_failures}")
    for kf in script.keyframes:
        out.append(f"keyframe {kf.name}")
        out.append(f"  duration_ms {kf.duration_ms}")
        out.append(f"  interpolation {kf.interpolation.value}")
        out.append(f"  support {kf.support.value}")
        for j in JOINTS:
            if j in kf.targets:
                out.append(f"  target {j.value} {_deg(kf.targets[j])}")
        out.append(f"  torso_pitch_range {_deg(kf.pitch_range[0])} {_deg(kf.pitch_range[1])}")
        out.append(f"  torso_roll_range {_deg(kf.roll_range[0])} {_deg(kf.roll_range[1])}")
        if kf.wait:
            w = kf.wait
            out.append(f"  wait torso_pitch {_deg(w.pitch_min)} {_deg(w.pitch_max)} max_ms {w.max_wait_ms}")
        if kf.arm_check:
            c = kf.arm_check
            out.append(f"  check_arms {','.join(j.value for j in c.joints)} threshold "
                       f"{_deg(c.threshold)} action {c.action} {c.target}")
        for r in kf.rules:
            targets = ", ".join(f"{j.value}*{p!r}" for j, p in r.targets)
            out.append(f"  compensate {r.watched.value} threshold {_deg(r.threshold)} -> {targets}")
        if kf.balance_ref is not None:
            out.append(f"  balance com {kf.balance_ref[0]!r} {kf.balance_ref[1]!r}")
        out.append(f"  oscillate {'on' if kf.oscillate else 'off'}")
    out.append("end")
    return "\n".join(out) + "\n"


# --- validation --------------------------------------------------------------

def validate_script(script: MotionScript,
                    limits: Mapping[JointId, tuple[float, float]] = LIMITS_DEG,
                    library: Iterable[str] | None = None,
                    max_wait_ms: int = MAX_WAIT_MS) -> list[Diagnostic]:
    """Check a script against a joint range table (degrees); empty list means valid.

    ``library`` is the set of motion names that ``free_arms`` actions may reference;
    when omitted those references are not checked.
    """
    diags: list[Diagnostic] = []
    if not script.keyframes:
        diags.append(Diagnostic(None, "script has no keyframes"))
    names = [kf.name for kf in script.keyframes]
    for n in {n for n in names if names.count(n) > 1}:
        diags.append(Diagnostic(n, "duplicate keyframe name"))
    if script.max_failures is not None and script.max_failures < 1:
        diags.append(Diagnostic(None, "max_failures must be >= 1"))
    for i, kf in enumerate(script.keyframes):
        add = lambda msg: diags.append(Diagnostic(kf.name, msg))  # noqa: E731
        if kf.duration_ms <= 0:
            add("duration_ms must be > 0")
        for j, rad in kf.targets.items():
            lo, hi = limits[j]
            deg = math.degrees(rad)
            if not math.isfinite(rad) or not (lo - 1e-9 <= deg <= hi + 1e-9):
                add(f"target {j.value} {deg:.2f} deg outside range [{lo}, {hi}]")
        for what, (lo, hi) in (("torso_pitch_range", kf.pitch_range),
                               ("torso_roll_range", kf.roll_range)):
            if lo > hi:
                add(f"{what} is empty (min > max)")
        if kf.wait is not None:
            if not 0 < kf.wait.max_wait_ms <= max_wait_ms:
                add(f"wait max_ms {kf.wait.max_wait_ms} not in (0, {max_wait_ms}]")
            if kf.wait.pitch_min > kf.wait.pitch_max:
                add("wait interval is empty")
        if kf.arm_check is not None:
            c = kf.arm_check
            if c.threshold <= 0:
                add("arm check threshold must be > 0")
            if c.action == "retry":
                if c.target not in names:
                    add(f"retry target {c.target!r} does not exist")
                elif names.index(c.target) > i:
                    add(f"retry target {c.target!r} is not a previous keyframe")
            elif c.action == "free_arms":
                if library is not None and c.target not in library:
                    add(f"free_arms motion {c.target!r} does not exist")
            else:
                add(f"unknown arm check action {c.action!r}")
        for r in kf.rules:
            if r.threshold < 0:
                add(f"compensation threshold for {r.watched.value} is negative")
            for j, p in r.targets:
                if j == r.watched:
                    add(f"{r.watched.value} compensates onto itself")
                if not math.isfinite(p) or abs(p) > MAX_FACTOR:
                    add(f"factor {p} on {j.value} violates |p| <= {MAX_FACTOR}")
        if kf.oscillate and kf.balance_ref is None:
            add("oscillate on requires a balance reference")
    return diags


def resolve_targets(script: MotionScript, start: np.ndarray) -> list[np.ndarray]:
    """Total joint vector per keyframe; unset joints inherit the previous resolved value."""
    out = []
    current = np.asarray(start, dtype=float).copy()
    for kf in script.keyframes:
        current = current.copy()
        for j, rad in kf.targets.items():
            current[INDEX[j]] = rad
        out.append(current)
    return out


# --- library -----------------------------------------------------------------

class ScriptLibrary(dict):
    """Motion scripts by name."""

    def by_entry(self, entry: Entry) -> MotionScript | None:
        for s in self.values():
            if s.entry == entry:
                return s
        return None

    def watched_joints(self) -> list[JointId]:
        watched = set()
        for s in self.values():
            watched |= s.watched_joints()
        return [j for j in JOINTS if j in watched]


def load_library(directory: str | Path | None = None) -> ScriptLibrary:
    """Load every ``*.motion`` file of a directory (default: the bundled scripts)."""
    if directory is None:
        root = resources.files("standup.data").joinpath("scripts")
        files = sorted((p for p in root.iterdir() if p.name.endswith(".motion")), key=lambda p: p.name)
    else:
        directory = Path(directory)
        if not directory.is_dir():
            raise FileNotFoundError(f"script directory {directory} does not exist")
        files = sorted(directory.glob("*.motion"))
    lib = ScriptLibrary()
    origin = {}
    for f in files:
        script = parse_script(f.read_text(encoding="utf-8"), str(f))
        if script.name in lib:
            raise ParseError(str(f), 0, f"duplicate motion name {script.name!r}")
        lib[script.name] = script
        origin[script.name] = str(f)
    for script in lib.values():
        for d in validate_script(script, library=lib.keys()):
            raise ParseError(origin[script.name], 0, str(d))
    return lib

"""The per-cycle stand-up state machine.

Modes: DecideAction picks the next motion from the torso orientation, Working
interpolates keyframes with compensation and balancing, Waiting holds the end
of a keyframe until the torso has tilted far enough, BreakUp lets the robot
fall with low stiffness, Finished and HelpMe are terminal.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import NamedTuple

import numpy as np

from .balance import com_reference_at, oscillation_offsets, pd_balance
from .compensation import (ErrorState, RequestHistory, apply_compensation, ramped_target,
                           rule_thresholds, update_errors)
from .config import EngineConfig, Variant
from .joints import INDEX, NUM_JOINTS, JointId, clamp, from_degrees
from .script import (FEET_SUPPORT, ArmCheck, Entry, MotionScript, ScriptLibrary, SupportMode,
                     resolve_targets)


class Mode(str, Enum):
    DecideAction = "DecideAction"
    Working = "Working"
    Waiting = "Waiting"
    BreakUp = "BreakUp"
    Finished = "Finished"
    HelpMe = "HelpMe"


TERMINAL = frozenset({Mode.Finished, Mode.HelpMe})

# Arms along the body, legs straight: what the robot folds into while falling.
PROTECTIVE_POSE = clamp(from_degrees({
    JointId.LShoulderPitch: 90.0, JointId.RShoulderPitch: 90.0,
    JointId.LShoulderRoll: 8.0, JointId.RShoulderRoll: -8.0,
    JointId.LElbowRoll: -30.0, JointId.RElbowRoll: 30.0,
}))


@dataclass
class CycleInput:
    measured: np.ndarray          # rad
    pitch: float                  # rad, positive = tilted forward
    roll: float                   # rad
    com: tuple[float, float]      # mm, ground frame relative to the support centre
    cycle: int = 0


@dataclass
class CycleOutput:
    request: np.ndarray           # what the servos are asked for
    plain: np.ndarray             # keyframe interpolation without any offsets
    stiffness: np.ndarray
    mode: Mode
    motion: str
    keyframe: str
    support: SupportMode | None
    deltas: np.ndarray            # filtered joint errors (all joints)
    balance: np.ndarray           # balancer offsets


class ArmCheckResult(NamedTuple):
    action: str                   # "pass", "retry" or "free_arms"
    target: str | None = None


def evaluate_arm_check(check: ArmCheck, requested: np.ndarray, measured: np.ndarray) -> ArmCheckResult:
    idx = [INDEX[j] for j in check.joints]
    worst = float(np.max(np.abs(np.asarray(requested)[idx] - np.asarray(measured)[idx])))
    if worst <= check.threshold:  # failing needs an error strictly above the threshold
        return ArmCheckResult("pass")
    return ArmCheckResult(check.action, check.target)


def decide_action(pitch: float, roll: float, library: ScriptLibrary,
                  cfg: EngineConfig) -> MotionScript | None:
    """Motion for the current lying situation, or None when the robot is not lying."""
    if abs(roll) >= cfg.side:
        side = library.by_entry(Entry.Side)
        if side is not None:
            return side
        return library.by_entry(Entry.Front if pitch >= 0 else Entry.Back)
    if pitch >= cfg.facedown:
        return library.by_entry(Entry.Front)
    if pitch <= -cfg.faceup:
        return library.by_entry(Entry.Back)
    return None


@dataclass
class EngineState:
    mode: Mode
    history: RequestHistory
    last_request: np.ndarray
    errors: ErrorState = field(default_factory=ErrorState)
    script: MotionScript | None = None
    kf_index: int = 0
    kf_clock_ms: int = 0
    wait_clock_ms: int = 0
    breakup_clock_ms: int = 0
    consecutive_failures: int = 0
    targets: list = field(default_factory=list)
    start_targets: np.ndarray | None = None
    start_rules: tuple = ()
    prev_ref: tuple[float, float] | None = None
    thresholds: np.ndarray | float = 0.0
    balancing: bool = False
    balance_error: tuple[float, float] = (0.0, 0.0)
    osc_clock_ms: int = 0
    broken_ms: np.ndarray = field(default_factory=lambda: np.zeros(NUM_JOINTS))
    broken: bool = False
    arm_retries: int = 0
    pending_motion: str | None = None
    resuming: bool = False
    # bookkeeping for reports
    attempts: int = 0
    successes: int = 0
    breakups: int = 0
    first_attempt_ok: bool | None = None

    @property
    def keyframe(self):
        if self.script is None or self.mode in (Mode.DecideAction, Mode.BreakUp, Mode.HelpMe):
            return None
        return self.script.keyframes[self.kf_index]


class StandupEngine:
    def __init__(self, library: ScriptLibrary, config: EngineConfig | None = None,
                 variant: Variant | None = None, initial_pose: np.ndarray | None = None):
        self.library = library
        self.config = config or EngineConfig()
        self.variant = variant or Variant()
        # without an explicit pose the first measurement primes the request history
        self._primed = initial_pose is not None
        pose = np.zeros(NUM_JOINTS) if initial_pose is None else np.array(initial_pose, dtype=float)
        self.state = EngineState(Mode.DecideAction,
                                 RequestHistory(self.config.delay_cycles, pose), pose.copy())
        self.state.thresholds = self.config.comp_threshold

    # -- helpers --------------------------------------------------------------

    def _stiff(self, value: float) -> np.ndarray:
        return np.full(NUM_JOINTS, value)

    def _max_failures(self) -> int:
        s = self.state.script
        if s is not None and s.max_failures is not None:
            return s.max_failures
        return self.config.max_failures

    def _hold(self, pose, mode, stiffness, support=None) -> CycleOutput:
        st = self.state
        kf = st.keyframe
        return CycleOutput(pose, pose, self._stiff(stiffness), mode,
                           st.script.name if st.script else "", kf.name if kf else "",
                           support, st.errors.applied, np.zeros(NUM_JOINTS))

    # -- main entry -----------------------------------------------------------

    def step(self, inp: CycleInput) -> CycleOutput:
        st = self.state
        measured = np.asarray(inp.measured, dtype=float)
        if not self._primed:
            st.history.reset(measured)
            st.last_request = measured.copy()
            self._primed = True
        st.errors = update_errors(st.history, measured, st.errors, st.thresholds)
        if st.mode in (Mode.Working, Mode.Waiting):
            over = np.abs(st.errors.delta_t) > self.config.broken_error
            st.broken_ms = np.where(over, st.broken_ms + self.config.cycle_ms, 0)
            if np.any(st.broken_ms >= self.config.broken_time_ms):
                st.broken = True
        else:
            st.broken_ms[:] = 0

        handler = {
            Mode.DecideAction: self._decide,
            Mode.Working: self._working,
            Mode.Waiting: self._waiting,
            Mode.BreakUp: self._breakup,
            Mode.Finished: self._finished,
            Mode.HelpMe: self._helpme,
        }[st.mode]
        out = handler(inp, measured)
        st.history.push(out.request)
        st.last_request = out.request
        return out

    # -- modes ----------------------------------------------------------------

    def _decide(self, inp: CycleInput, measured: np.ndarray) -> CycleOutput:
        st = self.state
        st.history.reset(measured)
        st.errors = ErrorState()
        if st.pending_motion is not None:
            script = self.library[st.pending_motion]
            st.pending_motion = None
        else:
            script = decide_action(inp.pitch, inp.roll, self.library, self.config)
            if script is None:
                st.mode = Mode.Finished
                st.consecutive_failures = 0
                return self._hold(measured, Mode.DecideAction, 1.0)
            # a script re-entered after freeing the arms continues the same attempt
            if script.entry in (Entry.Front, Entry.Back) and not st.resuming:
                st.attempts += 1
            st.resuming = False
        st.script = script
        st.targets = resolve_targets(script, measured)
        st.start_targets = measured.copy()
        st.start_rules = ()
        st.prev_ref = None
        st.balancing = False
        st.osc_clock_ms = 0
        self._enter_keyframe(0)
        out = self._hold(measured, Mode.DecideAction, 1.0)
        st.mode = Mode.Working
        return out

    def _enter_keyframe(self, index: int) -> None:
        st = self.state
        st.kf_index = index
        st.kf_clock_ms = 0
        st.wait_clock_ms = 0
        st.thresholds = rule_thresholds(st.script.keyframes[index].rules, self.config.comp_threshold)

    def _orientation_ok(self, kf, inp: CycleInput) -> bool:
        return (kf.pitch_range[0] <= inp.pitch <= kf.pitch_range[1]
                and kf.roll_range[0] <= inp.roll <= kf.roll_range[1])

    def _working(self, inp: CycleInput, measured: np.ndarray) -> CycleOutput:
        st = self.state
        kf = st.keyframe
        if st.broken or not self._orientation_ok(kf, inp):
            return self._start_breakup(inp, measured)
        st.kf_clock_ms += self.config.cycle_ms
        s = min(st.kf_clock_ms / kf.duration_ms, 1.0)
        out = self._compose(kf, s, inp, Mode.Working)
        if s >= 1.0:
            self._keyframe_end(kf, inp, measured)
        return out

    def _waiting(self, inp: CycleInput, measured: np.ndarray) -> CycleOutput:
        st = self.state
        kf = st.keyframe
        if st.broken or not self._orientation_ok(kf, inp):
            return self._start_breakup(inp, measured)
        st.wait_clock_ms += self.config.cycle_ms
        out = self._compose(kf, 1.0, inp, Mode.Waiting)
        # leave before the next Waiting cycle would exceed the limit
        if kf.wait.satisfied(inp.pitch) or st.wait_clock_ms + self.config.cycle_ms > kf.wait.max_wait_ms:
            self._advance()
        return out

    def _compose(self, kf, s: float, inp: CycleInput, mode: Mode) -> CycleOutput:
        st = self.state
        cfg = self.config
        end = st.targets[st.kf_index]
        start = st.start_targets
        zero = np.zeros(NUM_JOINTS)
        plain = ramped_target(start, end, zero, zero, s, kf.interpolation)
        if self.variant.compensation:
            frame = apply_compensation(kf.rules, st.errors, end, start, st.start_rules)
            request = ramped_target(start, end, frame.start_offsets, frame.end_offsets, s,
                                    kf.interpolation)
        else:
            request = plain
        bal = zero
        if self.variant.balancing and kf.balance_ref is not None:
            prev_ref = st.prev_ref if st.prev_ref is not None else kf.balance_ref
            expected = com_reference_at(prev_ref, kf.balance_ref, s)
            if not st.balancing:
                # first balancing cycle: no derivative kick
                _, st.balance_error = pd_balance(expected, inp.com, (0.0, 0.0), cfg.balance)
                st.balancing = True
            bal, st.balance_error = pd_balance(expected, inp.com, st.balance_error, cfg.balance)
            request = request + bal
        else:
            st.balancing = False
        if self.variant.oscillation and kf.oscillate and st.balancing and kf.support in FEET_SUPPORT:
            request = request + oscillation_offsets(st.osc_clock_ms, cfg.oscillation)
            st.osc_clock_ms += cfg.cycle_ms
        else:
            st.osc_clock_ms = 0
        request = clamp(request)
        return CycleOutput(request, plain, self._stiff(1.0), mode, st.script.name, kf.name,
                           kf.support, st.errors.applied, bal)

    def _keyframe_end(self, kf, inp: CycleInput, measured: np.ndarray) -> None:
        st = self.state
        if kf.arm_check is not None:
            result = evaluate_arm_check(kf.arm_check, st.history.oldest, measured)
            if result.action != "pass":
                st.arm_retries += 1
                if st.arm_retries > self.config.max_arm_retries:
                    st.mode = Mode.BreakUp
                    self._count_failure()
                    return
                if result.action == "retry":
                    st.start_targets = st.targets[st.kf_index]
                    st.start_rules = kf.rules
                    st.prev_ref = kf.balance_ref
                    self._enter_keyframe(st.script.index_of(result.target))
                else:
                    st.pending_motion = result.target
                    st.resuming = True
                    st.mode = Mode.DecideAction
                return
            st.arm_retries = 0
        if self.variant.waiting and kf.wait is not None and not kf.wait.satisfied(inp.pitch):
            st.mode = Mode.Waiting
            st.wait_clock_ms = 0
            return
        self._advance()

    def _advance(self) -> None:
        st = self.state
        kf = st.keyframe
        if st.kf_index + 1 == len(st.script.keyframes):
            if st.script.entry in (Entry.Front, Entry.Back):
                st.mode = Mode.Finished
                st.consecutive_failures = 0
                st.successes += 1
                if st.first_attempt_ok is None:
                    st.first_attempt_ok = True
            else:
                st.mode = Mode.DecideAction
            return
        st.start_targets = st.targets[st.kf_index]
        st.start_rules = kf.rules
        st.prev_ref = kf.balance_ref
        self._enter_keyframe(st.kf_index + 1)
        st.mode = Mode.Working

    def _count_failure(self) -> None:
        st = self.state
        st.consecutive_failures += 1
        st.breakups += 1
        st.breakup_clock_ms = 0
        st.arm_retries = 0
        st.resuming = False
        if st.first_attempt_ok is None:
            st.first_attempt_ok = False

    def _start_breakup(self, inp: CycleInput, measured: np.ndarray) -> CycleOutput:
        self.state.mode = Mode.BreakUp
        self._count_failure()
        return self._breakup(inp, measured)

    def _breakup(self, inp: CycleInput, measured: np.ndarray) -> CycleOutput:
        st = self.state
        st.balancing = False
        st.osc_clock_ms = 0
        st.thresholds = self.config.comp_threshold
        st.breakup_clock_ms += self.config.cycle_ms
        out = self._hold(PROTECTIVE_POSE.copy(), Mode.BreakUp, self.config.breakup_stiffness)
        if st.breakup_clock_ms >= self.config.breakup_duration_ms:
            if st.broken or st.consecutive_failures >= self._max_failures():
                st.mode = Mode.HelpMe
            else:
                st.mode = Mode.DecideAction
        return out

    def _finished(self, inp: CycleInput, measured: np.ndarray) -> CycleOutput:
        st = self.state
        kf = st.script.keyframes[-1] if st.script else None
        return self._hold(st.last_request.copy(), Mode.Finished, 1.0, kf.support if kf else None)

    def _helpme(self, inp: CycleInput, measured: np.ndarray) -> CycleOutput:
        return self._hold(measured.copy(), Mode.HelpMe, 0.0)

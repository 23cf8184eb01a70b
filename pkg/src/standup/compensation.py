"""Joint-error estimation and its redistribution onto other joints.

The raw error of a watched joint is the difference between the request that
should be executing now (issued ``delay`` cycles ago) and the measured angle.
A three-cycle extrapolation of that error is only allowed to shrink it, never
grow it, so compensation is withdrawn promptly once a stuck joint moves again.
"""
from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .joints import INDEX, LOWER, NUM_JOINTS, UPPER
from .script import CompensationRule, Interpolation

PREDICTION_CYCLES = 3


def raw_error(r_past, m):
    return r_past - m


def predict_error(delta_t, delta_prev):
    return PREDICTION_CYCLES * (delta_t - delta_prev) + delta_t


def filter_error(delta_hat, delta_t):
    """Pick the candidate closest to zero; opposite signs (or a zero) give zero."""
    # compare signs rather than the product, which can underflow to zero
    if delta_hat == 0 or delta_t == 0 or (delta_hat > 0) != (delta_t > 0):
        return 0.0
    if abs(delta_hat) < abs(delta_t):
        return delta_hat
    return delta_t


def filter_error_array(delta_hat: np.ndarray, delta_t: np.ndarray) -> np.ndarray:
    out = np.where(np.abs(delta_hat) < np.abs(delta_t), delta_hat, delta_t)
    return np.where(np.sign(delta_hat) * np.sign(delta_t) <= 0, 0.0, out)


class RequestHistory:
    """The last ``depth`` issued requests; ``oldest`` is the one executing now."""

    def __init__(self, depth: int, initial: np.ndarray):
        if depth < 1:
            raise ValueError("delay depth must be >= 1")
        self.depth = depth
        self._buf = deque((np.array(initial, dtype=float) for _ in range(depth)), maxlen=depth)

    @property
    def oldest(self) -> np.ndarray:
        return self._buf[0]

    def push(self, request: np.ndarray) -> None:
        self._buf.append(np.array(request, dtype=float))

    def reset(self, pose: np.ndarray) -> None:
        for _ in range(self.depth):
            self.push(pose)

    def __len__(self) -> int:
        return len(self._buf)


@dataclass
class ErrorState:
    """Per-joint error pipeline values, radians (all joints are tracked)."""
    delta_t: np.ndarray = field(default_factory=lambda: np.zeros(NUM_JOINTS))
    delta_prev: np.ndarray = field(default_factory=lambda: np.zeros(NUM_JOINTS))
    delta_hat: np.ndarray = field(default_factory=lambda: np.zeros(NUM_JOINTS))
    applied: np.ndarray = field(default_factory=lambda: np.zeros(NUM_JOINTS))  # the filtered Delta


def update_errors(history: RequestHistory, measured: np.ndarray, state: ErrorState,
                  thresholds: np.ndarray | float) -> ErrorState:
    delta_t = raw_error(history.oldest, measured)
    delta_hat = predict_error(delta_t, state.delta_t)
    applied = filter_error_array(delta_hat, delta_t)
    applied = np.where(np.abs(delta_t) < thresholds, 0.0, applied)
    return ErrorState(delta_t, state.delta_t.copy(), delta_hat, applied)


def rule_thresholds(rules, default: float) -> np.ndarray:
    """Activation threshold per joint: the rule's own for watched joints, ``default`` elsewhere."""
    th = np.full(NUM_JOINTS, default)
    for r in rules:
        th[INDEX[r.watched]] = r.threshold
    return th


def _offsets(rules: tuple[CompensationRule, ...], applied: np.ndarray) -> np.ndarray:
    off = np.zeros(NUM_JOINTS)
    for r in rules:
        d = applied[INDEX[r.watched]]
        if d == 0.0:
            continue
        for j, p in r.targets:
            off[INDEX[j]] += d * p
    return off


def _clamp_offsets(targets: np.ndarray, off: np.ndarray) -> np.ndarray:
    return np.clip(targets + off, LOWER, UPPER) - targets


@dataclass(frozen=True)
class CompensationFrame:
    end_offsets: np.ndarray    # against the active keyframe's targets
    start_offsets: np.ndarray  # against the previous keyframe's targets


def apply_compensation(rules, errors: ErrorState, end_targets: np.ndarray,
                       start_targets: np.ndarray, prev_rules) -> CompensationFrame:
    """Offsets Delta_j * p_gamma for the end target (current rules) and the start
    target (previous keyframe's rules); several watched joints on one target sum."""
    end = _offsets(tuple(rules), errors.applied)
    start = _offsets(tuple(prev_rules), errors.applied)
    if end.any():
        end = _clamp_offsets(end_targets, end)
    if start.any():
        start = _clamp_offsets(start_targets, start)
    return CompensationFrame(end, start)


def interpolation_weight(s, kind: Interpolation):
    if kind == Interpolation.Cosine:
        return 0.5 - 0.5 * np.cos(np.pi * s) if isinstance(s, np.ndarray) else 0.5 - 0.5 * math.cos(math.pi * s)
    return s


def ramped_target(start, end, start_offset, end_offset, s, kind: Interpolation = Interpolation.Linear):
    """Interpolated request at phase ``s``: the correction ramps linearly from the
    start offset to the end offset, so at s = 0.1 exactly 10% of the end correction
    is in effect. Works on scalars and joint vectors alike."""
    w = interpolation_weight(s, kind)
    return start + w * (end - start) + (1.0 - s) * start_offset + s * end_offset

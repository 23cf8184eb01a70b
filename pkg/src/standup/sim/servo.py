"""Position servos with a command delay line, slew limit, noise and faults.

Delay and measurement follow one convention: a command enqueued at cycle ``t``
is popped at cycle ``t + D`` and the servo slews toward it in that same cycle,
so with unlimited speed ``measured(t) == command(t - D)``.
"""
from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class Fault:
    """A joint that stops following its command.

    ``kind`` is ``hold`` (freeze where it is, or at ``stuck_at`` when given) or
    ``lag`` (follow, but never closer than ``magnitude`` rad to the command).
    The fault ends at ``until_cycle`` or, with ``release_below``, once the command
    has been farther than that from the joint and then comes back within it.
    """
    joint: int
    kind: str = "hold"
    from_cycle: int = 0
    until_cycle: int | None = None
    release_below: float | None = None
    stuck_at: float | None = None
    magnitude: float = 0.0

    def __post_init__(self):
        if self.kind not in ("hold", "lag"):
            raise ValueError(f"unknown fault kind {self.kind!r}")
        if self.until_cycle is not None and self.release_below is not None:
            raise ValueError("a fault ends either at a cycle or on low error, not both")
        if self.kind == "lag" and self.magnitude <= 0:
            raise ValueError("lag faults need a positive magnitude")


class ServoModel:
    """A bank of ``n`` servos sharing one delay depth."""

    def __init__(self, initial, delay: int = 3, max_speed=0.12, noise_sigma: float = 0.0,
                 faults=(), lower=None, upper=None, rng: np.random.Generator | None = None):
        self.position = np.array(initial, dtype=float).reshape(-1)
        n = self.position.size
        self.delay = delay
        self.max_speed = np.broadcast_to(np.asarray(max_speed, dtype=float), (n,)).copy()
        self.noise_sigma = noise_sigma
        self.faults = list(faults)
        self.lower = np.full(n, -np.inf) if lower is None else np.asarray(lower, dtype=float)
        self.upper = np.full(n, np.inf) if upper is None else np.asarray(upper, dtype=float)
        self.rng = rng if rng is not None else np.random.default_rng(0)
        self.target = self.position.copy()
        self._queue = deque(self.position.copy() for _ in range(delay))
        self._released = [False] * len(self.faults)
        self._armed = [False] * len(self.faults)
        self._hold_at: dict[int, float] = {}
        self.rejected: list[tuple[int, int]] = []   # (cycle, joint) of refused commands
        self.measured = self.position.copy()

    def active(self, k: int, cycle: int) -> bool:
        f = self.faults[k]
        if self._released[k] or cycle < f.from_cycle:
            return False
        return f.until_cycle is None or cycle < f.until_cycle

    def command(self, request, cycle: int = 0) -> None:
        """Enqueue a request; out-of-range entries are refused (the old target stays)."""
        request = np.array(request, dtype=float).reshape(-1)
        bad = ~((request >= self.lower) & (request <= self.upper) & np.isfinite(request))
        if bad.any():
            prev = self._queue[-1] if self._queue else self.target
            for j in np.flatnonzero(bad):
                self.rejected.append((cycle, int(j)))
            request = np.where(bad, prev, request)
        self._queue.append(request)

    def advance(self, cycle: int, stiffness=1.0) -> np.ndarray:
        """Apply the command issued ``delay`` cycles ago and return the measurement."""
        self.target = self._queue.popleft()
        speed = self.max_speed * np.asarray(stiffness, dtype=float)
        gap = self.target - self.position
        # land exactly on reachable targets instead of adding a rounded difference
        new = np.where(np.abs(gap) <= speed, self.target, self.position + np.clip(gap, -speed, speed))
        for k, f in enumerate(self.faults):
            if not self.active(k, cycle):
                continue
            j = f.joint
            if f.kind == "hold":
                if k not in self._hold_at:
                    self._hold_at[k] = self.position[j] if f.stuck_at is None else f.stuck_at
                new[j] = self._hold_at[k]
            else:
                gap = self.target[j] - self.position[j]
                if abs(gap) <= f.magnitude:
                    new[j] = self.position[j]
                else:
                    limit = self.target[j] - math.copysign(f.magnitude, gap)
                    new[j] = self.position[j] + math.copysign(min(abs(limit - self.position[j]), speed[j]), gap)
            if f.release_below is not None:
                # armed once the error has been large; released when it falls back below
                if abs(self.target[j] - new[j]) >= f.release_below:
                    self._armed[k] = True
                elif self._armed[k]:
                    self._released[k] = True
        self.position = new
        if self.noise_sigma > 0:
            self.measured = new + self.rng.normal(0.0, self.noise_sigma, new.size)
        else:
            self.measured = new.copy()
        return self.measured

    def servo_step(self, request, cycle: int, stiffness=1.0) -> np.ndarray:
        """Measure this cycle, then enqueue ``request``."""
        measured = self.advance(cycle, stiffness)
        self.command(request, cycle)
        return measured


def servo_step(model: ServoModel, command, cycle: int):
    """Functional form for a single-joint model: returns a float."""
    out = model.servo_step(np.atleast_1d(command), cycle)
    return float(out[0]) if out.size == 1 else out

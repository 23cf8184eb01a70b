"""Engine configuration and the flat ``key=value`` config file format."""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from pathlib import Path

from .balance import BalanceConfig, OscillatorState
from .errors import ParseError


@dataclass(frozen=True)
class Variant:
    """Mechanism toggles; all on is the complete system."""
    compensation: bool = True
    balancing: bool = True
    oscillation: bool = True
    waiting: bool = True

    @property
    def label(self) -> str:
        off = [n for n, on in (("nocomp", self.compensation), ("nobal", self.balancing),
                               ("noosc", self.oscillation), ("nowait", self.waiting)) if not on]
        return "+".join(off) if off else "full"


VARIANTS = {
    "full": Variant(),
    "nocomp": Variant(compensation=False),
    "nobal": Variant(balancing=False),
    "noosc": Variant(oscillation=False),
    "nowait": Variant(waiting=False),
    "bare": Variant(False, False, False, False),
}


@dataclass(frozen=True)
class EngineConfig:
    cycle_ms: int = 12
    delay_cycles: int = 3
    max_failures: int = 3
    facedown: float = math.radians(60.0)
    faceup: float = math.radians(60.0)
    side: float = math.radians(60.0)
    breakup_duration_ms: int = 1000
    breakup_stiffness: float = 0.1
    comp_threshold: float = math.radians(2.0)
    broken_error: float = math.radians(30.0)
    broken_time_ms: int = 2000
    max_arm_retries: int = 6
    balance: BalanceConfig = field(default_factory=BalanceConfig)
    oscillation: OscillatorState = field(default_factory=OscillatorState)

    def __post_init__(self):
        if self.cycle_ms <= 0 or self.delay_cycles < 1 or self.max_failures < 1:
            raise ValueError("cycle_ms > 0, delay_cycles >= 1 and max_failures >= 1 required")
        if self.breakup_duration_ms <= 0:
            raise ValueError("breakup.duration_ms must be > 0")

    def as_pairs(self) -> list[tuple[str, str]]:
        """Flat key/value view, in a fixed order, as written into trace headers."""
        return [(k, _fmt(get(self))) for k, (get, _) in KEYS.items()]


def _fmt(v) -> str:
    return repr(v)


def _deg_key(attr, sub=None):
    if sub is None:
        return (lambda c: math.degrees(getattr(c, attr)),
                lambda c, v: replace(c, **{attr: math.radians(v)}))
    return (lambda c: math.degrees(getattr(getattr(c, sub), attr)),
            lambda c, v: replace(c, **{sub: replace(getattr(c, sub), **{attr: math.radians(v)})}))


def _plain_key(attr, cast=float, sub=None):
    if sub is None:
        return (lambda c: getattr(c, attr),
                lambda c, v: replace(c, **{attr: cast(v)}))
    return (lambda c: getattr(getattr(c, sub), attr),
            lambda c, v: replace(c, **{sub: replace(getattr(c, sub), **{attr: cast(v)})}))


def _int(v: float) -> int:
    if v != int(v):
        raise ValueError(f"expected an integer, got {v}")
    return int(v)


KEYS = {
    "cycle_ms": _plain_key("cycle_ms", _int),
    "delay_cycles": _plain_key("delay_cycles", _int),
    "max_failures": _plain_key("max_failures", _int),
    "thresholds.facedown_deg": _deg_key("facedown"),
    "thresholds.faceup_deg": _deg_key("faceup"),
    "thresholds.side_deg": _deg_key("side"),
    "breakup.duration_ms": _plain_key("breakup_duration_ms", _int),
    "breakup.stiffness": _plain_key("breakup_stiffness"),
    "compensation.threshold_deg": _deg_key("comp_threshold"),
    "broken.error_deg": _deg_key("broken_error"),
    "broken.time_ms": _plain_key("broken_time_ms", _int),
    "arm_check.max_retries": _plain_key("max_arm_retries", _int),
    "balance.kp": _plain_key("kp", sub="balance"),
    "balance.kd": _plain_key("kd", sub="balance"),
    "balance.alpha": _plain_key("alpha", sub="balance"),
    "balance.clamp_deg": _deg_key("clamp", sub="balance"),
    "balance.deadband_mm": _plain_key("deadband", sub="balance"),
    "oscillation.amplitude_deg": _deg_key("amplitude", sub="oscillation"),
    "oscillation.period_ms": _plain_key("period_ms", sub="oscillation"),
}


def apply_overrides(cfg: EngineConfig, pairs, source: str = "<overrides>") -> EngineConfig:
    for lineno, (key, value) in enumerate(pairs, 1):
        if key not in KEYS:
            raise ParseError(source, lineno, f"unknown config key {key!r}")
        try:
            cfg = KEYS[key][1](cfg, float(value))
        except ValueError as exc:
            raise ParseError(source, lineno, f"{key}: {exc}") from None
    return cfg


def parse_pairs(text: str, source: str = "<config>") -> list[tuple[str, str]]:
    pairs = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, eq, value = line.partition("=")
        if not eq or not key.strip() or not value.strip():
            raise ParseError(source, lineno, "expected 'key = value'")
        pairs.append((key.strip(), value.strip()))
    return pairs


def load_config(path: str | Path | None = None, overrides=()) -> EngineConfig:
    cfg = EngineConfig()
    if path is not None:
        path = Path(path)
        text = path.read_text(encoding="utf-8")
        # report line numbers of the file itself
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            pair = parse_pairs(line, str(path))
            try:
                cfg = apply_overrides(cfg, pair, str(path))
            except ParseError as exc:
                raise ParseError(str(path), lineno, exc.message) from None
    return apply_overrides(cfg, overrides)

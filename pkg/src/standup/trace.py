"""Per-cycle trace CSV: writing, reading and replay through the engine.

A trace starts with ``#`` header lines (schema version, script fingerprint,
config and variant), then a CSV header row and one row per cycle. Sensor
columns hold exactly what the engine saw, so feeding them back through a fresh
engine must reproduce every output column character for character.
"""
from __future__ import annotations

import csv
import hashlib
import io
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .config import KEYS, EngineConfig, Variant, apply_overrides
from .engine import CycleInput, CycleOutput, StandupEngine
from .errors import ReplayMismatch
from .joints import INDEX, JOINTS, JointId
from .script import ScriptLibrary, load_library, serialize_script

SCHEMA = "standup-trace/1"
VARIANT_FIELDS = ("compensation", "balancing", "oscillation", "waiting")


def library_digest(library: ScriptLibrary) -> str:
    h = hashlib.sha256()
    for name in sorted(library):
        h.update(serialize_script(library[name]).encode())
    return h.hexdigest()


def columns(watched: list[JointId]) -> list[str]:
    cols = ["cycle", "time_ms", "mode", "keyframe"]
    for j in JOINTS:
        cols += [f"req_{j.value}", f"cmp_{j.value}", f"meas_{j.value}"]
    cols += ["torso_pitch", "torso_roll", "com_x", "com_y"]
    cols += [f"delta_{j.value}" for j in watched]
    return cols


def _f(x: float) -> str:
    return f"{x:.6f}"


def format_row(inp: CycleInput, out: CycleOutput, cycle_ms: int, watched_idx: list[int]) -> list[str]:
    kf = f"{out.motion}.{out.keyframe}" if out.keyframe else out.motion
    row = [str(inp.cycle), str(inp.cycle * cycle_ms), out.mode.value, kf]
    for i in range(len(JOINTS)):
        row += [_f(out.plain[i]), _f(out.request[i]), _f(inp.measured[i])]
    row += [_f(inp.pitch), _f(inp.roll), _f(inp.com[0]), _f(inp.com[1])]
    row += [_f(out.deltas[i]) for i in watched_idx]
    return row


@dataclass
class TraceHeader:
    schema: str
    scripts: str
    digest: str
    config: list[tuple[str, str]]
    variant: Variant
    scenario: str = ""


def header_lines(h: TraceHeader) -> list[str]:
    flags = " ".join(f"{k}={int(getattr(h.variant, k))}" for k in VARIANT_FIELDS)
    lines = [f"# schema {h.schema}", f"# scenario {h.scenario}",
             f"# scripts {h.scripts}", f"# scripts_sha256 {h.digest}", f"# variant {flags}"]
    lines += [f"# config {k}={v}" for k, v in h.config]
    return lines


def render(header: TraceHeader, library: ScriptLibrary, inputs, outputs, cycle_ms: int) -> str:
    watched = library.watched_joints()
    idx = [INDEX[j] for j in watched]
    buf = io.StringIO()
    for line in header_lines(header):
        buf.write(line + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns(watched))
    for inp, out in zip(inputs, outputs):
        w.writerow(format_row(inp, out, cycle_ms, idx))
    return buf.getvalue()


def write_trace(path: str | Path, text: str) -> None:
    Path(path).write_text(text, encoding="utf-8")


@dataclass
class Trace:
    header: TraceHeader
    columns: list[str]
    rows: list[list[str]]


def parse_trace(text: str) -> Trace:
    meta: dict[str, list[str]] = {}
    lines = text.splitlines()
    body_start = 0
    for k, line in enumerate(lines):
        if not line.startswith("#"):
            body_start = k
            break
        key, _, value = line[1:].strip().partition(" ")
        meta.setdefault(key, []).append(value)
    else:
        body_start = len(lines)
    if meta.get("schema") != [SCHEMA]:
        raise ReplayMismatch(f"unsupported trace schema {meta.get('schema')}, expected {SCHEMA}")
    try:
        variant_kw = dict(item.split("=") for item in meta["variant"][0].split())
        variant = Variant(**{k: variant_kw[k] == "1" for k in VARIANT_FIELDS})
        config = [tuple(item.split("=", 1)) for item in meta.get("config", [])]
        header = TraceHeader(SCHEMA, meta["scripts"][0], meta["scripts_sha256"][0], config,
                             variant, meta.get("scenario", [""])[0])
    except (KeyError, ValueError, IndexError) as exc:
        raise ReplayMismatch(f"malformed trace header: {exc}") from None
    reader = csv.reader(lines[body_start:])
    try:
        cols = next(reader)
    except StopIteration:
        raise ReplayMismatch("trace has no column header") from None
    return Trace(header, cols, list(reader))


def read_trace(path: str | Path) -> Trace:
    return parse_trace(Path(path).read_text(encoding="utf-8"))


def _config_from_header(pairs) -> EngineConfig:
    names = [k for k, _ in pairs]
    if sorted(names) != sorted(KEYS):
        missing = sorted(set(KEYS) - set(names))
        extra = sorted(set(names) - set(KEYS))
        raise ReplayMismatch(f"config keys differ from this build (missing {missing}, unknown {extra})")
    cfg = apply_overrides(EngineConfig(), pairs, "<trace header>")
    if cfg.as_pairs() != list(pairs):
        raise ReplayMismatch("config in trace header does not round-trip")
    return cfg


@dataclass
class ReplayReport:
    identical: bool
    cycles: int
    first_divergence: int | None = None
    column: str | None = None
    recorded: str | None = None
    replayed: str | None = None

    def __str__(self) -> str:
        if self.identical:
            return f"identical ({self.cycles} cycles)"
        return (f"divergence at cycle {self.first_divergence}, column {self.column}: "
                f"recorded {self.recorded} replayed {self.replayed}")


def replay(trace: Trace, library: ScriptLibrary | None = None,
           config: EngineConfig | None = None) -> ReplayReport:
    """Re-run the engine on the recorded sensor columns and compare every output column."""
    h = trace.header
    if library is None:
        library = load_library(None if h.scripts == "bundled" else h.scripts)
    if library_digest(library) != h.digest:
        raise ReplayMismatch("motion scripts differ from the ones the trace was recorded with")
    recorded_cfg = _config_from_header(h.config)
    if config is not None and config != recorded_cfg:
        raise ReplayMismatch("engine config differs from the one the trace was recorded with")
    watched = library.watched_joints()
    if trace.columns != columns(watched):
        raise ReplayMismatch("trace columns do not match this build's schema")
    col = {c: i for i, c in enumerate(trace.columns)}
    meas_cols = [col[f"meas_{j.value}"] for j in JOINTS]
    idx = [INDEX[j] for j in watched]
    engine = StandupEngine(library, recorded_cfg, h.variant)
    for row in trace.rows:
        try:
            inp = CycleInput(_row_measured(row, meas_cols), float(row[col["torso_pitch"]]),
                             float(row[col["torso_roll"]]),
                             (float(row[col["com_x"]]), float(row[col["com_y"]])), int(row[0]))
        except (ValueError, IndexError) as exc:
            raise ReplayMismatch(f"unreadable row {row[:1]}: {exc}") from None
        out = engine.step(inp)
        again = format_row(inp, out, recorded_cfg.cycle_ms, idx)
        if again != row:
            k = next(i for i, (a, b) in enumerate(zip(row, again)) if a != b) \
                if len(again) == len(row) else len(row)
            return ReplayReport(False, len(trace.rows), inp.cycle, trace.columns[min(k, len(trace.columns) - 1)],
                                row[k] if k < len(row) else "", again[k] if k < len(again) else "")
    return ReplayReport(True, len(trace.rows))


def _row_measured(row, meas_cols) -> np.ndarray:
    return np.array([float(row[i]) for i in meas_cols])


def trace_text(inputs, outputs, library: ScriptLibrary, config: EngineConfig, variant: Variant,
               scripts: str = "bundled", scenario: str = "") -> str:
    header = TraceHeader(SCHEMA, scripts, library_digest(library), config.as_pairs(), variant, scenario)
    return render(header, library, inputs, outputs, config.cycle_ms)

"""Seeded random scenario batches run under several variants (paired comparison)."""
from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from ..config import VARIANTS, EngineConfig, Variant
from ..joints import JointId
from ..script import ScriptLibrary
from ..trace import trace_text
from .scenario import FaultSpec, Outcome, Push, Scenario, run_scenario

FAULT_JOINTS = (
    JointId.HipYawPitch,
    JointId.LHipPitch, JointId.RHipPitch,
    JointId.LKneePitch, JointId.RKneePitch,
    JointId.LAnklePitch, JointId.RAnklePitch,
    JointId.LShoulderPitch, JointId.RShoulderPitch,
)

REPORT_COLUMNS = ("variant", "runs", "tries", "successes", "success_rate", "first_try_successes",
                  "breakups", "helpme", "cycle_cap", "mean_cycles_to_finish")


@dataclass(frozen=True)
class BatchSettings:
    n: int = 200
    seed: int = 0
    max_stuck_deg: float = 20.0
    min_stuck_deg: float = 4.0
    fault_probability: float = 0.7
    max_tilt_deg: float = 3.0
    push_probability: float = 0.5
    max_push_rad_s: float = 0.6
    max_noise_deg: float = 0.3
    side_probability: float = 0.1

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("batch size must be >= 1")
        if not 0 <= self.min_stuck_deg <= self.max_stuck_deg:
            raise ValueError("need 0 <= min_stuck_deg <= max_stuck_deg")


def scenario_seed(batch_seed: int, index: int) -> int:
    """Per-scenario seed derived from (batch seed, index) alone."""
    words = np.random.SeedSequence([batch_seed, index]).generate_state(2, dtype=np.uint32)
    return int(words[0]) << 32 | int(words[1])


def random_scenario(index: int, settings: BatchSettings) -> Scenario:
    seed = scenario_seed(settings.seed, index)
    rng = np.random.default_rng(seed)
    u = rng.random()
    if u < settings.side_probability:
        initial = "side_left" if rng.random() < 0.5 else "side_right"
    else:
        initial = "front" if rng.random() < 0.5 else "back"
    tilt = math.radians(rng.uniform(-settings.max_tilt_deg, settings.max_tilt_deg))
    noise = math.radians(rng.uniform(0.0, settings.max_noise_deg))
    faults = []
    if rng.random() < settings.fault_probability:
        j = FAULT_JOINTS[rng.integers(len(FAULT_JOINTS))]
        mag = math.radians(rng.uniform(settings.min_stuck_deg, settings.max_stuck_deg))
        start = int(rng.integers(0, 300))
        until = start + int(rng.integers(60, 400)) if rng.random() < 0.4 else None
        faults.append(FaultSpec(j, "lag", start, until, magnitude=mag))
    pushes = []
    if rng.random() < settings.push_probability:
        pushes.append(Push(int(rng.integers(0, 5000)),
                           float(rng.uniform(-settings.max_push_rad_s, settings.max_push_rad_s))))
    return Scenario(f"batch{settings.seed}_{index}", initial, tilt, seed, noise,
                    tuple(faults), tuple(pushes))


@dataclass
class RunSummary:
    index: int
    variant: str
    outcome: Outcome
    cycles: int
    attempts: int
    successes: int
    breakups: int
    first_try: bool
    faulted: bool
    trace: str | None = None


def _run_one(args) -> RunSummary:
    index, settings, vname, library, config, max_cycles, keep = args
    sc = random_scenario(index, settings)
    variant = VARIANTS[vname]
    res = run_scenario(sc, library, config, variant, max_cycles, record=keep)
    text = trace_text(res.inputs, res.outputs, library, config, variant, scenario=sc.name) if keep else None
    return RunSummary(index, vname, res.outcome, res.cycles, res.attempts, res.successes,
                      res.breakups, res.first_attempt_ok, bool(sc.faults), text)


def run_batch(settings: BatchSettings, library: ScriptLibrary, variants=("full", "nocomp"),
              config: EngineConfig | None = None, max_cycles: int = 5000, keep_traces: bool = False,
              jobs: int = 1) -> list[RunSummary]:
    config = config or EngineConfig()
    for v in variants:
        if v not in VARIANTS:
            raise ValueError(f"unknown variant {v!r}; known: {', '.join(VARIANTS)}")
    work = [(i, settings, v, library, config, max_cycles, keep_traces)
            for v in variants for i in range(settings.n)]
    if jobs > 1:
        with ProcessPoolExecutor(jobs) as pool:
            runs = list(pool.map(_run_one, work, chunksize=8))
    else:
        runs = [_run_one(w) for w in work]
    order = {v: k for k, v in enumerate(variants)}
    return sorted(runs, key=lambda r: (order[r.variant], r.index))


@dataclass
class VariantStats:
    variant: str
    runs: int = 0
    tries: int = 0
    successes: int = 0
    first_try_successes: int = 0
    breakups: int = 0
    helpme: int = 0
    cycle_cap: int = 0
    finish_cycles: list[int] = field(default_factory=list)

    @property
    def success_rate(self) -> float:
        return self.successes / self.tries if self.tries else 0.0

    @property
    def mean_cycles(self) -> float:
        return sum(self.finish_cycles) / len(self.finish_cycles) if self.finish_cycles else float("nan")

    def row(self) -> list[str]:
        return [self.variant, str(self.runs), str(self.tries), str(self.successes),
                f"{self.success_rate:.4f}", str(self.first_try_successes), str(self.breakups),
                str(self.helpme), str(self.cycle_cap), f"{self.mean_cycles:.1f}"]


def summarize(runs: list[RunSummary]) -> list[VariantStats]:
    stats: dict[str, VariantStats] = {}
    for r in runs:
        s = stats.setdefault(r.variant, VariantStats(r.variant))
        s.runs += 1
        s.tries += r.attempts
        s.successes += r.successes
        s.first_try_successes += int(r.first_try)
        s.breakups += r.breakups
        s.helpme += int(r.outcome == Outcome.HelpMe)
        s.cycle_cap += int(r.outcome == Outcome.CycleCap)
        if r.outcome == Outcome.Finished:
            s.finish_cycles.append(r.cycles)
    return list(stats.values())


def report_csv(stats: list[VariantStats]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(REPORT_COLUMNS)
    for s in stats:
        w.writerow(s.row())
    return buf.getvalue()


def report_table(stats: list[VariantStats]) -> str:
    header = ("variant", "runs", "tries", "succ", "rate", "first", "breakups", "helpme", "cap", "cycles")
    rows = [header] + [tuple(s.row()) for s in stats]
    widths = [max(len(r[i]) for r in rows) for i in range(len(header))]
    return "\n".join("  ".join(c.rjust(w) if i else c.ljust(w) for i, (c, w) in enumerate(zip(r, widths)))
                     for r in rows) + "\n"


def runs_csv(runs: list[RunSummary]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("index", "variant", "outcome", "cycles", "attempts", "successes", "breakups",
                "first_try", "faulted"))
    for r in runs:
        w.writerow((r.index, r.variant, r.outcome.value, r.cycles, r.attempts, r.successes,
                    r.breakups, int(r.first_try), int(r.faulted)))
    return buf.getvalue()

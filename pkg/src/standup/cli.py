"""Command-line front end: ``standup run|batch|replay|validate``.

Exit codes: 0 success, 1 usage/parse/IO error or replay mismatch, 2 run ended in
HelpMe, 3 run hit the cycle cap, 4 replay diverged, 5 script failed validation.
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import __version__
from .config import VARIANTS, Variant, load_config, parse_pairs
from .errors import ParseError, ReplayMismatch
from .script import load_library, parse_script, validate_script
from .sim.scenario import DEFAULT_MAX_CYCLES, Outcome, load_scenario, run_scenario
from .trace import read_trace, replay, trace_text

EXIT_OK, EXIT_ERROR, EXIT_HELPME, EXIT_CAP, EXIT_DIVERGED, EXIT_INVALID = 0, 1, 2, 3, 4, 5
_RUN_EXIT = {Outcome.Finished: EXIT_OK, Outcome.HelpMe: EXIT_HELPME, Outcome.CycleCap: EXIT_CAP}


def _config(args):
    overrides = []
    for item in args.set or ():
        overrides += parse_pairs(item, "--set")
    return load_config(args.config, overrides)


def _library(scripts: str | None):
    return load_library(scripts), ("bundled" if scripts is None else str(Path(scripts).resolve()))


def cmd_run(args) -> int:
    scenario = load_scenario(args.scenario)
    library, label = _library(args.scripts)
    config = _config(args)
    variant = Variant(compensation=not args.no_compensation, balancing=not args.no_balancing,
                      oscillation=not args.no_oscillation, waiting=not args.no_waiting)
    result = run_scenario(scenario, library, config, variant, args.max_cycles)
    if args.trace:
        text = trace_text(result.inputs, result.outputs, library, config, variant, label, scenario.name)
        Path(args.trace).write_text(text, encoding="utf-8")
    if args.plot:
        from .plotting import plot_run
        plot_run(result.inputs, result.outputs, args.plot, config.cycle_ms)
    last = result.outputs[-1]
    where = f"{last.motion}.{last.keyframe}" if last.keyframe else (last.motion or "-")
    print(f"{scenario.name}: {result.outcome.value} after {result.cycles} cycles "
          f"({result.cycles * config.cycle_ms} ms), variant {variant.label}, "
          f"attempts {result.attempts}, breakups {result.breakups}, last {where}")
    return _RUN_EXIT[result.outcome]


def cmd_batch(args) -> int:
    from .sim.batch import BatchSettings, report_csv, report_table, run_batch, runs_csv, summarize

    variants = tuple(v.strip() for v in args.variants.split(",") if v.strip())
    unknown = [v for v in variants if v not in VARIANTS]
    if unknown or not variants:
        raise SystemExit(_usage(f"unknown variant(s) {', '.join(unknown) or '(none)'}; "
                                f"choose from {', '.join(VARIANTS)}"))
    settings = BatchSettings(n=args.n, seed=args.seed, max_stuck_deg=args.max_stuck_deg,
                             min_stuck_deg=min(BatchSettings.min_stuck_deg, args.max_stuck_deg),
                             max_tilt_deg=args.max_tilt_deg,
                             push_probability=0.0 if args.no_pushes else BatchSettings.push_probability)
    library, _ = _library(args.scripts)
    config = _config(args)
    runs = run_batch(settings, library, variants, config, args.max_cycles,
                     keep_traces=args.traces, jobs=args.jobs)
    stats = summarize(runs)
    print(report_table(stats), end="")
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "report.csv").write_text(report_csv(stats), encoding="utf-8")
        (out / "runs.csv").write_text(runs_csv(runs), encoding="utf-8")
        from .plotting import plot_batch
        plot_batch(stats, out / "report.png")
        if args.traces:
            tdir = out / "traces"
            tdir.mkdir(exist_ok=True)
            for r in runs:
                (tdir / f"{r.variant}_{r.index:04d}.csv").write_text(r.trace, encoding="utf-8")
    return EXIT_OK


def cmd_replay(args) -> int:
    trace = read_trace(args.trace)
    config = _config(args) if (args.config or args.set) else None
    library = load_library(args.scripts) if args.scripts else None
    report = replay(trace, library, config)
    print(report)
    return EXIT_OK if report.identical else EXIT_DIVERGED


def cmd_validate(args) -> int:
    path = Path(args.script)
    script = parse_script(path.read_text(encoding="utf-8"), str(path))
    names = set(load_library(args.scripts)) | {script.name} if args.scripts else None
    diags = validate_script(script, library=names)
    for d in diags:
        print(f"{path}: {d}")
    if diags:
        return EXIT_INVALID
    print(f"{path}: ok ({len(script.keyframes)} keyframes)")
    return EXIT_OK


def _usage(msg: str) -> int:
    print(f"standup: error: {msg}", file=sys.stderr)
    return EXIT_ERROR


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on bad usage; 2 is taken by HelpMe here
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_ERROR, f"{self.prog}: error: {message}\n")


def _add_config_flags(p) -> None:
    p.add_argument("--config", help="key=value engine config file")
    p.add_argument("--set", action="append", metavar="KEY=VALUE", help="override one config key")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="standup", description=__doc__.split("\n")[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("run", help="run one scenario file")
    p.add_argument("scenario")
    p.add_argument("--scripts", help="directory of .motion files (default: bundled)")
    p.add_argument("--no-compensation", action="store_true")
    p.add_argument("--no-balancing", action="store_true")
    p.add_argument("--no-oscillation", action="store_true")
    p.add_argument("--no-waiting", action="store_true")
    p.add_argument("--trace", help="write the per-cycle trace CSV here")
    p.add_argument("--plot", help="write a PNG of torso orientation and joint angles here")
    p.add_argument("--max-cycles", type=int, default=DEFAULT_MAX_CYCLES)
    _add_config_flags(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("batch", help="paired variant comparison on random scenarios")
    p.add_argument("--n", type=int, default=200)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--variants", default="full,nocomp")
    p.add_argument("--out", help="directory for report.csv, runs.csv and report.png")
    p.add_argument("--traces", action="store_true", help="also write every trace under OUT/traces")
    p.add_argument("--scripts")
    p.add_argument("--max-stuck-deg", type=float, default=20.0)
    p.add_argument("--max-tilt-deg", type=float, default=3.0)
    p.add_argument("--no-pushes", action="store_true")
    p.add_argument("--max-cycles", type=int, default=DEFAULT_MAX_CYCLES)
    p.add_argument("--jobs", type=int, default=1, help="worker processes")
    _add_config_flags(p)
    p.set_defaults(func=cmd_batch)

    p = sub.add_parser("replay", help="re-run the engine on a recorded trace")
    p.add_argument("trace")
    p.add_argument("--scripts", help="override the script directory named in the trace")
    _add_config_flags(p)
    p.set_defaults(func=cmd_replay)

    p = sub.add_parser("validate", help="parse and check one motion script")
    p.add_argument("script")
    p.add_argument("--scripts", help="library that free_arms targets must exist in")
    p.set_defaults(func=cmd_validate)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if getattr(args, "max_cycles", 1) < 1:
            return _usage("--max-cycles must be >= 1")
        if getattr(args, "n", 1) < 1:
            return _usage("--n must be >= 1")
        return args.func(args)
    except ParseError as exc:
        return _usage(str(exc))
    except ReplayMismatch as exc:
        return _usage(f"replay mismatch: {exc}")
    except (OSError, ValueError) as exc:
        return _usage(str(exc))


if __name__ == "__main__":
    sys.exit(main())

"""``coupledpid`` command line: list, run, compare and tune.

Exit codes: 0 success, 1 usage or configuration error, 2 numeric,
identification or tuning failure.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

from .errors import ConfigurationError, IdentificationError, NumericFailure, TuningError
from .metrics import step_metrics
from .report import ComparisonReport, emit_csv, emit_plot
from .scenarios import builtin_scenarios, render_scenario, resolve_scenario, step_window
from .simloop import run_closed_loop
from .tuning import autotune, relay_identify, ziegler_nichols

EXIT_OK, EXIT_USAGE, EXIT_FAILURE = 0, 1, 2


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(f"{self.prog}: error: {message}")


def build_parser():
    parser = _Parser(prog="coupledpid", description="Simulate and compare PI/PID loops on tank plants.")
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("list", help="list the built-in scenarios")

    run = sub.add_parser("run", help="simulate one scenario")
    run.add_argument("--scenario", required=True, help="built-in name or scenario file")
    run.add_argument("--seed", type=int)
    run.add_argument("--duration", type=float)
    run.add_argument("--out", type=Path, help="directory for <name>.csv and <name>.svg (default: CSV on stdout)")

    cmp_ = sub.add_parser("compare", help="paired PI vs PID run with a metrics report")
    cmp_.add_argument("--pi", required=True)
    cmp_.add_argument("--pid", required=True)
    cmp_.add_argument("--seed", type=int)
    cmp_.add_argument("--out", type=Path, help="directory for both CSVs, compare.svg and report.txt")

    tune = sub.add_parser("tune", help="relay identification, Ziegler-Nichols, then ITAE descent")
    tune.add_argument("--scenario", required=True)
    tune.add_argument("--kind", required=True, type=str.lower, choices=("pi", "pid"))
    tune.add_argument("--budget", type=int, default=100)
    return parser


def _load(name, seed=None, duration=None):
    sc = resolve_scenario(name)
    if seed is not None:
        sc = replace(sc, seed=seed)
    if duration is not None:
        sc = replace(sc, duration=duration)
    return sc


def _write(path: Path, text: str):
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def cmd_list(args, out):
    for name, sc in builtin_scenarios().items():
        c = sc.controller
        out.write(f"{name:<10} {c.kind:<4} kp={c.kp!r} ti={c.ti!r} td={c.td!r} beta={c.beta!r} ts={c.ts!r}\n")


def cmd_run(args, out):
    sc = _load(args.scenario, args.seed, args.duration)
    trace = run_closed_loop(sc)
    if args.out is None:
        out.write(emit_csv(trace))
        return
    _write(args.out / f"{sc.name}.csv", emit_csv(trace))
    _write(args.out / f"{sc.name}.svg", emit_plot([trace], [sc.name], title=sc.name))
    out.write(f"wrote {args.out / sc.name}.csv and .svg\n")


def cmd_compare(args, out):
    sc_pi = _load(args.pi, args.seed)
    sc_pid = _load(args.pid, args.seed)
    traces, metrics = [], []
    for sc in (sc_pi, sc_pid):
        trace = run_closed_loop(sc)
        window, step = step_window(sc)
        traces.append(trace)
        metrics.append(step_metrics(trace, window, step))
    report = ComparisonReport.from_metrics(sc_pi.name, sc_pid.name, *metrics)
    text = report.render()
    out.write(text)
    if args.out is not None:
        for sc, trace in zip((sc_pi, sc_pid), traces):
            _write(args.out / f"{sc.name}.csv", emit_csv(trace))
        _write(args.out / "compare.svg",
               emit_plot(traces, [sc_pi.name, sc_pid.name], title=f"{sc_pi.name} vs {sc_pid.name}"))
        _write(args.out / "report.txt", text)


def cmd_tune(args, out):
    sc = _load(args.scenario)
    up = relay_identify(sc)
    out.write(f"relay ku={up.ku:.6g} tu={up.tu:.6g}\n")
    zn = replace(ziegler_nichols(up, args.kind), u_min=sc.controller.u_min, u_max=sc.controller.u_max)
    result = autotune(sc, zn, budget=args.budget, log=lambda line: out.write(line + "\n"))
    out.write(f"objective {result.objective_initial:.6g} -> {result.objective_final:.6g} "
              f"in {result.evaluations} evaluations (converged={result.converged})\n\n")
    tuned = replace(sc, controller=result.config, name=f"{sc.name}-tuned")
    out.write(render_scenario(tuned))


COMMANDS = {"list": cmd_list, "run": cmd_run, "compare": cmd_compare, "tune": cmd_tune}


def main(argv=None, out=None, err=None) -> int:
    out = sys.stdout if out is None else out
    err = sys.stderr if err is None else err
    try:
        args = build_parser().parse_args(argv)
        COMMANDS[args.command](args, out)
    except _UsageError as exc:
        err.write(f"{exc}\n")
        return EXIT_USAGE
    except (ConfigurationError, OSError) as exc:
        err.write(f"coupledpid: error: {exc}\n")
        return EXIT_USAGE
    except (NumericFailure, IdentificationError, TuningError) as exc:
        err.write(f"coupledpid: failure: {exc}\n")
        return EXIT_FAILURE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())

"""Command line entry point ``mpsc``.

Exit codes: 0 success, 2 configuration error, 3 safety fault, 4 solver failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from ..errors import ConfigError, SafetyFault, SolverFailure
from ..scenario import ScenarioBound, scenario_confidence
from . import experiment, output
from .config import load_config

EXIT_OK, EXIT_CONFIG, EXIT_SAFETY, EXIT_SOLVER = 0, 2, 3, 4


def _load_design(path):
    try:
        data = json.loads(Path(path).read_text())
        return experiment.design_from_dict(data)
    except (OSError, ValueError, KeyError) as exc:
        raise ConfigError(f"cannot read design {path}: {exc}") from exc


def _emit(obj, path):
    text = output.dumps(obj)
    if path:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        Path(path).write_text(text)
    else:
        sys.stdout.write(text)


def cmd_design(args):
    cfg = load_config(args.config)
    d = experiment.design(cfg)
    _emit(experiment.design_to_dict(d, cfg), args.output)


def cmd_simulate(args):
    cfg = load_config(args.config)
    d = _load_design(args.design) if args.design else None
    res = experiment.run_experiment(cfg, d, args.output, plots=not args.no_plots)
    s = res.summary
    print(f"{cfg.name}: {cfg.steps} steps, {s['interference']['count']} interventions, "
          f"{s['constraints']['state_violations']} state / "
          f"{s['constraints']['input_violations']} input violations; output in {args.output}")


def cmd_validate(args):
    cfg = load_config(args.config)
    d = _load_design(args.design) if args.design else experiment.design(cfg)
    _emit(experiment.validate_design(cfg, d, args.trials), args.output)


def cmd_confidence(args):
    try:
        _confidence(args)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _confidence(args):
    if args.dims < 1 or args.ns < 1:
        raise ValueError("--ns and --dims must be positive")
    if args.epsilon is not None:
        n_s = (args.dims**2 + args.dims) // 2 + 1
        out = {"N_s": args.ns, "n_s": n_s, "epsilon": args.epsilon,
               "confidence": scenario_confidence(args.ns, n_s, args.epsilon)}
    else:
        b = ScenarioBound.at_confidence(args.ns, args.dims, args.target)
        out = {"N_s": b.N_s, "n_s": b.n_s, "epsilon": b.epsilon, "confidence": b.confidence}
    _emit(out, args.output)


def cmd_baseline(args):
    cfg = load_config(args.config)
    xs, us, uls, first = experiment.run_baseline(cfg, args.steps)
    if args.output:
        Path(args.output).mkdir(parents=True, exist_ok=True)
        output.write_baseline_trace(Path(args.output) / "baseline.csv", xs, us, uls)
    _emit({"steps": len(us), "first_violation": first}, None)


def build_parser():
    p = argparse.ArgumentParser(prog="mpsc", description="Predictive safety filter toolkit")
    p.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("design", help="scenario design of the tube ellipsoid")
    s.add_argument("-c", "--config", required=True)
    s.add_argument("-o", "--output", help="design JSON (default: stdout)")
    s.set_defaults(func=cmd_design)

    s = sub.add_parser("simulate", help="filtered closed-loop run with artifacts")
    s.add_argument("-c", "--config", required=True)
    s.add_argument("-d", "--design", help="design JSON (default: design from the config)")
    s.add_argument("-o", "--output", required=True, help="output directory")
    s.add_argument("--no-plots", action="store_true", help="skip SVG plots and X_N sampling")
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("validate", help="out-of-sample check of a design")
    s.add_argument("-c", "--config", required=True)
    s.add_argument("-d", "--design")
    s.add_argument("--trials", type=int, default=10000)
    s.add_argument("-o", "--output")
    s.set_defaults(func=cmd_validate)

    s = sub.add_parser("confidence", help="scenario confidence arithmetic")
    s.add_argument("--ns", type=int, required=True, help="number of scenarios")
    s.add_argument("--dims", type=int, required=True, help="state dimension")
    s.add_argument("--target", type=float, default=0.97, help="confidence to reach")
    s.add_argument("--epsilon", type=float, help="report the confidence for this epsilon instead")
    s.add_argument("-o", "--output")
    s.set_defaults(func=cmd_confidence)

    s = sub.add_parser("baseline", help="unfiltered run with saturated learning input")
    s.add_argument("-c", "--config", required=True)
    s.add_argument("--steps", type=int)
    s.add_argument("-o", "--output", help="directory for baseline.csv")
    s.set_defaults(func=cmd_baseline)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SafetyFault as exc:
        where = getattr(exc, "stage", "filter")
        print(f"safety fault [{where}]: {exc}", file=sys.stderr)
        if exc.dump:
            print(output.dumps(exc.dump), file=sys.stderr)
        return EXIT_SAFETY
    except SolverFailure as exc:
        where = getattr(exc, "stage", "solver")
        print(f"solver failure [{where}]: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())

"""Command-line front end: ``taxislab <command> [options]``.

Exit codes: 0 success, 1 invalid input or configuration, 2 runtime or I/O
failure, 3 acceptance-suite failure.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .config import ConfigError, ExperimentConfig, resolve_config
from .model import ParameterError

EXIT_OK, EXIT_INVALID, EXIT_RUNTIME, EXIT_ACCEPT = 0, 1, 2, 3


def _load(args) -> ExperimentConfig:
    overrides = list(args.override or [])
    if getattr(args, "seed", None) is not None:
        overrides += [f"perturbation.seed={args.seed}", f"inequalities.seed={args.seed}"]
    if args.config is None:
        from .config import parse_config
        return parse_config("", overrides)
    return resolve_config(args.config, overrides)


def _out_dir(args, cfg: ExperimentConfig) -> Path:
    return Path(args.out) if args.out else Path(cfg.outputs.directory)


def cmd_classify(args) -> int:
    from .functionals import cancellation_residuals, weights_for_regime
    from .grid import Grid
    from .inequalities import measured_poincare_constant
    from .model import classify_regime, jacobian_at_steady_state, steady_state

    cfg = _load(args)
    p = cfg.parameters
    grid = Grid(cfg.grid.points, cfg.grid.lengths)
    r = classify_regime(p)
    s = steady_state(p, grid.volume)
    jac = jacobian_at_steady_state(p, s)
    w = weights_for_regime(p, s, r, measured_poincare_constant(grid))
    print(f"regime        {r.tag.value}")
    print(f"discriminant  {r.discriminant!r}")
    print(f"steady state  u*={s.u_star!r} v*={s.v_star!r}")
    print(f"jacobian      fu={jac.fu!r} fv={jac.fv!r} gu={jac.gu!r} gv={jac.gv!r}")
    print(f"sign check    weak={jac.weak_signs} strict={jac.strict_signs}")
    print("weights       " + " ".join(f"{n}={v:.6g}" for n, v in
                                       zip(("A1", "A2", "B1", "B2", "C1", "C2"), w.six)))
    if w.X2 is not None:
        print(f"              X2={w.X2:.6g}")
    print("cancellation  " + " ".join(f"{x:.3e}" for x in cancellation_residuals(w, p, s)))
    return EXIT_OK


def cmd_simulate(args) -> int:
    from .harness import run_simulate

    cfg = _load(args)
    out = _out_dir(args, cfg)
    res = run_simulate(cfg, out)
    print(f"{res.regime}: exit_time={res.exit_time} results in {out}")
    if res.selection is not None:
        sel = res.selection
        print(f"winner {sel.winner} K2={sel.winner_fit().K2:.6g} (expected {sel.predicted})")
    return EXIT_OK


def cmd_sweep(args) -> int:
    from .harness import run_sweep

    cfg = _load(args)
    values = [float(x) for x in args.values.split(",") if x.strip()] if args.values else []
    rows = run_sweep(cfg, args.axis, values, _out_dir(args, cfg), args.workers)
    for r in rows:
        print(f"{r['value']:<12.6g} {r['regime']:<24} {r['winner']:<12} {r['K2']:<12.6g} {r['exit_status']}")
    return EXIT_OK


def cmd_inequalities(args) -> int:
    from .harness import run_inequalities

    cfg = _load(args)
    reports = run_inequalities(cfg, _out_dir(args, cfg))
    for name, rep in reports.items():
        print(f"{name:<14} max={list(map(float, rep.max_ratio))} refined={list(map(float, rep.max_ratio_refined))}")
    return EXIT_OK


def cmd_fit(args) -> int:
    from .analysis import summary_block
    from .harness import run_fit

    sel = run_fit(args.series, args.regime, args.tail)
    print(summary_block(sel))
    return EXIT_OK


def cmd_accept(args) -> int:
    from .acceptance import run_all, write_report

    results = run_all(workers=args.workers, only=args.only)
    for r in results:
        print(r.line())
    if args.out:
        write_report(results, Path(args.out))
    return EXIT_OK if all(r.passed for r in results) else EXIT_ACCEPT


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="taxislab", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, config=True):
        if config:
            p.add_argument("--config", help="config file, or the name of a bundled config")
            p.add_argument("--override", action="append", metavar="KEY=VALUE",
                           help="dotted override, e.g. stepping.dt=0.005 (repeatable)")
            p.add_argument("--seed", type=int, help="seed for perturbation and inequality sampling")
        p.add_argument("--out", help="output directory")
        p.add_argument("--workers", type=int, default=1)
        return p

    common(sub.add_parser("classify", help="regime, steady state, Jacobian and weights"))
    common(sub.add_parser("simulate", help="run one experiment"))
    sw = common(sub.add_parser("sweep", help="run one experiment per value of a parameter"))
    sw.add_argument("--axis", required=True, help="parameter name or section.key")
    sw.add_argument("--values", default="", help="comma-separated values")
    common(sub.add_parser("inequalities", help="estimate discrete inequality constants"))
    fit = common(sub.add_parser("fit", help="fit decay laws to a time-series CSV"), config=False)
    fit.add_argument("series")
    fit.add_argument("--regime", default=None)
    fit.add_argument("--tail", type=float, default=0.8)
    acc = common(sub.add_parser("accept", help="run the acceptance suite"), config=False)
    acc.add_argument("--only", type=lambda s: [int(x) for x in s.split(",")], default=None,
                     help="comma-separated criterion numbers")
    return ap


COMMANDS = {
    "classify": cmd_classify,
    "simulate": cmd_simulate,
    "sweep": cmd_sweep,
    "inequalities": cmd_inequalities,
    "fit": cmd_fit,
    "accept": cmd_accept,
}


def main(argv=None) -> int:
    from .harness import HarnessError, HarnessIOError, ResultMismatchError

    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except (ConfigError, ParameterError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except HarnessIOError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except HarnessError as exc:
        if isinstance(exc.cause, (ConfigError, ParameterError)):
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_INVALID
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except (ResultMismatchError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (RuntimeError, OSError, ArithmeticError) as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())

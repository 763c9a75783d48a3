#!/usr/bin/env python3
"""
ViscoFrac Main Entry Point
==========================

    viscofrac run <scenario|file.toml> [--out DIR] [--steps N] [--no-checks] [--verbose]
    viscofrac converge <scenario|file.toml> --n-list 16,32,64,128 [--out DIR] [--threads K]
    viscofrac oracle0d --a 1 --b 1 --beta 1 --f 0 --u0 1 --u1 0 --w0 0 --T 1 [--out FILE]
    viscofrac list

Exit status: 0 success, 1 an enabled check failed, 2 invalid input or a
solver error.
"""

import argparse
import logging
import os
import sys

from colorama import Fore, Style, init as colorama_init

# Add current directory to Python path
sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

import config
from errors import ConfigurationError, ViscoFracError

logger = logging.getLogger("viscofrac")

EXIT_OK, EXIT_CHECKS_FAILED, EXIT_ERROR = 0, 1, 2


def _ok(message: str) -> None:
    print(f"{Fore.GREEN}{message}{Style.RESET_ALL}")


def _fail(message: str) -> None:
    print(f"{Fore.RED}{message}{Style.RESET_ALL}", file=sys.stderr)


def cmd_run(args) -> int:
    from runner import run_scenario
    from scenarios import ScenarioLoader

    cfg = ScenarioLoader().resolve(args.scenario)
    result = run_scenario(cfg, out_dir=args.out, steps=args.steps, checks=not args.no_checks,
                          progress=args.verbose)
    for name, outcome in result.summary.get("checks", {}).items():
        line = f"  {name:<20} value={outcome['value']:.3e}  tolerance={outcome['tolerance']:.1e}"
        (_ok if outcome["passed"] else _fail)(("PASS" if outcome["passed"] else "FAIL") + line)
    if result.passed:
        _ok(f"Scenario '{cfg.name}' finished: outputs in {result.output_dir}")
        return EXIT_OK
    _fail(f"Scenario '{cfg.name}': failed checks {', '.join(result.failed_checks)}")
    return EXIT_CHECKS_FAILED


def cmd_converge(args) -> int:
    from convergence import convergence_study
    from scenarios import ScenarioLoader

    cfg = ScenarioLoader().resolve(args.scenario)
    try:
        n_list = [int(n) for n in args.n_list.split(",") if n.strip()]
    except ValueError:
        raise ConfigurationError(f"--n-list must be comma-separated integers, got '{args.n_list}'", key="n_list") from None
    report = convergence_study(cfg, n_list, threads=args.threads)
    paths = report.save(args.out or os.path.join(config.OUTPUT_DIR, f"{cfg.name}_convergence"))
    print(report.create_report())
    _ok(f"Convergence table written to {paths['csv']}")
    return EXIT_OK


def cmd_oracle0d(args) -> int:
    from data_functions import compile_expression
    from oracle import zero_dim_oracle

    forcing = compile_expression(args.f, space=False, name="f")
    traj = zero_dim_oracle(args.a, args.b, args.beta, lambda t: float(forcing(t)),
                           args.u0, args.u1, args.w0, args.T)
    frame = traj.to_frame()
    if args.out:
        os.makedirs(os.path.dirname(os.path.abspath(args.out)), exist_ok=True)
        frame.to_csv(args.out, index=False, float_format="%.17g")
        _ok(f"Oracle trajectory ({len(frame)} rows) written to {args.out}")
    else:
        print(frame.iloc[:: max(1, len(frame) // 10)].to_string(index=False))
    return EXIT_OK


def cmd_list(args) -> int:
    from scenarios import ScenarioLoader

    for entry in ScenarioLoader().list_available_scenarios():
        print(f"{Fore.CYAN}{entry['name']:<22}{Style.RESET_ALL}{entry['description']}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="viscofrac",
        description=f"{config.APP_NAME} {config.APP_VERSION}: dynamic Maxwell viscoelasticity with a growing crack",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  viscofrac list
  viscofrac run cracked_plate --steps 128
  viscofrac run my_plate.toml --out runs/plate --verbose
  viscofrac converge smooth_uncracked --n-list 16,32,64,128
  viscofrac oracle0d --a 1 --b 1 --beta 1 --u0 1 --out runs/oracle.csv
        """,
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a scenario and its checks")
    run.add_argument("scenario", help="built-in scenario name or TOML file")
    run.add_argument("--out", help="output directory")
    run.add_argument("--steps", type=int, help="override the number of time steps")
    run.add_argument("--no-checks", action="store_true", help="skip every check")
    run.add_argument("--verbose", action="store_true", help="log step progress")
    run.set_defaults(handler=cmd_run)

    converge = sub.add_parser("converge", help="refinement study over nested step counts")
    converge.add_argument("scenario", help="built-in scenario name or TOML file")
    converge.add_argument("--n-list", required=True, help="comma-separated nested step counts")
    converge.add_argument("--out", help="output directory")
    converge.add_argument("--threads", type=int, help="worker threads (default VISCOFRAC_THREADS)")
    converge.add_argument("--verbose", action="store_true")
    converge.set_defaults(handler=cmd_converge)

    oracle = sub.add_parser("oracle0d", help="RK4 reference of the scalar Maxwell model")
    for name, default in (("a", 1.0), ("b", 1.0), ("beta", 1.0), ("u0", 0.0), ("u1", 0.0), ("w0", 0.0), ("T", 1.0)):
        oracle.add_argument(f"--{name}", type=float, default=default)
    oracle.add_argument("--f", default="0", help="forcing expression in t")
    oracle.add_argument("--out", help="CSV file for the trajectory")
    oracle.add_argument("--verbose", action="store_true")
    oracle.set_defaults(handler=cmd_oracle0d)

    listing = sub.add_parser("list", help="list built-in scenarios")
    listing.add_argument("--verbose", action="store_true")
    listing.set_defaults(handler=cmd_list)
    return parser


def main(argv=None) -> int:
    colorama_init()
    args = build_parser().parse_args(argv)
    config.setup_logging("INFO" if args.verbose and config.LOG_LEVEL.upper() != "DEBUG" else None)

    status = config.validate_config()
    for warning in status["warnings"]:
        logger.warning(warning)
    if not status["valid"]:
        for error in status["errors"]:
            _fail(f"Configuration error: {error}")
        return EXIT_ERROR

    try:
        return args.handler(args)
    except ViscoFracError as e:
        _fail(f"{type(e).__name__}: {e}")
        return EXIT_ERROR
    except KeyboardInterrupt:
        _fail("Interrupted")
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())

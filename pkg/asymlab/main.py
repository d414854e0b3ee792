# cli execution
import argparse
import logging
import os
import sys

import yaml
from rich.logging import RichHandler
from rich.traceback import install

logging.basicConfig(
    level="WARNING",
    format="%(message)s",
    datefmt="[%X]",
    handlers=[RichHandler(rich_tracebacks=True)]
)

# Install Rich traceback globally to handle exceptions beautifully
install()

logger = logging.getLogger("asymlab")


def _operator_args(parser):
    parser.add_argument("--operator", type=str, default="minimalGraph",
                        help="pLaplacian, minimalGraph or custom")
    parser.add_argument("--p", type=float, help="exponent of the p-Laplacian")
    parser.add_argument("--formula", type=str, help="named custom formula")
    parser.add_argument("--scale", type=float, help="scale K of a custom formula")


def _common_args(parser):
    parser.add_argument("--seed", type=int)
    parser.add_argument("--out", type=str)
    parser.add_argument("-v", "--verbose", action="count", default=0)


def _operator_section(args):
    params = {"kind": args.operator}
    if args.p is not None:
        params["p"] = args.p
    if args.formula:
        params["formula"] = args.formula
    if args.scale is not None:
        params["scale"] = args.scale
    return {"op": params}


def _single_block_config(args, block):
    """YAML text of a one-block experiment built from command-line options."""
    return yaml.safe_dump({"output": args.out or "asymlab-out", "operators": _operator_section(args),
                           "runs": [block]}, sort_keys=False)


def _barrier_block(args):
    block = {"kind": "barriers", "operator": "op", "family": args.family, "delta": args.delta,
             "n": args.n, "c": args.c, "check_ode": False}
    for key in ("K", "rho", "n_nodes"):
        if getattr(args, key) is not None:
            block[key] = getattr(args, key)
    return block


def cli():

    parser = argparse.ArgumentParser(
        description="asymlab: barriers, solvers and removability experiments for quasi-linear operators "
                    "on hyperbolic space.")
    subparsers = parser.add_subparsers(dest="command")

    run_parser = subparsers.add_parser("run", help="run every block of an experiment config")
    run_parser.add_argument("file", type=str)
    run_parser.add_argument("--parallel", action="store_true")
    _common_args(run_parser)

    classify_parser = subparsers.add_parser("classify", help="removable or singular type of one operator")
    _operator_args(classify_parser)
    _common_args(classify_parser)

    barriers_parser = subparsers.add_parser("barriers", help="tabulate one barrier profile")
    _operator_args(barriers_parser)
    barriers_parser.add_argument("--family", choices=("scherk", "annulus", "singular"), default="scherk")
    barriers_parser.add_argument("--delta", type=float, default=0.0)
    barriers_parser.add_argument("--n", type=int, default=2)
    barriers_parser.add_argument("--c", type=float, default=1.0)
    barriers_parser.add_argument("--K", type=float)
    barriers_parser.add_argument("--rho", type=float)
    barriers_parser.add_argument("--n_nodes", type=int)
    _common_args(barriers_parser)

    probe_parser = subparsers.add_parser("probe", help="removability probe on growing disks")
    _operator_args(probe_parser)
    probe_parser.add_argument("--mode", choices=("spike", "trace"), default="spike")
    probe_parser.add_argument("--plateau", type=float, default=1.0)
    probe_parser.add_argument("--width-rule", choices=("horoball", "inverse"), default="horoball")
    probe_parser.add_argument("--R", type=float, nargs="+", default=[2.0, 3.0, 4.0])
    probe_parser.add_argument("--n_theta", type=int, default=64)
    _common_args(probe_parser)

    args = parser.parse_args()
    if args.command is None:
        parser.print_help()
        return

    if args.verbose:
        logging.getLogger().setLevel("DEBUG" if args.verbose > 1 else "INFO")
    if args.seed is not None:
        os.environ["ASYMLAB_SEED"] = str(args.seed)

    from asymlab.config import load_config, parse_config
    from asymlab.errors import ConfigValidationError, ParseError
    from asymlab.run import run_experiment

    try:
        if args.command == "run":
            config = load_config(args.file)
        elif args.command == "classify":
            config = parse_config(_single_block_config(args, {"kind": "classify", "operators": ["op"]}))
        elif args.command == "barriers":
            config = parse_config(_single_block_config(args, _barrier_block(args)))
        else:
            block = {"kind": "removability-probe", "operator": "op", "mode": args.mode, "plateau": args.plateau,
                     "width_rule": args.width_rule, "R_sequence": args.R, "grid": {"n_theta": args.n_theta}}
            config = parse_config(_single_block_config(args, block))
    except ConfigValidationError as e:
        for problem in e.problems:
            logger.error(f"🔴 {problem}")
        sys.exit(1)
    except (ParseError, OSError) as e:
        logger.error(f"🔴 {e}")
        sys.exit(1)

    code = run_experiment(config, out_dir=args.out, parallel=getattr(args, "parallel", False),
                          config_path=getattr(args, "file", None))
    sys.exit(code)


if __name__ == "__main__":
    cli()

# Copyright (c) 2024-present, Monitored Fermions contributors
# All rights reserved.
#
# This source code is licensed under the license found in the
# LICENSE file in the root directory of this source tree.
#

from pipeline.config import (
    ANALYZE_TASKS,
    AnalyzeConfig,
    ExperimentConfig,
    TheoryConfig,
    load_config,
)
from pipeline.tasks import analyze, oracle_check, simulate, theory
from common.errors import CapacityError, DomainError, InvalidParameterError
from common.logging import logger
from pydantic import ValidationError
import argparse
import sys


def parse_args():
    """Parse arguments for module.

    Returns:
        tuple: the parser and the argparse.Namespace of passed arguments
    """
    parser = argparse.ArgumentParser(
        description="Quantum-jump simulator for monitored free fermions")
    subparsers = parser.add_subparsers(dest="command")

    simulate_parser = subparsers.add_parser(
        "simulate", help="run a trajectory ensemble and write result files")
    simulate_parser.add_argument("--config",
                                 help="JSON file with an ExperimentConfig")
    simulate_parser.add_argument("--workers",
                                 help="number of parallel workers; "
                                      "overrides the config file",
                                 default=None)
    simulate_parser.add_argument("--seed",
                                 help="ensemble seed; overrides the config",
                                 default=None)
    simulate_parser.add_argument("--resume",
                                 help="continue from the last checkpoint",
                                 default=False,
                                 action="store_true")

    theory_parser = subparsers.add_parser(
        "theory", help="tabulate analytical predictions")
    theory_parser.add_argument("--config",
                               help="JSON file with a TheoryConfig")
    theory_parser.add_argument("--gamma",
                               help="monitoring rate, used without --config",
                               default=None)
    theory_parser.add_argument("--J", help="hopping amplitude", default=1.0)
    theory_parser.add_argument("--n", help="filling", default=0.5)
    theory_parser.add_argument("--beta",
                               help="1/2 with particle-hole symmetry, else 1",
                               default=0.5)
    theory_parser.add_argument("--output-dir",
                               help="directory for the prediction tables",
                               default="theory")

    analyze_parser = subparsers.add_parser(
        "analyze", help="fit, locate and compare result files")
    analyze_parser.add_argument("--config",
                                help="JSON file with an AnalyzeConfig")
    analyze_parser.add_argument("--task", help="analysis task",
                                choices=ANALYZE_TASKS, default=None)
    analyze_parser.add_argument("--inputs", help="result files", nargs="+",
                                default=None)
    analyze_parser.add_argument("--output", help="JSON report path",
                                default="report.json")
    analyze_parser.add_argument("--window",
                                help="lower and upper abscissa bounds",
                                nargs=2, type=float, default=None)
    analyze_parser.add_argument("--central-charge",
                                help="central charge for cft-collapse",
                                type=float, default=None)

    oracle_parser = subparsers.add_parser(
        "oracle-check",
        help="compare the Gaussian engine with the exact Fock-space engine")
    oracle_parser.add_argument("--L", help="lattice size, even and <= 10",
                               default=6)
    oracle_parser.add_argument("--model",
                               help="fermion_counting or "
                                    "occupation_measurement",
                               default="fermion_counting")
    oracle_parser.add_argument("--n-jumps", help="jumps to compare",
                               default=200)
    oracle_parser.add_argument("--seed", help="stream seed", default=0)
    oracle_parser.add_argument("--J", help="hopping amplitude", default=1.0)
    oracle_parser.add_argument("--gamma", help="monitoring rate", default=1.0)
    oracle_parser.add_argument("--output", help="JSON report path",
                               default=None)

    args = parser.parse_args()

    if args.command is None:
        parser.print_help()

    return parser, args


def build_config(args):
    """Turn parsed arguments into the validated config of a subcommand."""
    if args.command == "simulate":
        if args.config is None:
            raise InvalidParameterError("simulate needs --config")
        config = load_config(args.config, ExperimentConfig)
        return config.with_overrides(workers=args.workers, seed=args.seed)
    if args.command == "theory":
        if args.config is not None:
            return load_config(args.config, TheoryConfig)
        if args.gamma is None:
            raise InvalidParameterError("theory needs --config or --gamma")
        return TheoryConfig(params={"gamma": float(args.gamma),
                                    "J": float(args.J), "n": float(args.n),
                                    "beta": float(args.beta)},
                            output_dir=args.output_dir)
    if args.command == "analyze":
        if args.config is not None:
            return load_config(args.config, AnalyzeConfig)
        if args.task is None or args.inputs is None:
            raise InvalidParameterError(
                "analyze needs --config or --task and --inputs")
        return AnalyzeConfig(task=args.task, inputs=args.inputs,
                             output=args.output, window=args.window,
                             central_charge=args.central_charge)
    return None


def run(args):
    config = build_config(args)
    if args.command == "simulate":
        simulate(config, resume=args.resume)
    elif args.command == "theory":
        theory(config)
    elif args.command == "analyze":
        analyze(config)
    elif args.command == "oracle-check":
        summary = oracle_check(int(args.L), args.model, int(args.n_jumps),
                               int(args.seed), J=float(args.J),
                               gamma=float(args.gamma), output=args.output)
        if not summary["passed"]:
            logger.error("Gaussian engine and Fock oracle disagree.")
            return 1
    return 0


if __name__ == "__main__":
    parser, args = parse_args()
    if args.command is None:
        sys.exit(2)

    for arg in vars(args):
        logger.info(f"{arg} - {getattr(args, arg)}")

    logger.info(f"Starting {args.command}...")

    try:
        status = run(args)
    except (InvalidParameterError, DomainError, CapacityError,
            ValidationError) as err:
        logger.error(f"{err}")
        parser.print_help()
        sys.exit(1)

    logger.info(f"Completed {args.command}...")
    logger.info("\n")
    sys.exit(status)

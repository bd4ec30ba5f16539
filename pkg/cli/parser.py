import argparse

from services import EXPERIMENTS


def create_argument_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        description="Hardy-Sobolev experiments on Carnot-Caratheodory spaces",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog=_get_help_epilog()
    )

    _add_global_arguments(parser)
    commands = parser.add_subparsers(dest="command", metavar="command")
    commands.required = True

    run = commands.add_parser("run", help="Run the experiment described by a config file")
    _add_config_arguments(run)
    _add_output_arguments(run)

    validate = commands.add_parser("validate", help="List every problem in a config file")
    _add_config_arguments(validate)

    commands.add_parser("list-systems", help="List the built-in vector field systems")

    return parser


def _get_help_epilog() -> str:
    """Get the help epilog with usage examples."""
    return f"""
Examples:
  Check a config without running it:
    python main.py validate configs/hardy_euclidean_ball.ini

  Run an experiment, overriding the output directory and seed:
    python main.py run configs/hardy_euclidean_ball.ini --out results/hardy --seed 7

  Run with four worker threads for the capacity scans:
    python main.py --threads 4 run configs/chain_euclidean_ball.ini

Experiments: {", ".join(EXPERIMENTS)}
"""


def _add_global_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "--verbose",
        action="store_true",
        help="Log solver progress (DEBUG level)"
    )

    parser.add_argument(
        "--threads",
        type=int,
        default=None,
        help="Worker threads for independent sub-experiments (overrides the config)"
    )


def _add_config_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "config",
        type=str,
        help="Path to the experiment config (INI, one [experiment] section)"
    )


def _add_output_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "--out",
        type=str,
        default=None,
        help="Output directory (overrides the config's 'out')"
    )

    parser.add_argument(
        "--seed",
        type=int,
        default=None,
        help="Random seed (overrides the config's 'seed')"
    )

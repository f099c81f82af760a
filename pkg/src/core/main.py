# External libraries
import argparse
import logging
import sys

from pydantic import ValidationError

# Internal files
from src.commands import data_commands, experiment_commands, hypothesis_commands
from src.core.config import config
from src.core.errors import StabilityError
from src.core.logging_setup import setup_logging

logger = logging.getLogger(__name__)


def build_parser() -> argparse.ArgumentParser:
    """
    Build the command-line parser

    Global flags live on a parent parser shared by every subcommand, so they
    can be given after the subcommand name.
    """
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--seed', type=int, help='Master seed (default: 0, or the config seed)')
    common.add_argument('--out', help='Output file')
    common.add_argument('--format', choices=['csv', 'json'], default='csv', help='Report format (default: csv)')
    common.add_argument('--threads', type=int, default=config['THREADS'], help='Worker threads')
    verbosity = common.add_mutually_exclusive_group()
    verbosity.add_argument('--verbose', '-v', action='store_true', help='Log progress and diagnostics')
    verbosity.add_argument('--quiet', '-q', action='store_true', help='Only print results')

    parser = argparse.ArgumentParser(
        prog="stabcause",
        description="Stability-based tests of causal drivers under hidden confounding")
    subparsers = parser.add_subparsers(dest='command', metavar='command')
    subparsers.required = True

    data_commands.setup_parser(subparsers, common)
    hypothesis_commands.setup_parser(subparsers, common)
    experiment_commands.setup_parser(subparsers, common)
    return parser


# Main software

def main(argv=None) -> int:
    """
    Run one command

    Returns:
        0 on success, 1 on a runtime error, 2 on a usage error
    """
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code) if e.code is not None else 0

    if args.verbose:
        setup_logging("INFO")
    elif args.quiet:
        setup_logging("ERROR")
    else:
        setup_logging()

    if args.threads < 1:
        parser.print_usage(sys.stderr)
        logger.error("--threads must be at least 1")
        return 2
    if args.seed is None and not hasattr(args, 'config'):
        args.seed = 0

    try:
        return args.func(args)
    except (StabilityError, OSError, ValidationError) as e:
        logger.error("%s: %s", args.command, e)
        return 1


if __name__ == "__main__":
    sys.exit(main())

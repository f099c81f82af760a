"""
Hypothesis Commands Module

Command-line tests on a CSV file: the RS stability test and the two ridge
baselines. Each prints its p-value as `p=<value>`.
"""

import argparse
import logging

from src.commands.ingest import ColumnSchema, default_schema, load_csv
from src.core.data import Dataset
from src.harness.experiment import rs_test
from src.inference.baselines import double_residualization_test, freedman_lane_test

logger = logging.getLogger(__name__)


def load_pooled(args) -> Dataset:
    """All rows of the CSV named in args, as one dataset"""
    schema = ColumnSchema.load(args.schema) if args.schema else default_schema(args.data)
    if args.causes:
        schema = schema.with_causes(args.causes.split(","))
    return load_csv(args.data, schema).pooled()


def report_p(p_value: float, alpha: float) -> None:
    print(f"p={p_value:.6g}")
    logger.info("%s at alpha=%g", "reject" if p_value <= alpha else "do not reject", alpha)


class HypothesisCommands:
    """
    Provides command-line commands for single tests
    """

    @staticmethod
    def rs_test(args) -> int:
        """
        Random selection + model averaging + permutation test

        Args:
            args: Command arguments with data, schema, m, k, M, seed and weights

        Returns:
            Exit code
        """
        data = load_pooled(args)
        result, _, _ = rs_test(data, args.m, args.k, args.M, args.seed, weights=args.weights,
                               workers=args.threads)
        logger.info("V0=%.6g over m=%d subsets", result.v_observed, result.m)
        report_p(result.p_value, args.alpha)
        return 0

    @staticmethod
    def fl_test(args) -> int:
        """Freedman-Lane test with a ridge nuisance fit"""
        result = freedman_lane_test(load_pooled(args), args.ridge_lambda, args.M, args.seed, args.threads)
        logger.info("%r", result)
        report_p(result.p_value, args.alpha)
        return 0

    @staticmethod
    def dr_test(args) -> int:
        """Double residualization test"""
        result = double_residualization_test(load_pooled(args), args.ridge_lambda, args.M, args.seed,
                                             args.threads)
        logger.info("%r", result)
        report_p(result.p_value, args.alpha)
        return 0


def add_test_arguments(parser: argparse.ArgumentParser) -> None:
    """Flags shared by every command that runs a test"""
    parser.add_argument('--M', type=int, default=999, help='Number of permutations (default: 999)')
    parser.add_argument('--alpha', type=float, default=0.05, help='Significance level (default: 0.05)')


def add_data_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument('data', help='CSV file with one header row')
    parser.add_argument('--schema', help='Column schema JSON (default: y / x* / w* columns)')
    parser.add_argument('--causes', help='Comma-separated candidate causes to test')


def setup_parser(subparsers, common: argparse.ArgumentParser):
    """
    Set up the command-line parser for test commands

    Args:
        subparsers: Subparsers object from argparse
        common: Parent parser carrying the global flags
    """
    # RS test
    parser_rs = subparsers.add_parser('rs-test', parents=[common], help='Stability test on a CSV')
    add_data_arguments(parser_rs)
    add_test_arguments(parser_rs)
    parser_rs.add_argument('--m', type=int, default=100, help='Number of random subsets (default: 100)')
    parser_rs.add_argument('--k', type=int, default=10, help='Subset size (default: 10)')
    parser_rs.add_argument('--weights', choices=['uniform', 'aic', 'bic'], default='uniform',
                           help='Model-averaging weights for gamma (default: uniform)')
    parser_rs.set_defaults(func=HypothesisCommands.rs_test)

    # Baselines
    for name, handler, text in (('fl-test', HypothesisCommands.fl_test, 'Freedman-Lane test on a CSV'),
                                ('dr-test', HypothesisCommands.dr_test, 'Double residualization test on a CSV')):
        parser_baseline = subparsers.add_parser(name, parents=[common], help=text)
        add_data_arguments(parser_baseline)
        add_test_arguments(parser_baseline)
        parser_baseline.add_argument('--lambda', dest='ridge_lambda', type=float,
                                     help='Ridge penalty (default: chosen by GCV)')
        parser_baseline.set_defaults(func=handler)

"""
Experiment Commands Module

Benchmarks, sweeps and population diagnostics driven from JSON files.
"""

import argparse
import json
import logging

import pandas as pd

from src.core.selection import partition_selection, random_selection
from src.harness.config import load_experiment_config
from src.harness.experiment import (null_v_distribution, run_parameter_sweep, run_q_sweep,
                                   run_type1_power_experiment)
from src.harness.report import emit_report, emit_reports
from src.oracle.population import oracle_summary, sigma_trace_bound
from src.sem.synth import SemParams

logger = logging.getLogger(__name__)


def _config_from_args(args):
    config = load_experiment_config(args.config)
    changes = {"threads": args.threads}
    if args.seed is not None:
        changes["seed"] = args.seed
    if args.alpha is not None:
        changes["alphas"] = [args.alpha]
    return config.updated(**changes)


def _parse_values(raw: str):
    values = []
    for item in raw.split(","):
        item = item.strip()
        try:
            values.append(int(item))
        except ValueError:
            values.append(float(item))
    return values


class ExperimentCommands:
    """
    Provides command-line commands for experiments
    """

    @staticmethod
    def bench(args) -> int:
        """
        Type I error / power study from a config file

        Args:
            args: Command arguments with config, out and format

        Returns:
            Exit code
        """
        config = _config_from_args(args)
        if args.null_v:
            summary = null_v_distribution(config)
            text = json.dumps(summary, indent=2)
            if args.out:
                with open(args.out, "w") as f:
                    f.write(text)
            else:
                print(text)
            return 0

        report = run_type1_power_experiment(config, progress=not args.quiet)
        print(pd.DataFrame(report.summary_rows()).to_string(index=False))
        if args.out:
            emit_report(report, args.out, args.format)
        return 0

    @staticmethod
    def sweep(args) -> int:
        """One experiment per value of the swept field"""
        config = _config_from_args(args)
        values = _parse_values(args.values)
        if args.field == "q":
            reports = run_q_sweep(config, values, progress=not args.quiet)
        else:
            reports = run_parameter_sweep(config, args.field, values, progress=not args.quiet)
        rows = []
        for value, report in zip(values, reports):
            rows.extend(dict(row, **{args.field: value}) for row in report.summary_rows())
        print(pd.DataFrame(rows).to_string(index=False))
        if args.out:
            emit_reports(reports, args.out, args.format, vary=args.field)
        return 0

    @staticmethod
    def oracle(args) -> int:
        """Population diagnostics of a parameter file and a subset family"""
        params = SemParams.load(args.params)
        if args.partition:
            family = partition_selection(params.q, args.k)
        else:
            family = random_selection(params.q, args.k, args.m, args.seed or 0)
        summary = oracle_summary(params, family)
        if args.partition and params.r == 1:
            summary["sigma_trace_bound"] = sigma_trace_bound(params, family)
        for key, value in summary.items():
            print(f"{key}={value:.6g}")
        if args.out:
            with open(args.out, "w") as f:
                json.dump(summary, f, indent=2)
        return 0


def setup_parser(subparsers, common: argparse.ArgumentParser):
    """
    Set up the command-line parser for experiment commands

    Args:
        subparsers: Subparsers object from argparse
        common: Parent parser carrying the global flags
    """
    # Benchmark command
    parser_bench = subparsers.add_parser('bench', parents=[common], help='Type I error / power study')
    parser_bench.add_argument('--config', required=True, help='Experiment config JSON')
    parser_bench.add_argument('--alpha', type=float, help='Override the config alphas with one level')
    parser_bench.add_argument('--null-v', action='store_true',
                              help='Compare the permutation null of V with the population null instead')
    parser_bench.set_defaults(func=ExperimentCommands.bench)

    # Sweep command
    parser_sweep = subparsers.add_parser('sweep', parents=[common], help='Repeat a study over one parameter')
    parser_sweep.add_argument('--config', required=True, help='Experiment config JSON')
    parser_sweep.add_argument('--field', default='q', help='Config field to vary (default: q)')
    parser_sweep.add_argument('--values', required=True, help='Comma-separated values, e.g. 50,100,200,400')
    parser_sweep.add_argument('--alpha', type=float, help='Override the config alphas with one level')
    parser_sweep.set_defaults(func=ExperimentCommands.sweep)

    # Oracle command
    parser_oracle = subparsers.add_parser('oracle', parents=[common], help='Population diagnostics')
    parser_oracle.add_argument('--params', required=True, help='SEM parameters JSON')
    parser_oracle.add_argument('--m', type=int, default=100, help='Number of random subsets (default: 100)')
    parser_oracle.add_argument('--k', type=int, default=10, help='Subset or block size (default: 10)')
    parser_oracle.add_argument('--partition', action='store_true', help='Use disjoint blocks of size k')
    parser_oracle.set_defaults(func=ExperimentCommands.oracle)

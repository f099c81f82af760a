"""
Data Commands Module

Synthetic data generation and the multi-environment real-data workflow.
"""

import argparse
import json
import logging
import os

import numpy as np
import pandas as pd

from src.commands.hypothesis_commands import add_test_arguments, report_p
from src.commands.ingest import ColumnSchema, load_csv, run_real_analysis
from src.regression.ols import ols_inference_table
from src.sem.synth import PRIOR_KINDS, SemParams, generate_sem_params, sample_dataset

logger = logging.getLogger(__name__)


def params_path_for(out: str) -> str:
    root, _ = os.path.splitext(out)
    return f"{root}_params.json"


class DataCommands:
    """
    Provides command-line commands for data generation and real-data analysis
    """

    @staticmethod
    def simulate(args) -> int:
        """
        Write a synthetic dataset CSV with columns y, x0.., w0..

        Args:
            args: Command arguments with SEM dimensions or a params file

        Returns:
            Exit code
        """
        if args.params:
            params = SemParams.load(args.params)
        else:
            params = generate_sem_params(args.d, args.q, args.r, args.rho_beta, args.rho_gamma,
                                         prior_kind=args.prior, seed=args.seed,
                                         gamma_prior_kind=args.gamma_prior)
        data = sample_dataset(params, args.n, args.seed)
        frame = pd.DataFrame(np.column_stack([data.y, data.x, data.w]),
                             columns=["y"] + data.names_x + data.names_w)
        out = args.out or "simulated.csv"
        frame.to_csv(out, index=False)
        params_out = args.params_out or params_path_for(out)
        params.save(params_out)
        logger.info("wrote %d rows to %s and parameters to %s", data.n_samples, out, params_out)
        return 0

    @staticmethod
    def real(args) -> int:
        """
        Environment-wise stability test next to the pooled OLS table

        Args:
            args: Command arguments with data, schema, causes, M and seed

        Returns:
            Exit code
        """
        schema = ColumnSchema.load(args.schema)
        causes = args.causes.split(",") if args.causes else list(schema.causes)
        collection = load_csv(args.data, schema)
        random_subsets = (args.m, args.k) if args.random_subsets else None
        result = run_real_analysis(collection, causes, args.M, args.seed, random_subsets=random_subsets,
                                   workers=args.threads)

        table = ols_inference_table(collection.pooled())
        print(table.loc[causes].to_string())
        report_p(result.p_value, args.alpha)

        if args.out:
            with open(args.out, "w") as f:
                json.dump({
                    "causes": causes,
                    "environments": len(collection),
                    "samples": collection.n_samples,
                    "v_observed": result.v_observed,
                    "p_value": result.p_value,
                    "ols": table.reset_index().to_dict(orient="records"),
                }, f, indent=2)
        return 0


def setup_parser(subparsers, common: argparse.ArgumentParser):
    """
    Set up the command-line parser for data commands

    Args:
        subparsers: Subparsers object from argparse
        common: Parent parser carrying the global flags
    """
    # Simulate command
    parser_sim = subparsers.add_parser('simulate', parents=[common], help='Write a synthetic dataset CSV')
    parser_sim.add_argument('--params', help='SEM parameters JSON (default: draw new parameters)')
    parser_sim.add_argument('--d', type=int, default=1, help='Number of candidate causes (default: 1)')
    parser_sim.add_argument('--q', type=int, default=300, help='Number of background features (default: 300)')
    parser_sim.add_argument('--r', type=int, default=5, help='Number of hidden confounders (default: 5)')
    parser_sim.add_argument('--n', type=int, default=100, help='Number of rows (default: 100)')
    parser_sim.add_argument('--rho-beta', type=float, default=0.0, help='Norm of beta (default: 0)')
    parser_sim.add_argument('--rho-gamma', type=float, default=10.0, help='Norm of gamma (default: 10)')
    parser_sim.add_argument('--prior', choices=PRIOR_KINDS, default='sphere', help='Prior of beta and gamma')
    parser_sim.add_argument('--gamma-prior', choices=PRIOR_KINDS, help='Separate prior of gamma')
    parser_sim.add_argument('--params-out', help='Where to write the parameters (default: <out>_params.json)')
    parser_sim.set_defaults(func=DataCommands.simulate)

    # Real-data command
    parser_real = subparsers.add_parser('real', parents=[common], help='Multi-environment analysis of a CSV')
    parser_real.add_argument('data', help='CSV file with one header row')
    parser_real.add_argument('--schema', required=True, help='Column schema JSON')
    parser_real.add_argument('--causes', help='Comma-separated candidate causes (default: schema causes)')
    add_test_arguments(parser_real)
    parser_real.add_argument('--random-subsets', action='store_true',
                             help='Use random subsets of the pooled background instead of environments')
    parser_real.add_argument('--m', type=int, default=100, help='Number of random subsets (default: 100)')
    parser_real.add_argument('--k', type=int, default=3, help='Subset size (default: 3)')
    parser_real.set_defaults(func=DataCommands.real)

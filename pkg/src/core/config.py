import os
from dotenv import load_dotenv


def _float_list(raw, default):
    if not raw:
        return default
    return [float(v) for v in raw.split(',') if v.strip()]


def load_config():
    """
    Load configuration from environment variables.

    Values come from STABCAUSE_* variables (optionally set in a .env file);
    anything unset falls back to the library default.
    """
    # Load environment variables from .env file
    load_dotenv()

    # Create a dictionary with all configuration parameters
    return {
        # Least squares
        'RANK_TOL': float(os.getenv('STABCAUSE_RANK_TOL', '1e-10')),  # relative to the largest |R_ii|

        # Ridge baselines: GCV search grid for lambda
        'RIDGE_GRID': _float_list(os.getenv('STABCAUSE_RIDGE_GRID'),
                                  [10.0 ** e for e in (-3, -2.5, -2, -1.5, -1, -0.5, 0,
                                                       0.5, 1, 1.5, 2, 2.5, 3)]),

        # Execution
        'THREADS': int(os.getenv('STABCAUSE_THREADS', '1')),
        'PERM_BATCH': int(os.getenv('STABCAUSE_PERM_BATCH', '256')),  # replicates per vectorised batch

        # Real data
        'MIN_ENV_SIZE': int(os.getenv('STABCAUSE_MIN_ENV_SIZE', '70')),
        'COLLEGE_CSV': os.getenv('STABCAUSE_COLLEGE_CSV', os.path.join('data', 'CollegeDistance.csv')),

        # Data generating procedure: which dimension sets Var(A_ij) and Var(B_ij)
        'A_VARIANCE_DIM': os.getenv('STABCAUSE_A_VARIANCE_DIM', 'q'),
        'B_VARIANCE_DIM': os.getenv('STABCAUSE_B_VARIANCE_DIM', 'd'),

        'LOG_LEVEL': os.getenv('STABCAUSE_LOG_LEVEL', 'WARNING'),
    }


config = load_config()

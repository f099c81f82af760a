"""
Errors Module

Exception hierarchy shared by every stage of the pipeline. All library
errors derive from StabilityError so the CLI can map them to exit code 1.
"""

from typing import Optional

import numpy as np


class StabilityError(Exception):
    """Base class for all library errors"""


class InvalidInputError(StabilityError, ValueError):
    """Shapes, ranges or finiteness violated"""


class InvalidSubsetError(InvalidInputError):
    """Subset size or partition request cannot be satisfied"""


class ConfigError(InvalidInputError):
    """Experiment or command-line configuration is inconsistent with the data"""


class UndefinedStatisticError(StabilityError):
    """The stability statistic is 0/0 (every coefficient vector is zero)"""

    def __init__(self, message: str, replicate: Optional[int] = None):
        if replicate is not None:
            message = f"{message} (permutation replicate {replicate})"
        super().__init__(message)
        self.replicate = replicate


class SingularDesignError(StabilityError, np.linalg.LinAlgError):
    """A least-squares design is rank deficient beyond tolerance"""

    def __init__(self, message: str, column: Optional[str] = None):
        if column is not None:
            message = f"{message}: column '{column}' is linearly dependent on earlier columns"
        super().__init__(message)
        self.column = column


class DegenerateFitError(StabilityError):
    """A submodel fit leaves zero residual variance"""


class DegenerateResidualError(StabilityError):
    """Residualized variables carry no variance"""


class UndefinedLimitError(StabilityError):
    """A population limit is 0/0 because no confounding is present"""


class DataLoadError(StabilityError):
    """A data file cannot be turned into datasets"""

    def __init__(self, message: str, path: Optional[str] = None,
                 row: Optional[int] = None, column: Optional[str] = None):
        context = []
        if path is not None:
            context.append(f"file {path}")
        if row is not None:
            context.append(f"row {row}")
        if column is not None:
            context.append(f"column '{column}'")
        if context:
            message = f"{message} ({', '.join(context)})"
        super().__init__(message)
        self.path = path
        self.row = row
        self.column = column

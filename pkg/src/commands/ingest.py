"""
Ingest Module

Loads a numeric CSV into per-environment datasets and runs the real-data
workflow: every environment contributes one coefficient vector, its
background block is one subset of the pooled background columns, and the
permutation test runs on residuals pooled across environments.
"""

import json
import logging
from typing import Iterator, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field, model_validator

from src.core.config import config
from src.core.data import Dataset
from src.core.errors import ConfigError, DataLoadError
from src.harness.experiment import rs_test
from src.inference.permtest import PermutationTestResult, environment_permutation_test
from src.regression.averaging import GammaEstimate, gamma_hat_submodel

logger = logging.getLogger(__name__)


class ColumnSchema(BaseModel):
    """Roles of the CSV columns"""

    model_config = ConfigDict(extra="forbid")

    target: str
    causes: List[str] = Field(..., min_length=1)
    environment: Optional[str] = None
    # None means every column without another role
    background: Optional[List[str]] = None
    drop: List[str] = Field(default_factory=list)
    min_env_size: int = Field(default_factory=lambda: config['MIN_ENV_SIZE'], ge=1)

    @model_validator(mode="after")
    def _roles_disjoint(self) -> 'ColumnSchema':
        roles = [[self.target], self.causes, [self.environment] if self.environment else [],
                 self.background or [], self.drop]
        seen = set()
        for names in roles:
            for name in names:
                if name in seen:
                    raise ValueError(f"column '{name}' is given more than one role")
                seen.add(name)
        return self

    def background_columns(self, header: Sequence[str]) -> List[str]:
        if self.background is not None:
            return list(self.background)
        taken = {self.target, self.environment, *self.causes, *self.drop}
        return [c for c in header if c not in taken]

    def with_causes(self, causes: Sequence[str]) -> 'ColumnSchema':
        """
        Same file, different candidate causes

        Former causes that are not kept become background columns.
        """
        causes = list(causes)
        background = None
        if self.background is not None:
            background = [c for c in self.background if c not in causes]
            background += [c for c in self.causes if c not in causes]
        return ColumnSchema(**dict(self.model_dump(), causes=causes, background=background))

    @classmethod
    def load(cls, path: str) -> 'ColumnSchema':
        with open(path, "r") as f:
            try:
                return cls(**json.load(f))
            except json.JSONDecodeError as e:
                raise ConfigError(f"schema {path} is not valid JSON: {e}")


class EnvironmentCollection:
    """Per-environment datasets sharing the same X and W columns"""

    def __init__(self, environments: Sequence[Tuple[str, Dataset]], schema: Optional[ColumnSchema] = None):
        environments = list(environments)
        if not environments:
            raise DataLoadError("environment collection is empty")
        first = environments[0][1]
        for label, data in environments:
            if data.names_x != first.names_x or data.names_w != first.names_w:
                raise DataLoadError(f"environment '{label}' does not share the column layout of the first one")
        self.environments = environments
        self.schema = schema

    def __len__(self) -> int:
        return len(self.environments)

    def __iter__(self) -> Iterator[Tuple[str, Dataset]]:
        return iter(self.environments)

    @property
    def labels(self) -> List[str]:
        return [label for label, _ in self.environments]

    @property
    def datasets(self) -> List[Dataset]:
        return [data for _, data in self.environments]

    @property
    def d(self) -> int:
        return self.environments[0][1].d

    @property
    def q(self) -> int:
        return self.environments[0][1].q

    @property
    def n_samples(self) -> int:
        return sum(data.n_samples for data in self.datasets)

    def pooled(self) -> Dataset:
        """All environments stacked in collection order"""
        first = self.datasets[0]
        return Dataset(np.concatenate([d.y for d in self.datasets]),
                       np.vstack([d.x for d in self.datasets]),
                       np.vstack([d.w for d in self.datasets]),
                       first.names_x, first.names_w)

    def __repr__(self) -> str:
        return f"EnvironmentCollection(environments={len(self)}, samples={self.n_samples}, d={self.d}, q={self.q})"


def _numeric_frame(frame: pd.DataFrame, columns: List[str], path: str) -> pd.DataFrame:
    out = {}
    for column in columns:
        raw = frame[column]
        values = pd.to_numeric(raw, errors="coerce")
        bad = np.flatnonzero(values.isna().to_numpy())
        if bad.size:
            row = int(bad[0])
            cell = raw.iloc[row]
            reason = "missing value" if pd.isna(cell) or str(cell).strip() == "" else f"non-numeric value '{cell}'"
            # rows are numbered from 1 after the header
            raise DataLoadError(reason, path=path, row=row + 1, column=column)
        out[column] = values.astype(float)
    return pd.DataFrame(out, index=frame.index)


def load_csv(path: str, schema: ColumnSchema) -> EnvironmentCollection:
    """
    Read a CSV and split it into environments

    Args:
        path: UTF-8 comma-separated file with one header row
        schema: Column roles

    Returns:
        EnvironmentCollection of the groups with at least min_env_size rows,
        in order of first appearance; row order within a group follows the file
    """
    try:
        frame = pd.read_csv(path, dtype=str, keep_default_na=False, encoding="utf-8")
    except FileNotFoundError:
        raise DataLoadError("file not found", path=path)
    except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as e:
        raise DataLoadError(f"cannot parse CSV: {e}", path=path)

    header = list(frame.columns)
    background = schema.background_columns(header)
    required = [schema.target] + list(schema.causes) + background
    if schema.environment:
        required.append(schema.environment)
    for column in required:
        if column not in header:
            raise DataLoadError("missing column", path=path, column=column)

    values = _numeric_frame(frame, [schema.target] + list(schema.causes) + background, path)
    if schema.environment:
        labels = frame[schema.environment].to_numpy()
        groups = {label: np.flatnonzero(labels == label) for label in pd.unique(labels)}
    else:
        groups = {"all": np.arange(len(frame))}

    environments = []
    for label, rows in groups.items():
        if rows.size < schema.min_env_size:
            logger.debug("dropping environment %s with %d rows", label, rows.size)
            continue
        part = values.iloc[rows]
        environments.append((str(label), Dataset(part[schema.target].to_numpy(),
                                                 part[list(schema.causes)].to_numpy(),
                                                 part[background].to_numpy() if background else None,
                                                 list(schema.causes), background)))
    if not environments:
        raise DataLoadError(f"no environment has at least {schema.min_env_size} rows", path=path)
    collection = EnvironmentCollection(environments, schema)
    logger.info("loaded %r from %s", collection, path)
    return collection


def _select_causes(collection: EnvironmentCollection, causes: Optional[Sequence[str]]) -> EnvironmentCollection:
    """Keep the named causes in X and move the other candidate causes into W"""
    if causes is None:
        return collection
    causes = list(causes)
    names_x = collection.datasets[0].names_x
    unknown = [c for c in causes if c not in names_x]
    if unknown or not causes:
        raise ConfigError(f"causes {unknown or causes} are not candidate causes of the collection {names_x}")
    keep = [names_x.index(c) for c in causes]
    moved = [i for i in range(len(names_x)) if i not in keep]
    environments = []
    for label, data in collection:
        w = np.hstack([data.w, data.x[:, moved]])
        environments.append((label, Dataset(data.y, data.x[:, keep], w, causes,
                                            list(data.names_w) + [names_x[i] for i in moved])))
    return EnvironmentCollection(environments, collection.schema)


def _environment_subset(data: Dataset) -> List[int]:
    """Background columns that vary within the environment"""
    return [i for i in range(data.q) if np.ptp(data.w[:, i]) > 0]


def run_real_analysis(collection: EnvironmentCollection,
                      causes: Optional[Sequence[str]] = None,
                      n_permutations: int = 999,
                      seed: int = 0,
                      random_subsets: Optional[Tuple[int, int]] = None,
                      workers: int = 1) -> PermutationTestResult:
    """
    Stability test of the candidate causes on multi-environment data

    Environment j fits Y on [1, X, W_{S_j}] over its own rows, where S_j
    are the background columns that vary in that environment. gamma is the
    uniform average of the environment submodel fits, and residuals are
    permuted across all environments.

    Args:
        collection: Loaded environments
        causes: Candidate causes to test jointly (default: all of X)
        n_permutations: M
        seed: Master seed
        random_subsets: (m, k) to run random selection on the pooled data instead
        workers: Threads for the test

    Returns:
        PermutationTestResult whose p_value is the RS p-value
    """
    collection = _select_causes(collection, causes)
    if random_subsets is not None:
        m, k = random_subsets
        result, _, _ = rs_test(collection.pooled(), m, k, n_permutations, seed, workers=workers)
        return result

    if len(collection) == 1:
        logger.warning("only one environment: the stability statistic is 0 and the p-value is 1")
    subsets = [_environment_subset(data) for data in collection.datasets]
    gammas = [gamma_hat_submodel(data.y, data.w, subset).gamma_hat
              for data, subset in zip(collection.datasets, subsets)]
    gamma_hat = GammaEstimate(np.mean(gammas, axis=0), "uniform-average",
                              weights=np.full(len(gammas), 1.0 / len(gammas)))
    result = environment_permutation_test(collection.datasets, subsets, gamma_hat, n_permutations, seed,
                                          workers=workers)
    logger.info("real-data test of %s over %d environments: V0=%.4g p=%.4g",
                collection.datasets[0].names_x, len(collection), result.v_observed, result.p_value)
    return result


def default_schema(path: str) -> ColumnSchema:
    """
    Schema for files written by `simulate`

    Target "y", causes the columns starting with "x", background the columns
    starting with "w"; everything lands in one environment.
    """
    try:
        header = list(pd.read_csv(path, nrows=0).columns)
    except FileNotFoundError:
        raise DataLoadError("file not found", path=path)
    causes = [c for c in header if c.startswith("x")]
    background = [c for c in header if c.startswith("w")]
    if "y" not in header or not causes:
        raise DataLoadError("no schema given and the header has no 'y' and 'x*' columns", path=path)
    return ColumnSchema(target="y", causes=causes, background=background, min_env_size=1)

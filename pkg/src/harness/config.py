"""
Experiment Configuration Module

ExperimentConfig is the JSON document accepted by `bench` and `sweep`.
Unknown keys are rejected, so a typo in a config file fails loudly.
"""

import json
from typing import List, Literal, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from src.core.errors import ConfigError
from src.sem.synth import DEFAULT_STUDENT_DF

RS_METHODS = ("rs", "rs-aic", "rs-bic", "rs-oracle")
BASELINE_METHODS = ("fl", "dr")
UNAVAILABLE_METHODS = ("js", "bm")
ALL_METHODS = RS_METHODS + BASELINE_METHODS + UNAVAILABLE_METHODS

# share of leading W columns hidden by each preset
HIDDEN_PRESETS = {"setting1": 0.0, "setting2": 0.7}

PriorName = Literal["sphere", "gaussian", "student"]


class ExperimentConfig(BaseModel):
    """Knobs of one type I error / power study"""

    model_config = ConfigDict(extra="forbid")

    # SEM dimensions and radii
    d: int = Field(1, ge=1)
    q: int = Field(..., ge=1)
    r: int = Field(5, ge=1)
    n_samples: int = Field(..., ge=2)
    rho_beta: float = Field(1.5, ge=0)
    rho_gamma: float = Field(10.0, ge=0)
    beta_prior: PriorName = "sphere"
    gamma_prior: PriorName = "sphere"
    student_df: float = Field(DEFAULT_STUDENT_DF, gt=2)

    # random selection
    m: int = Field(..., ge=1)
    k: int = Field(..., ge=1)

    # test
    n_permutations: int = Field(..., ge=1)
    alphas: List[float] = Field(default_factory=lambda: [0.05])
    reps: int = Field(..., ge=1)
    methods: List[str] = Field(default_factory=lambda: ["rs"])
    ridge_penalty: Optional[float] = Field(None, ge=0)

    # which W columns are invisible to every method
    hidden: Optional[List[int]] = None
    hidden_preset: Optional[Literal["setting1", "setting2"]] = None
    hidden_fraction: Optional[float] = Field(None, ge=0, lt=1)

    seed: int = Field(0, ge=0)
    threads: int = Field(1, ge=1)
    oracle_diagnostics: bool = True

    @field_validator("alphas")
    @classmethod
    def _alphas_in_unit_interval(cls, value: List[float]) -> List[float]:
        if not value:
            raise ValueError("at least one alpha is required")
        for alpha in value:
            if not 0 < alpha < 1:
                raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
        return value

    @field_validator("methods")
    @classmethod
    def _known_methods(cls, value: List[str]) -> List[str]:
        if not value:
            raise ValueError("at least one method is required")
        for method in value:
            if method not in ALL_METHODS:
                raise ValueError(f"unknown method '{method}', expected one of {ALL_METHODS}")
        if len(set(value)) != len(value):
            raise ValueError("methods must not repeat")
        return value

    @model_validator(mode="after")
    def _hidden_mask_consistent(self) -> 'ExperimentConfig':
        given = [self.hidden is not None, self.hidden_preset is not None, self.hidden_fraction is not None]
        if sum(given) > 1:
            raise ValueError("set at most one of hidden, hidden_preset, hidden_fraction")
        if self.hidden is not None:
            if len(set(self.hidden)) != len(self.hidden):
                raise ValueError("hidden indices must not repeat")
            for i in self.hidden:
                if not 0 <= i < self.q:
                    raise ValueError(f"hidden index {i} outside range({self.q})")
        return self

    def hidden_mask(self) -> Tuple[int, ...]:
        """Sorted indices of the W columns withheld from all methods"""
        if self.hidden is not None:
            return tuple(sorted(self.hidden))
        fraction = self.hidden_fraction
        if self.hidden_preset is not None:
            fraction = HIDDEN_PRESETS[self.hidden_preset]
        if not fraction:
            return ()
        return tuple(range(int(round(fraction * self.q))))

    def visible_columns(self) -> Tuple[int, ...]:
        hidden = set(self.hidden_mask())
        return tuple(i for i in range(self.q) if i not in hidden)

    def setting_label(self) -> str:
        if self.hidden_preset is not None:
            return self.hidden_preset
        n_hidden = len(self.hidden_mask())
        return "setting1" if n_hidden == 0 else f"hidden{n_hidden}"

    def updated(self, **changes) -> 'ExperimentConfig':
        """Validated copy with some fields changed"""
        data = self.model_dump()
        data.update(changes)
        return ExperimentConfig(**data)


def load_experiment_config(path: str) -> ExperimentConfig:
    """Read an ExperimentConfig from a JSON file"""
    with open(path, "r") as f:
        try:
            data = json.load(f)
        except json.JSONDecodeError as e:
            raise ConfigError(f"config {path} is not valid JSON: {e}")
    return ExperimentConfig(**data)

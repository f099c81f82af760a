"""
SEM Synthesis Module

Generative side of the linear structural equation model

    Z ~ N(0, diag(sigma_z^2))
    W = A Z + N_w,   X = B Z + N_x,   Y = beta' X + gamma' W + N_y

together with the priors used to draw beta and gamma: uniform on a sphere,
isotropic Gaussian, and a heavy-tailed Student-t direction with fixed norm.
"""

import json
import logging
from typing import Dict, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, ValidationError, field_serializer, field_validator, model_validator

from src.core.config import config
from src.core.data import Dataset
from src.core.errors import ConfigError, InvalidInputError
from src.core.rng import substream

logger = logging.getLogger(__name__)

PRIOR_KINDS = ("sphere", "gaussian", "student")
DEFAULT_STUDENT_DF = 2.2


class SemParams(BaseModel):
    """
    Full generative description of the linear SEM

    a is q x r (loadings of Z on W), b is d x r (loadings of Z on X), beta has
    length d and gamma length q. Noise standard deviations default to 1.
    """
    model_config = ConfigDict(arbitrary_types_allowed=True, extra="forbid")

    a: np.ndarray
    b: np.ndarray
    beta: np.ndarray
    gamma: np.ndarray
    sigma_z: Optional[np.ndarray] = None
    sigma_w: Optional[np.ndarray] = None
    sigma_x: Optional[np.ndarray] = None
    sigma_y: float = 1.0

    def __init__(self,
                 a: np.ndarray,
                 b: np.ndarray,
                 beta: np.ndarray,
                 gamma: np.ndarray,
                 sigma_z: Optional[np.ndarray] = None,
                 sigma_w: Optional[np.ndarray] = None,
                 sigma_x: Optional[np.ndarray] = None,
                 sigma_y: float = 1.0):
        try:
            super().__init__(a=a, b=b, beta=beta, gamma=gamma, sigma_z=sigma_z,
                             sigma_w=sigma_w, sigma_x=sigma_x, sigma_y=sigma_y)
        except ValidationError as e:
            raise InvalidInputError(f"invalid SEM parameters: {e}")

    @field_validator("a", "b", mode="before")
    @classmethod
    def _as_matrix(cls, value):
        return np.atleast_2d(np.asarray(value, dtype=float))

    @field_validator("beta", "gamma", mode="before")
    @classmethod
    def _as_vector(cls, value):
        return np.atleast_1d(np.asarray(value, dtype=float))

    @field_validator("sigma_z", "sigma_w", "sigma_x", mode="before")
    @classmethod
    def _as_optional_vector(cls, value):
        return None if value is None else np.atleast_1d(np.asarray(value, dtype=float))

    @model_validator(mode="after")
    def _check_shapes(self) -> 'SemParams':
        q, r = self.a.shape
        d = self.b.shape[0]
        if self.b.ndim != 2 or self.b.shape[1] != r:
            raise ValueError(f"A is {self.a.shape} but B is {self.b.shape}: both need r={r} columns")
        if self.beta.shape != (d,):
            raise ValueError(f"beta must have length d={d}, got {self.beta.shape}")
        if self.gamma.shape != (q,):
            raise ValueError(f"gamma must have length q={q}, got {self.gamma.shape}")
        for label, size in (("sigma_z", r), ("sigma_w", q), ("sigma_x", d)):
            value = getattr(self, label)
            if value is None:
                value = np.ones(size)
            elif value.shape not in ((1,), (size,)):
                raise ValueError(f"{label} must have length {size}, got {value.shape}")
            else:
                value = np.broadcast_to(value, (size,)).copy()
            if np.any(~np.isfinite(value)) or np.any(value <= 0):
                raise ValueError(f"{label} must be strictly positive")
            setattr(self, label, value)
        if not np.isfinite(self.sigma_y) or self.sigma_y <= 0:
            raise ValueError("sigma_y must be strictly positive")
        return self

    @field_serializer("a", "b", "beta", "gamma", "sigma_z", "sigma_w", "sigma_x", when_used="json")
    def _to_list(self, value: Optional[np.ndarray]):
        return None if value is None else value.tolist()

    @property
    def d(self) -> int:
        return self.b.shape[0]

    @property
    def q(self) -> int:
        return self.a.shape[0]

    @property
    def r(self) -> int:
        return self.a.shape[1]

    @property
    def rho_beta(self) -> float:
        return float(np.linalg.norm(self.beta))

    @property
    def rho_gamma(self) -> float:
        return float(np.linalg.norm(self.gamma))

    def replace(self, **changes) -> 'SemParams':
        """Copy with some fields swapped, e.g. params.replace(beta=np.zeros(d))"""
        fields = {name: getattr(self, name) for name in type(self).model_fields}
        fields.update(changes)
        return SemParams(**fields)

    def to_dict(self) -> Dict:
        return self.model_dump(mode="json")

    def save(self, path: str) -> None:
        with open(path, "w") as f:
            f.write(self.model_dump_json(indent=2))

    @classmethod
    def load(cls, path: str) -> 'SemParams':
        with open(path, "r") as f:
            try:
                data = json.load(f)
            except json.JSONDecodeError as e:
                raise ConfigError(f"parameter file {path} is not valid JSON: {e}")
        try:
            return cls.model_validate(data)
        except ValidationError as e:
            raise ConfigError(f"parameter file {path} is invalid: {e}")

    def __repr__(self) -> str:
        return (f"SemParams(d={self.d}, q={self.q}, r={self.r}, "
                f"rho_beta={self.rho_beta:.4g}, rho_gamma={self.rho_gamma:.4g})")


def _check_dim(dim: int, label: str = "dim") -> None:
    if int(dim) < 1:
        raise InvalidInputError(f"{label} must be >= 1, got {dim}")


def _check_radius(radius: float) -> None:
    if radius < 0 or not np.isfinite(radius):
        raise InvalidInputError(f"radius must be finite and non-negative, got {radius}")


def sample_sphere(dim: int, radius: float, seed: int, index: int = 0) -> np.ndarray:
    """
    Uniform draw from the sphere of the given radius

    A standard Gaussian vector is normalised and rescaled, so the norm is
    exact up to rounding.
    """
    _check_dim(dim)
    _check_radius(radius)
    if radius == 0:
        return np.zeros(int(dim))
    rng = substream(seed, "sphere", index)
    g = rng.standard_normal(int(dim))
    norm = np.linalg.norm(g)
    while norm == 0.0:
        g = rng.standard_normal(int(dim))
        norm = np.linalg.norm(g)
    return radius * g / norm


def sample_gaussian_prior(dim: int, radius: float, seed: int, index: int = 0) -> np.ndarray:
    """I.i.d. N(0, radius^2 / dim) entries, so E||v||^2 = radius^2"""
    _check_dim(dim)
    _check_radius(radius)
    if radius == 0:
        return np.zeros(int(dim))
    rng = substream(seed, "prior", index)
    return rng.standard_normal(int(dim)) * (radius / np.sqrt(dim))


def sample_student_prior(dim: int, radius: float, seed: int, df: float = DEFAULT_STUDENT_DF,
                         index: int = 0) -> np.ndarray:
    """
    Heavy-tailed direction with fixed norm

    Entries are i.i.d. Student-t(df), built as a Gaussian over a scaled chi
    draw; the vector is then rescaled to the requested radius.
    """
    _check_dim(dim)
    _check_radius(radius)
    if df <= 2:
        raise InvalidInputError(f"Student-t prior needs df > 2, got {df}")
    if radius == 0:
        return np.zeros(int(dim))
    rng = substream(seed, "prior", index)
    t = rng.standard_normal(int(dim)) / np.sqrt(rng.chisquare(df, size=int(dim)) / df)
    return radius * t / np.linalg.norm(t)


def sample_prior(kind: str, dim: int, radius: float, seed: int, df: float = DEFAULT_STUDENT_DF,
                 index: int = 0) -> np.ndarray:
    """Dispatch on the prior kind name"""
    if kind == "sphere":
        return sample_sphere(dim, radius, seed, index)
    if kind == "gaussian":
        return sample_gaussian_prior(dim, radius, seed, index)
    if kind == "student":
        return sample_student_prior(dim, radius, seed, df=df, index=index)
    raise InvalidInputError(f"unknown prior kind '{kind}', expected one of {PRIOR_KINDS}")


def _entry_variance(which: str, d: int, q: int) -> float:
    if which == "d":
        return 1.0 / d
    if which == "q":
        return 1.0 / q
    return float(which)


def generate_sem_params(d: int,
                        q: int,
                        r: int,
                        rho_beta: float,
                        rho_gamma: float,
                        prior_kind: str = "sphere",
                        seed: int = 0,
                        gamma_prior_kind: Optional[str] = None,
                        df: float = DEFAULT_STUDENT_DF,
                        a_variance: Optional[float] = None,
                        b_variance: Optional[float] = None) -> SemParams:
    """
    Draw SEM parameters by the data generating procedure

    A (q x r) has i.i.d. N(0, 1/q) entries and B (d x r) has i.i.d. N(0, 1/d)
    entries unless overridden (config A_VARIANCE_DIM / B_VARIANCE_DIM or
    explicit variances), so ||a||^2 stays bounded as q grows. beta and gamma
    are drawn from the named prior with radii rho_beta and rho_gamma. All
    noise scales are 1.

    Args:
        d, q, r: Dimensions of X, W and Z
        rho_beta, rho_gamma: Radii of the priors
        prior_kind: Prior for beta (and for gamma unless gamma_prior_kind is set)
        seed: Master seed
        gamma_prior_kind: Separate prior for gamma
        df: Degrees of freedom of the Student-t prior
        a_variance, b_variance: Explicit entry variances of A and B

    Returns:
        SemParams
    """
    _check_dim(d, "d")
    _check_dim(q, "q")
    _check_dim(r, "r")
    if a_variance is None:
        a_variance = _entry_variance(config['A_VARIANCE_DIM'], d, q)
    if b_variance is None:
        b_variance = _entry_variance(config['B_VARIANCE_DIM'], d, q)

    rng = substream(seed, "params", 0)
    a = rng.standard_normal((q, r)) * np.sqrt(a_variance)
    b = rng.standard_normal((d, r)) * np.sqrt(b_variance)
    beta = sample_prior(prior_kind, d, rho_beta, seed, df=df, index=1)
    gamma = sample_prior(gamma_prior_kind or prior_kind, q, rho_gamma, seed, df=df, index=2)
    params = SemParams(a, b, beta, gamma)
    logger.debug("generated %r", params)
    return params


def sample_dataset(params: SemParams, n_samples: int, seed: int, index: int = 0) -> Dataset:
    """
    Draw n_samples i.i.d. rows from the SEM

    All noise comes from substream (seed, "data", index), drawn in the fixed
    order Z, N_w, N_x, N_y, so the result is bit-reproducible.

    Args:
        params: SEM parameters
        n_samples: Number of rows l >= 1
        seed: Master seed
        index: Stream index (e.g. the repetition number)

    Returns:
        Dataset with all q background columns
    """
    if n_samples < 1:
        raise InvalidInputError(f"need at least one sample, got {n_samples}")
    rng = substream(seed, "data", index)
    z = rng.standard_normal((n_samples, params.r)) * params.sigma_z
    n_w = rng.standard_normal((n_samples, params.q)) * params.sigma_w
    n_x = rng.standard_normal((n_samples, params.d)) * params.sigma_x
    n_y = rng.standard_normal(n_samples) * params.sigma_y
    w = z @ params.a.T + n_w
    x = z @ params.b.T + n_x
    y = x @ params.beta + w @ params.gamma + n_y
    return Dataset(y, x, w)

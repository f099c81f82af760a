"""
Data Types Module

Immutable containers for the objects passed between stages: the observed
dataset (Y, X, W), the family of background subsets, and the per-subset
coefficient vectors the stability statistic is computed from.

Indices are 0-based throughout: a subset of background features is a
strictly increasing tuple of column indices in range(q).
"""

from typing import Dict, Iterable, List, Optional, Sequence

import numpy as np
import pandas as pd

from src.core.errors import InvalidInputError, InvalidSubsetError


def _frozen(array: np.ndarray) -> np.ndarray:
    array = np.array(array, dtype=float, copy=True)
    array.setflags(write=False)
    return array


class Dataset:
    """Target vector y, candidate causes x and background features w"""

    def __init__(self,
                 y: Sequence[float],
                 x: np.ndarray,
                 w: Optional[np.ndarray] = None,
                 names_x: Optional[Sequence[str]] = None,
                 names_w: Optional[Sequence[str]] = None):
        """
        Initialize a dataset

        Args:
            y: Target values, length l
            x: Candidate causes, l x d (a vector is read as d = 1)
            w: Background features, l x q (None or empty means q = 0)
            names_x: Optional column labels of x
            names_w: Optional column labels of w
        """
        y = np.asarray(y, dtype=float)
        if y.ndim != 1:
            raise InvalidInputError(f"y must be a vector, got shape {y.shape}")
        n = y.shape[0]
        if n < 1:
            raise InvalidInputError("dataset needs at least one row")

        x = np.asarray(x, dtype=float)
        if x.ndim == 1:
            x = x[:, None]
        if w is None:
            w = np.empty((n, 0))
        w = np.asarray(w, dtype=float)
        if w.ndim == 1:
            w = w[:, None]
        if w.size == 0:
            w = np.empty((n, 0))

        if x.ndim != 2 or x.shape[0] != n or x.shape[1] < 1:
            raise InvalidInputError(f"x must be {n} x d with d >= 1, got shape {x.shape}")
        if w.ndim != 2 or w.shape[0] != n:
            raise InvalidInputError(f"w must have {n} rows, got shape {w.shape}")
        for label, array in (("y", y), ("x", x), ("w", w)):
            if not np.all(np.isfinite(array)):
                raise InvalidInputError(f"{label} contains non-finite entries")

        names_x = list(names_x) if names_x is not None else [f"x{i}" for i in range(x.shape[1])]
        names_w = list(names_w) if names_w is not None else [f"w{i}" for i in range(w.shape[1])]
        if len(names_x) != x.shape[1]:
            raise InvalidInputError(f"names_x has {len(names_x)} labels for {x.shape[1]} columns")
        if len(names_w) != w.shape[1]:
            raise InvalidInputError(f"names_w has {len(names_w)} labels for {w.shape[1]} columns")

        self.y = _frozen(y)
        self.x = _frozen(x)
        self.w = _frozen(w)
        self.names_x = names_x
        self.names_w = names_w

    @property
    def n_samples(self) -> int:
        return self.y.shape[0]

    @property
    def d(self) -> int:
        return self.x.shape[1]

    @property
    def q(self) -> int:
        return self.w.shape[1]

    def with_y(self, y: Sequence[float]) -> 'Dataset':
        """Same design, new target"""
        return Dataset(y, self.x, self.w, self.names_x, self.names_w)

    def select_background(self, columns: Sequence[int]) -> 'Dataset':
        """Keep only the given background columns (in the given order)"""
        columns = list(columns)
        return Dataset(self.y, self.x, self.w[:, columns], self.names_x,
                       [self.names_w[c] for c in columns])

    def select_causes(self, columns: Sequence[int]) -> 'Dataset':
        """Keep only the given candidate-cause columns"""
        columns = list(columns)
        if not columns:
            raise InvalidInputError("at least one candidate cause is required")
        return Dataset(self.y, self.x[:, columns], self.w,
                       [self.names_x[c] for c in columns], self.names_w)

    def to_frame(self, target_name: str = "y"):
        """Flatten into a pandas DataFrame (target, causes, background)"""
        frame = pd.DataFrame({target_name: self.y})
        for i, name in enumerate(self.names_x):
            frame[name] = self.x[:, i]
        for i, name in enumerate(self.names_w):
            frame[name] = self.w[:, i]
        return frame

    def __repr__(self) -> str:
        return f"Dataset(n_samples={self.n_samples}, d={self.d}, q={self.q})"


class SubsetFamily:
    """Ordered family of background index sets S_1..S_m of range(q)"""

    def __init__(self, q: int, subsets: Iterable[Iterable[int]], allow_full: bool = False):
        """
        Initialize a subset family

        Args:
            q: Ambient number of background features
            subsets: Index sets; each is stored sorted ascending
            allow_full: Accept S_j = range(q); only environment-derived
                families use this, random and partition families never do
        """
        q = int(q)
        if q < 1:
            raise InvalidSubsetError(f"subset family needs q >= 1, got {q}")
        stored = []
        for j, subset in enumerate(subsets):
            indices = tuple(sorted(int(i) for i in subset))
            if not indices:
                raise InvalidSubsetError(f"subset {j} is empty")
            if len(set(indices)) != len(indices):
                raise InvalidSubsetError(f"subset {j} repeats an index: {indices}")
            if indices[0] < 0 or indices[-1] >= q:
                raise InvalidSubsetError(f"subset {j} has indices outside range({q}): {indices}")
            if len(indices) >= q and not allow_full:
                raise InvalidSubsetError(f"subset {j} is not a proper subset of range({q})")
            stored.append(indices)
        if not stored:
            raise InvalidSubsetError("subset family must contain at least one subset")
        self.q = q
        self.subsets: List[tuple] = stored

    @property
    def m(self) -> int:
        return len(self.subsets)

    def __len__(self) -> int:
        return len(self.subsets)

    def __iter__(self):
        return iter(self.subsets)

    def __getitem__(self, j: int) -> tuple:
        return self.subsets[j]

    def __eq__(self, other) -> bool:
        return (isinstance(other, SubsetFamily) and self.q == other.q
                and self.subsets == other.subsets)

    def union(self) -> tuple:
        """Indices covered by at least one subset"""
        return tuple(sorted(set().union(*self.subsets)))

    def complement(self, j: int) -> tuple:
        members = set(self.subsets[j])
        return tuple(i for i in range(self.q) if i not in members)

    def remap(self, columns: Sequence[int], q: int) -> 'SubsetFamily':
        """Translate indices through a column map into a larger ambient space"""
        columns = list(columns)
        return SubsetFamily(q, [[columns[i] for i in s] for s in self.subsets],
                            allow_full=True)

    def to_dict(self) -> Dict:
        return {"q": self.q, "subsets": [list(s) for s in self.subsets]}

    @classmethod
    def from_dict(cls, data: Dict) -> 'SubsetFamily':
        return cls(data["q"], data["subsets"], allow_full=data.get("allow_full", False))

    def __repr__(self) -> str:
        return f"SubsetFamily(q={self.q}, m={self.m})"


class CoefficientSet:
    """Per-subset coefficient vectors beta_hat(S_1)..beta_hat(S_m), stacked m x d"""

    def __init__(self, vectors):
        vectors = np.asarray(vectors, dtype=float)
        if vectors.ndim == 1:
            vectors = vectors[:, None]
        if vectors.ndim != 2 or vectors.shape[0] < 1 or vectors.shape[1] < 1:
            raise InvalidInputError(f"coefficient set must be m x d with m, d >= 1, got {vectors.shape}")
        if not np.all(np.isfinite(vectors)):
            raise InvalidInputError("coefficient set contains non-finite entries")
        self.vectors = _frozen(vectors)

    @property
    def m(self) -> int:
        return self.vectors.shape[0]

    @property
    def d(self) -> int:
        return self.vectors.shape[1]

    def mean(self) -> np.ndarray:
        return self.vectors.mean(axis=0)

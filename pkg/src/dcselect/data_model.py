"""Covariates of mixed nature, datasets, and their metrics.

A covariate holds N observations of one of four kinds:

* ``scalar``      -- one real number per observation,
* ``vector``      -- a real vector of fixed dimension d,
* ``categorical`` -- a level index into a fixed list of levels,
* ``functional``  -- a curve sampled on a fixed, strictly increasing grid.

Each kind carries its own metric (Euclidean, Euclidean, one-hot Euclidean,
and L2-via-trapezoid respectively).  All kinds embed isometrically into a
Euclidean feature matrix (see :meth:`Covariate.feature_matrix`), which is
what the distance-correlation engine consumes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
from scipy.spatial.distance import cdist

__all__ = [
    "StructuralError",
    "Covariate",
    "Dataset",
    "Metrics",
    "scalar_covariate",
    "vector_covariate",
    "categorical_covariate",
    "functional_covariate",
    "trapezoid_weights",
    "pairwise_distance",
    "distance_matrix",
    "distance_tile",
    "rmspe",
]

KINDS = ("scalar", "vector", "categorical", "functional")


class StructuralError(ValueError):
    """Raised when data violates a structural constraint (shapes, grids,
    missing values, unknown levels)."""


def trapezoid_weights(grid: np.ndarray) -> np.ndarray:
    """Quadrature weights for the trapezoid rule on ``grid``.

    ``sum(w * f)`` approximates the integral of f over [grid[0], grid[-1]].
    The grid may be non-uniform but must be strictly increasing.
    """
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid.size < 2:
        raise StructuralError("functional grid needs at least 2 points")
    h = np.diff(grid)
    if np.any(h <= 0):
        raise StructuralError("functional grid must be strictly increasing")
    w = np.zeros(grid.size)
    w[:-1] += h / 2.0
    w[1:] += h / 2.0
    return w


@dataclass(frozen=True)
class Covariate:
    """A named variable with N observations of a single kind.

    ``values`` layout per kind:

    * scalar: shape (N,) float
    * vector: shape (N, d) float
    * categorical: shape (N,) integer level indices into ``levels``
    * functional: shape (N, G) float, curves sampled on ``grid``

    Instances are immutable after construction; the underlying arrays are
    marked read-only so they can be shared across threads.
    """

    name: str
    kind: str
    values: np.ndarray
    grid: np.ndarray | None = None
    levels: tuple[str, ...] | None = None

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise StructuralError(f"unknown covariate kind {self.kind!r}")
        values = np.asarray(self.values)
        if self.kind == "categorical":
            values = np.asarray(values, dtype=np.int64)
            if self.levels is None or len(self.levels) < 2:
                raise StructuralError(
                    f"categorical covariate {self.name!r} needs >= 2 levels"
                )
            if values.ndim != 1:
                raise StructuralError("categorical values must be 1-D level indices")
            if values.size and (values.min() < 0 or values.max() >= len(self.levels)):
                raise StructuralError(
                    f"level index out of range for covariate {self.name!r}"
                )
        else:
            values = np.asarray(values, dtype=float)
            if not np.all(np.isfinite(values)):
                raise StructuralError(
                    f"covariate {self.name!r} contains missing or non-finite values"
                )
            if self.kind == "scalar" and values.ndim != 1:
                raise StructuralError("scalar values must be 1-D")
            if self.kind == "vector":
                if values.ndim != 2 or values.shape[1] < 1:
                    raise StructuralError("vector values must be 2-D (N, d)")
            if self.kind == "functional":
                grid = np.asarray(self.grid, dtype=float) if self.grid is not None else None
                if grid is None:
                    raise StructuralError("functional covariate needs a grid")
                trapezoid_weights(grid)  # validates monotonicity / size
                if values.ndim != 2 or values.shape[1] != grid.size:
                    raise StructuralError(
                        f"curves of covariate {self.name!r} do not match its grid"
                    )
                object.__setattr__(self, "grid", grid)
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        if self.grid is not None and self.kind != "functional":
            raise StructuralError("only functional covariates carry a grid")

    @property
    def n(self) -> int:
        return self.values.shape[0]

    def feature_matrix(self) -> np.ndarray:
        """Embed observations into a Euclidean feature matrix (N, q).

        The plain Euclidean distance between rows equals the covariate's
        metric: identity for scalar/vector, sqrt-weighted sampling for the
        functional L2 metric, and one-hot coordinates for categorical (so
        distinct levels sit at distance sqrt(2)).
        """
        if self.kind == "scalar":
            return self.values[:, None]
        if self.kind == "vector":
            return self.values
        if self.kind == "functional":
            w = trapezoid_weights(self.grid)
            return self.values * np.sqrt(w)[None, :]
        one_hot = np.zeros((self.n, len(self.levels)))
        one_hot[np.arange(self.n), self.values] = 1.0
        return one_hot

    def subset(self, idx: np.ndarray) -> "Covariate":
        return Covariate(self.name, self.kind, self.values[idx], self.grid, self.levels)

    def is_constant(self) -> bool:
        if self.n == 0:
            return True
        first = self.values[0]
        return bool(np.all(self.values == first))


def scalar_covariate(name: str, values) -> Covariate:
    return Covariate(name, "scalar", np.asarray(values, dtype=float))


def vector_covariate(name: str, values) -> Covariate:
    return Covariate(name, "vector", np.asarray(values, dtype=float))


def categorical_covariate(name: str, labels: Sequence, levels: Sequence[str] | None = None) -> Covariate:
    """Build a categorical covariate from raw labels.

    ``levels`` fixes the level ordering; by default the sorted unique labels
    are used.  Unknown labels raise a :class:`StructuralError`.
    """
    labels = [str(x) for x in labels]
    if levels is None:
        levels = sorted(set(labels))
    levels = tuple(str(x) for x in levels)
    index = {lev: i for i, lev in enumerate(levels)}
    try:
        codes = np.array([index[x] for x in labels], dtype=np.int64)
    except KeyError as exc:
        raise StructuralError(f"unknown level {exc.args[0]!r} for covariate {name!r}") from exc
    return Covariate(name, "categorical", codes, levels=levels)


def functional_covariate(name: str, grid, curves) -> Covariate:
    return Covariate(
        name, "functional", np.asarray(curves, dtype=float), grid=np.asarray(grid, dtype=float)
    )


def pairwise_distance(c: Covariate, i: int, j: int) -> float:
    """Distance between observations ``i`` and ``j`` under the covariate's metric.

    Symmetric and zero on the diagonal.  Scalar/vector use the Euclidean
    distance, functional the trapezoid-quadrature L2 distance, categorical
    0 for equal levels and sqrt(2) otherwise.
    """
    if not (0 <= i < c.n and 0 <= j < c.n):
        raise IndexError(f"observation index out of range for covariate {c.name!r}")
    if c.kind == "scalar":
        return abs(float(c.values[i]) - float(c.values[j]))
    if c.kind == "vector":
        return float(np.linalg.norm(c.values[i] - c.values[j]))
    if c.kind == "functional":
        w = trapezoid_weights(c.grid)
        diff = c.values[i] - c.values[j]
        return math.sqrt(float(np.sum(w * diff * diff)))
    return 0.0 if c.values[i] == c.values[j] else math.sqrt(2.0)


def distance_matrix(c: Covariate) -> np.ndarray:
    """Full N x N pairwise distance matrix of a covariate."""
    feats = c.feature_matrix()
    d = cdist(feats, feats)
    # enforce exact symmetry / zero diagonal against rounding in cdist
    np.fill_diagonal(d, 0.0)
    return d


def distance_tile(c: Covariate, rows: slice | np.ndarray, cols: slice | np.ndarray,
                  feats: np.ndarray | None = None) -> np.ndarray:
    """Pairwise distances between the ``rows`` and ``cols`` observation blocks."""
    if feats is None:
        feats = c.feature_matrix()
    return cdist(feats[rows], feats[cols])


def rmspe(y_true, y_pred) -> float:
    """Root mean squared prediction error, sqrt(mean((y - yhat)^2))."""
    y_true = np.asarray(y_true, dtype=float)
    y_pred = np.asarray(y_pred, dtype=float)
    if y_true.shape != y_pred.shape or y_true.ndim != 1:
        raise ValueError("rmspe needs two equal-length 1-D arrays")
    if y_true.size == 0:
        raise ValueError("rmspe of empty arrays is undefined")
    return float(np.sqrt(np.mean((y_true - y_pred) ** 2)))


@dataclass(frozen=True)
class Metrics:
    """Held-out evaluation metrics of a fitted model."""

    rmspe: float
    deviance_explained: float
    residual_sd: float
    misclassification_rate: float | None = None


@dataclass(frozen=True)
class Dataset:
    """A response plus an ordered list of candidate covariates.

    The response is scalar for regression or categorical with two levels
    for classification.  Every covariate must have the same number of
    observations and candidate names must be unique.
    """

    response: Covariate
    candidates: tuple[Covariate, ...]

    def __post_init__(self) -> None:
        candidates = tuple(self.candidates)
        object.__setattr__(self, "candidates", candidates)
        if self.response.kind == "categorical":
            if len(self.response.levels) != 2:
                raise StructuralError("classification response needs exactly 2 levels")
        elif self.response.kind != "scalar":
            raise StructuralError("response must be scalar or binary categorical")
        n = self.response.n
        names = set()
        for c in candidates:
            if c.n != n:
                raise StructuralError(
                    f"covariate {c.name!r} has {c.n} observations, expected {n}"
                )
            if c.name in names or c.name == self.response.name:
                raise StructuralError(f"duplicate covariate name {c.name!r}")
            names.add(c.name)

    @property
    def n(self) -> int:
        return self.response.n

    @property
    def candidate_names(self) -> list[str]:
        return [c.name for c in self.candidates]

    def candidate(self, name: str) -> Covariate:
        for c in self.candidates:
            if c.name == name:
                return c
        raise KeyError(f"no candidate named {name!r}")

    def candidate_map(self) -> Mapping[str, Covariate]:
        return {c.name: c for c in self.candidates}

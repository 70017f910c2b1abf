"""Domain types, delay embedding and error metrics.

Positions are 1-based in prose (``y_1 .. y_T``) and 0-based in code; the
conversion happens only in :func:`embed`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import (
    DimensionMismatch,
    EmptyInput,
    InvalidLambda,
    InvalidMemory,
    InvalidOrder,
    LengthMismatch,
    NonFiniteInput,
    Overflow,
    WindowTooLong,
)

_INT64_MAX = 2**63 - 1


def _frozen_array(values, ndim: int, name: str) -> np.ndarray:
    arr = np.array(values, dtype=np.float64, copy=True)
    if arr.ndim != ndim:
        raise DimensionMismatch(f"{name} must be {ndim}-dimensional, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise NonFiniteInput(f"{name} contains NaN or infinite values")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class TimeSeries:
    """Ordered scalar observations ``y_1 .. y_T``.

    Parameters
    ----------
    values : array_like, shape (T,)
        Observations, oldest first. Must be finite and non-empty.
    label : str, optional
        Free-text identifier carried into reports.
    """

    values: np.ndarray
    label: Optional[str] = None

    def __post_init__(self):
        arr = _frozen_array(self.values, 1, "series values")
        if arr.size == 0:
            raise EmptyInput("a time series needs at least one observation")
        object.__setattr__(self, "values", arr)

    def __len__(self) -> int:
        return int(self.values.size)

    @property
    def sd(self) -> float:
        """Sample standard deviation (ddof=1); 0 for a single observation."""
        if len(self) < 2:
            return 0.0
        return float(np.std(self.values, ddof=1))


@dataclass(frozen=True)
class TrajectoryMatrix:
    """Sliding-window design: each input row paired with the value that follows it.

    Row ``i`` of ``inputs`` holds ``y_i .. y_{i+m-1}`` in ascending time and
    ``targets[i]`` is ``y_{i+m}``. The last column is therefore lag 1 and the
    first column lag ``m``.
    """

    inputs: np.ndarray
    targets: np.ndarray

    def __post_init__(self):
        inputs = _frozen_array(self.inputs, 2, "inputs")
        targets = _frozen_array(self.targets, 1, "targets")
        if inputs.shape[0] != targets.shape[0]:
            raise LengthMismatch(
                f"{inputs.shape[0]} input rows but {targets.shape[0]} targets"
            )
        if inputs.shape[0] < 1 or inputs.shape[1] < 1:
            raise EmptyInput("trajectory matrix needs at least one row and one column")
        object.__setattr__(self, "inputs", inputs)
        object.__setattr__(self, "targets", targets)

    @property
    def m(self) -> int:
        return int(self.inputs.shape[1])

    @property
    def N(self) -> int:
        return int(self.inputs.shape[0])

    def rows(self, index) -> "TrajectoryMatrix":
        """Subset of rows (any numpy index) as a new trajectory matrix."""
        return TrajectoryMatrix(self.inputs[index], self.targets[index])


@dataclass(frozen=True)
class ModelConfig:
    """Hyperparameter triple: memory ``m``, order ``p`` and ridge weight ``lambda_``."""

    m: int
    p: int
    lambda_: float = 0.0

    def __post_init__(self):
        _check_memory(self.m)
        _check_order(self.p)
        if not (math.isfinite(self.lambda_) and self.lambda_ >= 0):
            raise InvalidLambda(f"lambda must be finite and >= 0, got {self.lambda_}")

    @property
    def dimension(self) -> int:
        return volterra_dimension(self.m, self.p)


def _check_memory(m) -> None:
    if isinstance(m, bool) or not isinstance(m, (int, np.integer)) or m < 1:
        raise InvalidMemory(f"memory must be a positive integer, got {m!r}")


def _check_order(p) -> None:
    if isinstance(p, bool) or not isinstance(p, (int, np.integer)) or p < 0:
        raise InvalidOrder(f"order must be a non-negative integer, got {p!r}")


def as_series(values, label: Optional[str] = None) -> TimeSeries:
    if isinstance(values, TimeSeries):
        return values
    return TimeSeries(values, label)


def embed(series: TimeSeries | Sequence[float], m: int) -> TrajectoryMatrix:
    """Delay-embed a series into ``N = T - m`` windows of length ``m``.

    >>> tm = embed(TimeSeries([1, 2, 3, 4, 5]), 2)
    >>> tm.inputs.tolist(), tm.targets.tolist()
    ([[1.0, 2.0], [2.0, 3.0], [3.0, 4.0]], [3.0, 4.0, 5.0])
    """
    _check_memory(m)
    y = as_series(series).values
    T = y.size
    if m >= T:
        raise WindowTooLong(f"memory m={m} needs a series longer than {m}, got T={T}")
    inputs = np.lib.stride_tricks.sliding_window_view(y[:-1], m)
    return TrajectoryMatrix(inputs, y[m:])


def volterra_dimension(m: int, p: int) -> int:
    """Number of distinct monomials of degree <= p in m variables, C(m+p, p)."""
    _check_memory(m)
    _check_order(p)
    n = math.comb(int(m) + int(p), int(p))
    if n > _INT64_MAX:
        raise Overflow(f"C({m}+{p}, {p}) exceeds the 64-bit integer range")
    return n


def rmse(actual, estimated) -> float:
    """Root mean squared difference between two equal-length vectors."""
    a = np.asarray(actual, dtype=np.float64).ravel()
    b = np.asarray(estimated, dtype=np.float64).ravel()
    if a.size != b.size:
        raise LengthMismatch(f"lengths differ: {a.size} vs {b.size}")
    if a.size == 0:
        raise EmptyInput("rmse of empty vectors")
    d = a - b
    return float(np.sqrt(np.mean(d * d)))

"""Kolmogorov-Smirnov predictive accuracy (KSPA) tests on model error samples.

Two error samples are compared through their empirical CDFs. The two-sided
test asks whether the error distributions differ; the one-sided test asks
whether the first model's errors are stochastically smaller, which shows up
as its ECDF lying above the other one (``D+ = sup(F1 - F2)``).

Exact p-values are permutation probabilities: the pooled errors are held
fixed and every split into groups of sizes ``n1`` and ``n2`` is equally
likely. They are counted with a lattice-path recursion in integer arithmetic,
which handles tied errors exactly.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np

from .errors import DataError, EmptySample, InvalidFamilySize, NonFiniteInput

EXACT_MAX_PRODUCT = 64
KOLMOGOROV_TERM_TOL = 1e-12


class Transform(str, enum.Enum):
    ABSOLUTE = "abs"
    SQUARED = "sq"


class Direction(str, enum.Enum):
    TWO_SIDED = "two-sided"
    ONE_SIDED = "one-sided"


class Method(str, enum.Enum):
    EXACT = "exact"
    ASYMPTOTIC = "asymptotic"


@dataclass(frozen=True)
class ErrorSample:
    """Non-negative error magnitudes produced by one model."""

    values: np.ndarray
    transform: Transform = Transform.ABSOLUTE
    label: str = ""

    def __post_init__(self):
        v = np.array(self.values, dtype=np.float64, copy=True).ravel()
        if v.size == 0:
            raise EmptySample(f"error sample {self.label!r} is empty")
        if not np.all(np.isfinite(v)):
            raise NonFiniteInput(f"error sample {self.label!r} has non-finite values")
        if np.any(v < 0):
            raise DataError(f"error sample {self.label!r} has negative values")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "transform", Transform(self.transform))

    @classmethod
    def from_residuals(cls, actual, estimated, transform=Transform.ABSOLUTE, label: str = "") -> "ErrorSample":
        r = np.asarray(actual, dtype=np.float64) - np.asarray(estimated, dtype=np.float64)
        transform = Transform(transform)
        values = np.abs(r) if transform is Transform.ABSOLUTE else r * r
        return cls(values, transform, label)

    def __len__(self) -> int:
        return int(self.values.size)


@dataclass(frozen=True)
class KspaResult:
    statistic: float
    p_value: float
    direction: Direction
    n1: int
    n2: int
    method: Method
    adjusted_p: Optional[float] = None

    def adjusted(self, family_size: int) -> "KspaResult":
        (adj,) = bonferroni([self.p_value], family_size)
        return KspaResult(self.statistic, self.p_value, self.direction, self.n1, self.n2, self.method, adj)

    def to_dict(self) -> dict:
        return {
            "statistic": self.statistic,
            "p_value": self.p_value,
            "adjusted_p": self.adjusted_p,
            "direction": self.direction.value,
            "n1": self.n1,
            "n2": self.n2,
            "method": self.method.value,
        }


@dataclass(frozen=True)
class Ecdf:
    """Right-continuous empirical CDF of a sample."""

    sorted_values: np.ndarray

    @property
    def n(self) -> int:
        return int(self.sorted_values.size)

    @property
    def support(self) -> np.ndarray:
        return np.unique(self.sorted_values)

    @property
    def cumulative(self) -> np.ndarray:
        return np.searchsorted(self.sorted_values, self.support, side="right") / self.n

    def __call__(self, z):
        counts = np.searchsorted(self.sorted_values, np.asarray(z, dtype=np.float64), side="right")
        out = counts / self.n
        return float(out) if np.ndim(out) == 0 else out

    def steps(self) -> list[tuple[float, float]]:
        """``(value, F(value))`` at each jump."""
        return list(zip(self.support.tolist(), self.cumulative.tolist()))


def _values(sample) -> np.ndarray:
    if isinstance(sample, ErrorSample):
        return sample.values
    return ErrorSample(sample).values


def ecdf(sample) -> Ecdf:
    """Empirical CDF of a sample; jumps at each distinct value."""
    v = np.sort(_values(sample))
    v.setflags(write=False)
    return Ecdf(v)


def _block_labels(x: np.ndarray, y: np.ndarray):
    """Pooled sorted order as group counts per tie block."""
    pooled = np.concatenate([x, y])
    _, inverse = np.unique(pooled, return_inverse=True)
    k = int(inverse.max()) + 1
    c1 = np.bincount(inverse[: x.size], minlength=k)
    c2 = np.bincount(inverse[x.size:], minlength=k)
    return c1, c2


def _integer_statistic(x: np.ndarray, y: np.ndarray, two_sided: bool) -> int:
    """``n1 * n2 * D`` evaluated at the pooled data points."""
    n1, n2 = x.size, y.size
    c1, c2 = _block_labels(x, y)
    diff = np.cumsum(c1) * n2 - np.cumsum(c2) * n1
    if two_sided:
        return int(np.max(np.abs(diff)))
    return max(0, int(np.max(diff)))


def _count_paths_below(n1: int, n2: int, block_sizes: Sequence[int], bound: int, two_sided: bool) -> int:
    """Number of group assignments whose statistic stays strictly below ``bound``.

    A lattice path steps through the pooled order; ``i`` counts first-sample
    members so far. The statistic is only observed at tie-block boundaries.
    """
    ways = [0] * (n1 + 1)
    ways[0] = 1
    seen = 0
    for size in block_sizes:
        new = [0] * (n1 + 1)
        for i, w in enumerate(ways):
            if not w:
                continue
            j = seen - i
            for a in range(0, min(size, n1 - i) + 1):
                b = size - a
                if j + b > n2:
                    continue
                new[i + a] += w * math.comb(size, a)
        seen += size
        for i in range(n1 + 1):
            if not new[i]:
                continue
            j = seen - i
            if j < 0 or j > n2:
                new[i] = 0
                continue
            value = i * n2 - j * n1
            if two_sided:
                value = abs(value)
            if value >= bound:
                new[i] = 0
        ways = new
    return ways[n1]


def exact_p_value(e1, e2, two_sided: bool = True) -> float:
    """Permutation p-value ``P(D >= D_obs)`` over all ``C(n1+n2, n1)`` splits."""
    x, y = _values(e1), _values(e2)
    n1, n2 = x.size, y.size
    observed = _integer_statistic(x, y, two_sided)
    if observed <= 0:
        return 1.0
    c1, c2 = _block_labels(x, y)
    inside = _count_paths_below(n1, n2, (c1 + c2).tolist(), observed, two_sided)
    total = math.comb(n1 + n2, n1)
    return float(Fraction(total - inside, total))


def kolmogorov_sf(t: float) -> float:
    """Survival function of the Kolmogorov distribution, ``P(K > t)``."""
    if t <= 0:
        return 1.0
    if t < 0.2:
        # 1 - P(K > 0.2) is below 1e-12
        return 1.0
    total = 0.0
    j = 1
    while True:
        term = 2.0 * (-1) ** (j - 1) * math.exp(-2.0 * j * j * t * t)
        total += term
        if abs(term) < KOLMOGOROV_TERM_TOL:
            break
        j += 1
    return min(1.0, max(0.0, total))


def _use_exact(n1: int, n2: int, method) -> bool:
    if method is None:
        return n1 * n2 <= EXACT_MAX_PRODUCT
    return Method(method) is Method.EXACT


def kspa_two_sided(e1, e2, method=None) -> KspaResult:
    """Two-sided test of equal error distributions.

    ``method`` forces ``"exact"`` or ``"asymptotic"``; by default the exact
    permutation p-value is used when ``n1 * n2 <= 64``.
    """
    x, y = _values(e1), _values(e2)
    n1, n2 = x.size, y.size
    D = _integer_statistic(x, y, True) / (n1 * n2)
    if _use_exact(n1, n2, method):
        p, used = exact_p_value(x, y, True), Method.EXACT
    else:
        p, used = kolmogorov_sf(D * math.sqrt(n1 * n2 / (n1 + n2))), Method.ASYMPTOTIC
    return KspaResult(D, p, Direction.TWO_SIDED, n1, n2, used)


def kspa_one_sided(e1, e2, method=None) -> KspaResult:
    """One-sided test that the first model's errors are stochastically smaller.

    The statistic is ``D+ = sup_z (F1(z) - F2(z))``; a small p-value rejects
    ``F1 <= F2`` in favour of ``F1 > F2``.
    """
    x, y = _values(e1), _values(e2)
    n1, n2 = x.size, y.size
    D = _integer_statistic(x, y, False) / (n1 * n2)
    if _use_exact(n1, n2, method):
        p, used = exact_p_value(x, y, False), Method.EXACT
    else:
        p, used = min(1.0, math.exp(-2.0 * D * D * n1 * n2 / (n1 + n2))), Method.ASYMPTOTIC
    return KspaResult(D, p, Direction.ONE_SIDED, n1, n2, used)


def bonferroni(p_values: Sequence[float], family_size: Optional[int] = None) -> list[float]:
    """Multiply each p-value by the family size, capped at 1."""
    p_values = [float(p) for p in p_values]
    if family_size is None:
        family_size = len(p_values)
    if isinstance(family_size, bool) or int(family_size) != family_size or family_size < 1:
        raise InvalidFamilySize(f"family size must be a positive integer, got {family_size!r}")
    if family_size < len(p_values):
        raise InvalidFamilySize(f"family size {family_size} is smaller than the {len(p_values)} p-values given")
    return [min(1.0, family_size * p) for p in p_values]

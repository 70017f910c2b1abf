"""Kernel functions, Gram matrices and explicit monomial feature maps.

The polynomial kernels here are all functions of the dot product
``s = x1 . x2``:

========================  ==============================
family                    k(x1, x2)
========================  ==============================
``SUM_POLYNOMIAL``        ``sum_{n=0}^{p} s**n``
``INHOMOGENEOUS``         ``(1 + s)**p``
``EXPONENTIAL``           ``exp(s)``
``GAUSSIAN``              ``exp(-||x1 - x2||**2 / sigma)``
========================  ==============================

The sum-polynomial kernel is the dot product of the stacked ordered monomial
features returned by :func:`feature_map`, which is what makes the explicit
feature path a usable oracle for the kernel path.
"""

from __future__ import annotations

import enum
import itertools
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.spatial.distance import cdist

from .errors import (
    DimensionMismatch,
    FeatureSpaceTooLarge,
    InvalidKernel,
    InvalidOrder,
)

MAX_BLOCK_SIZE = 10**7


class KernelFamily(str, enum.Enum):
    SUM_POLYNOMIAL = "sum"
    INHOMOGENEOUS = "inhomogeneous"
    EXPONENTIAL = "exponential"
    GAUSSIAN = "gaussian"

    @classmethod
    def parse(cls, value) -> "KernelFamily":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            choices = ", ".join(f.value for f in cls)
            raise InvalidKernel(f"unknown kernel family {value!r} (choose from {choices})") from None

    @property
    def is_polynomial(self) -> bool:
        return self in (KernelFamily.SUM_POLYNOMIAL, KernelFamily.INHOMOGENEOUS)


@dataclass(frozen=True)
class KernelSpec:
    """Kernel family plus its parameter (``p`` for polynomials, ``sigma`` for Gaussian)."""

    family: KernelFamily
    p: Optional[int] = None
    sigma: Optional[float] = None

    def __post_init__(self):
        family = KernelFamily.parse(self.family)
        object.__setattr__(self, "family", family)
        if family.is_polynomial:
            if self.p is None or isinstance(self.p, bool) or int(self.p) != self.p or self.p < 0:
                raise InvalidOrder(f"{family.value} kernel needs an integer order p >= 0, got {self.p!r}")
            object.__setattr__(self, "p", int(self.p))
        elif family is KernelFamily.GAUSSIAN:
            if self.sigma is None or not math.isfinite(self.sigma) or self.sigma <= 0:
                raise InvalidKernel(f"gaussian kernel needs sigma > 0, got {self.sigma!r}")
            object.__setattr__(self, "sigma", float(self.sigma))

    @classmethod
    def sum_polynomial(cls, p: int) -> "KernelSpec":
        return cls(KernelFamily.SUM_POLYNOMIAL, p=p)

    @classmethod
    def inhomogeneous(cls, p: int) -> "KernelSpec":
        return cls(KernelFamily.INHOMOGENEOUS, p=p)

    @classmethod
    def exponential(cls) -> "KernelSpec":
        return cls(KernelFamily.EXPONENTIAL)

    @classmethod
    def gaussian(cls, sigma: float) -> "KernelSpec":
        return cls(KernelFamily.GAUSSIAN, sigma=sigma)

    @classmethod
    def build(cls, family, p: Optional[int] = None, sigma: Optional[float] = None) -> "KernelSpec":
        """Construct from a family name, ignoring parameters the family does not use."""
        family = KernelFamily.parse(family)
        if family.is_polynomial:
            return cls(family, p=p)
        if family is KernelFamily.GAUSSIAN:
            return cls(family, sigma=sigma)
        return cls(family)

    def to_dict(self) -> dict:
        out = {"family": self.family.value}
        if self.p is not None:
            out["p"] = self.p
        if self.sigma is not None:
            out["sigma"] = self.sigma
        return out


@dataclass(frozen=True)
class GramMatrix:
    entries: np.ndarray
    spec: KernelSpec

    @property
    def N(self) -> int:
        return int(self.entries.shape[0])


def _apply_to_dot(spec: KernelSpec, s):
    family = spec.family
    if family is KernelFamily.SUM_POLYNOMIAL:
        # Horner: 1 + s(1 + s(1 + ...))
        out = np.ones_like(s, dtype=np.float64)
        for _ in range(spec.p):
            out = 1.0 + s * out
        return out
    if family is KernelFamily.INHOMOGENEOUS:
        return (1.0 + s) ** spec.p
    if family is KernelFamily.EXPONENTIAL:
        return np.exp(s)
    raise AssertionError(family)


def _as_vector(x) -> np.ndarray:
    v = np.asarray(x, dtype=np.float64)
    if v.ndim == 0:
        v = v.reshape(1)
    if v.ndim != 1:
        raise DimensionMismatch(f"expected a vector, got shape {v.shape}")
    return v


def _as_matrix(X) -> np.ndarray:
    A = np.asarray(X, dtype=np.float64)
    if A.ndim == 1:
        A = A[:, None]
    if A.ndim != 2:
        raise DimensionMismatch(f"expected a 2-d input matrix, got shape {A.shape}")
    return A


def kernel_eval(spec: KernelSpec, x1, x2) -> float:
    """Evaluate ``k(x1, x2)`` for a single pair of vectors."""
    a, b = _as_vector(x1), _as_vector(x2)
    if a.shape != b.shape:
        raise DimensionMismatch(f"vectors of dimension {a.size} and {b.size}")
    if spec.family is KernelFamily.GAUSSIAN:
        d = a - b
        return float(np.exp(-float(d @ d) / spec.sigma))
    return float(_apply_to_dot(spec, np.float64(a @ b)))


def cross_gram(spec: KernelSpec, A, B) -> np.ndarray:
    """Kernel matrix between the rows of ``A`` (n x m) and ``B`` (k x m)."""
    A, B = _as_matrix(A), _as_matrix(B)
    if A.shape[1] != B.shape[1]:
        raise DimensionMismatch(f"inputs of dimension {A.shape[1]} and {B.shape[1]}")
    if spec.family is KernelFamily.GAUSSIAN:
        return np.exp(-cdist(A, B, "sqeuclidean") / spec.sigma)
    return _apply_to_dot(spec, A @ B.T)


def gram(spec: KernelSpec, inputs) -> GramMatrix:
    """Symmetric Gram matrix ``K[i, j] = k(x_i, x_j)`` over the rows of ``inputs``.

    The upper triangle is computed and mirrored so that the result is exactly
    symmetric.
    """
    X = _as_matrix(inputs)
    if X.shape[0] < 1:
        raise DimensionMismatch("gram matrix of an empty input set")
    K = cross_gram(spec, X, X)
    K = np.triu(K) + np.triu(K, 1).T
    K.setflags(write=False)
    return GramMatrix(K, spec)


def feature_dimension(m: int, p: int) -> int:
    """Length of the stacked ordered monomial vector, ``sum_{n=0}^{p} m**n``."""
    return sum(m**n for n in range(p + 1))


def _check_feature_budget(m: int, p: int) -> None:
    if m**p > MAX_BLOCK_SIZE:
        raise FeatureSpaceTooLarge(
            f"degree-{p} block has {m}**{p} = {m**p} monomials (limit {MAX_BLOCK_SIZE})"
        )


def monomial_block(X, n: int) -> np.ndarray:
    """Degree-``n`` ordered monomials for every row of ``X``.

    Column order enumerates index tuples ``(i_1, ..., i_n)`` lexicographically,
    so for two variables and ``n = 2`` the columns are
    ``x1*x1, x1*x2, x2*x1, x2*x2``.
    """
    X = _as_matrix(X)
    N, m = X.shape
    _check_feature_budget(m, n)
    out = np.ones((N, 1))
    for _ in range(n):
        out = (out[:, :, None] * X[:, None, :]).reshape(N, -1)
    return out


def feature_map(x, p: int) -> np.ndarray:
    """Stacked ordered monomials ``(Phi_0(x), Phi_1(x), ..., Phi_p(x))``.

    >>> feature_map([2.0], 2).tolist()
    [1.0, 2.0, 4.0]
    """
    x = _as_vector(x)
    return feature_matrix(x[None, :], p)[0]


def feature_matrix(X, p: int) -> np.ndarray:
    """Row-wise :func:`feature_map` for an ``N x m`` input matrix."""
    if isinstance(p, bool) or int(p) != p or p < 0:
        raise InvalidOrder(f"order must be a non-negative integer, got {p!r}")
    X = _as_matrix(X)
    _check_feature_budget(X.shape[1], p)
    return np.hstack([monomial_block(X, n) for n in range(int(p) + 1)])


def monomial_index_tuples(m: int, n: int) -> list[tuple[int, ...]]:
    """0-based index tuples matching the column order of :func:`monomial_block`."""
    return list(itertools.product(range(m), repeat=n))

"""Closed-loop Volterra fitting in dual (kernel) form.

The fitted predictor is ``y_hat(x) = gamma . k(x)`` with dual weights
``gamma = (K + lambda I)^{-1} y``. For the polynomial kernels the prediction
splits by degree into the Volterra operators ``H_0 .. H_p`` and each operator
can be turned back into its coefficient vector over ordered monomials.

:func:`fit_explicit` solves the same regression directly in monomial feature
space. It never evaluates a kernel and is kept as an independent check of the
dual path.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.linalg

from .core import ModelConfig, TrajectoryMatrix, as_series
from .errors import (
    DimensionMismatch,
    FeatureSpaceTooLarge,
    InvalidLambda,
    InvalidOrder,
    NumericalError,
    Overflow,
    SingularSystem,
    UnsupportedKernel,
)
from .kernels import (
    KernelFamily,
    KernelSpec,
    cross_gram,
    feature_dimension,
    feature_matrix,
    gram,
    monomial_block,
    monomial_index_tuples,
)

JITTER_START = 1e-12
JITTER_STOP = 1e-6
MAX_EXPLICIT_FEATURES = 10**5


@dataclass(frozen=True)
class VolterraModel:
    """A fitted kernel model.

    Attributes
    ----------
    config : ModelConfig
        ``(m, p, lambda)``; ``p`` is 0 for non-polynomial kernels.
    spec : KernelSpec
    training_inputs, training_targets : ndarray
        Stored on the fitting scale (divided by ``scale``).
    gamma : ndarray, shape (N,)
        Dual weights.
    jitter : float
        Extra diagonal added when the plain system could not be factorized.
    scale : float
        Inputs and targets were divided by this before fitting; predictions
        are mapped back to the original scale.
    """

    config: ModelConfig
    spec: KernelSpec
    training_inputs: np.ndarray
    training_targets: np.ndarray
    gamma: np.ndarray
    jitter: float = 0.0
    scale: float = 1.0
    _gram: Optional[np.ndarray] = field(default=None, repr=False, compare=False)

    @property
    def m(self) -> int:
        return self.config.m

    @property
    def N(self) -> int:
        return int(self.gamma.size)

    @property
    def lambda_(self) -> float:
        return self.config.lambda_


@dataclass(frozen=True)
class OperatorDecomposition:
    """Per-degree contributions ``H_0(x) .. H_p(x)`` at one query point."""

    contributions: np.ndarray
    eta: Optional[list] = None

    @property
    def total(self) -> float:
        return float(np.sum(self.contributions))


def _solve_spd(A: np.ndarray, b: np.ndarray, allow_jitter: bool):
    """Solve ``A x = b`` by Cholesky, escalating diagonal jitter on failure."""
    N = A.shape[0]
    ladder = [0.0]
    if allow_jitter:
        base = float(np.trace(A)) / N
        if not (base > 0 and math.isfinite(base)):
            base = 1.0
        j = JITTER_START
        while j <= JITTER_STOP * (1 + 1e-9):
            ladder.append(j * base)
            j *= 10
    eye = np.eye(N)
    for jitter in ladder:
        M = A + jitter * eye if jitter else A
        try:
            factor = scipy.linalg.cho_factor(M, lower=True, check_finite=False)
        except np.linalg.LinAlgError:
            continue
        x = scipy.linalg.cho_solve(factor, b, check_finite=False)
        if not np.all(np.isfinite(x)):
            continue
        # one step of iterative refinement
        x = x + scipy.linalg.cho_solve(factor, b - M @ x, check_finite=False)
        return x, jitter
    raise SingularSystem(
        f"kernel system of size {N} is not positive definite even with jitter "
        f"{JITTER_STOP:g}*trace/N"
    )


def _resolve_scale(trajectory: TrajectoryMatrix, scale) -> float:
    if scale is None or scale is False:
        return 1.0
    if scale is True:
        series = np.concatenate([trajectory.inputs[0], trajectory.targets])
        sd = float(np.std(series, ddof=1)) if series.size > 1 else 0.0
        return sd if sd > 0 else 1.0
    value = float(scale)
    if not (value > 0 and math.isfinite(value)):
        raise InvalidLambda(f"scale must be a positive finite number, got {scale!r}")
    return value


def fit(
    trajectory: TrajectoryMatrix,
    spec: KernelSpec,
    lambda_: float = 0.0,
    scale=None,
) -> VolterraModel:
    """Fit dual weights ``gamma = (K + lambda I)^{-1} y``.

    Parameters
    ----------
    trajectory : TrajectoryMatrix
    spec : KernelSpec
    lambda_ : float
        Ridge weight, >= 0. With ``lambda_ == 0`` an unfactorizable Gram
        matrix gets a jitter of ``1e-12 * trace(K)/N``, raised tenfold up to
        ``1e-6 * trace(K)/N`` before :class:`SingularSystem` is raised.
    scale : bool or float, optional
        ``True`` divides inputs and targets by the series standard deviation
        before fitting; a number divides by that value.
    """
    lambda_ = float(lambda_)
    if not (math.isfinite(lambda_) and lambda_ >= 0):
        raise InvalidLambda(f"lambda must be finite and >= 0, got {lambda_}")
    c = _resolve_scale(trajectory, scale)
    X = trajectory.inputs / c
    y = trajectory.targets / c
    K = gram(spec, X).entries
    if not np.all(np.isfinite(K)):
        raise Overflow("Gram matrix overflowed; consider scaling the series")
    A = K + lambda_ * np.eye(K.shape[0])
    gamma, jitter = _solve_spd(A, y, allow_jitter=True)
    p = spec.p if spec.family.is_polynomial else 0
    for arr in (X, y, gamma):
        arr.setflags(write=False)
    return VolterraModel(
        config=ModelConfig(trajectory.m, p, lambda_),
        spec=spec,
        training_inputs=X,
        training_targets=y,
        gamma=gamma,
        jitter=jitter,
        scale=c,
        _gram=K,
    )


def fit_config(trajectory: TrajectoryMatrix, config: ModelConfig, family="sum", sigma=None, scale=None) -> VolterraModel:
    """Convenience wrapper: kernel spec built from ``family`` and ``config.p``."""
    spec = KernelSpec.build(family, p=config.p, sigma=sigma)
    return fit(trajectory, spec, config.lambda_, scale=scale)


def _query_matrix(model: VolterraModel, X) -> np.ndarray:
    A = np.asarray(X, dtype=np.float64)
    if A.ndim == 1:
        A = A[None, :]
    if A.ndim != 2 or A.shape[1] != model.m:
        raise DimensionMismatch(f"model expects inputs of dimension {model.m}, got shape {np.shape(X)}")
    return A / model.scale


def predict_many(model: VolterraModel, X) -> np.ndarray:
    """Predictions for each row of ``X`` (original scale)."""
    Q = _query_matrix(model, X)
    return cross_gram(model.spec, Q, model.training_inputs) @ model.gamma * model.scale


def predict(model: VolterraModel, x) -> float:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise DimensionMismatch(f"expected a single input vector, got shape {x.shape}")
    return float(predict_many(model, x[None, :])[0])


def reconstruct(model: VolterraModel) -> np.ndarray:
    """One-step predictions at every training input."""
    K = model._gram
    if K is None:
        K = gram(model.spec, model.training_inputs).entries
    return K @ model.gamma * model.scale


def residual_norm(model: VolterraModel) -> float:
    """``||(K + lambda I) gamma - y||`` on the fitting scale."""
    K = model._gram if model._gram is not None else gram(model.spec, model.training_inputs).entries
    r = K @ model.gamma + model.lambda_ * model.gamma - model.training_targets
    return float(np.linalg.norm(r))


def rollout(model: VolterraModel, history, steps: int) -> np.ndarray:
    """Closed-loop forecast: feed each prediction back as the newest input."""
    window = list(as_series(history).values[-model.m:])
    if len(window) < model.m:
        raise DimensionMismatch(f"history needs at least {model.m} values")
    out = np.empty(int(steps))
    for i in range(int(steps)):
        out[i] = predict(model, np.asarray(window))
        window = window[1:] + [out[i]]
    return out


def _degree_weights(model: VolterraModel) -> np.ndarray:
    spec = model.spec
    if spec.family is KernelFamily.SUM_POLYNOMIAL:
        return np.ones(spec.p + 1)
    if spec.family is KernelFamily.INHOMOGENEOUS:
        return np.array([math.comb(spec.p, n) for n in range(spec.p + 1)], dtype=np.float64)
    raise UnsupportedKernel(f"operator decomposition needs a polynomial kernel, got {spec.family.value}")


def operator_contributions(model: VolterraModel, x, with_coefficients: bool = False) -> OperatorDecomposition:
    """Split the prediction at ``x`` into its degree-``n`` Volterra operators.

    ``H_n(x) = w_n * gamma . ((x_1 . x)**n, ..., (x_N . x)**n)`` where
    ``w_n`` is 1 for the sum kernel and ``C(p, n)`` for the inhomogeneous
    kernel. ``gamma`` is the same regularized solution used for prediction,
    so the contributions always add up to :func:`predict`.
    """
    weights = _degree_weights(model)
    q = _query_matrix(model, x)[0]
    s = model.training_inputs @ q
    powers = np.ones_like(s)
    H = np.empty(weights.size)
    for n in range(weights.size):
        H[n] = weights[n] * float(model.gamma @ powers)
        powers = powers * s
    H *= model.scale
    eta = None
    if with_coefficients:
        eta = [recover_coefficients(model, n) for n in range(weights.size)]
    return OperatorDecomposition(H, eta)


def recover_coefficients(model: VolterraModel, n: int) -> np.ndarray:
    """Coefficients ``eta_n`` of the degree-``n`` operator over ordered monomials.

    Satisfies ``H_n(x) == eta_n . monomial_block(x, n)`` on the original scale.
    Column order follows :func:`clvolterra.kernels.monomial_index_tuples`;
    window column ``j`` (0-based) is lag ``m - j``.
    """
    weights = _degree_weights(model)
    if isinstance(n, bool) or int(n) != n or not 0 <= n < weights.size:
        raise InvalidOrder(f"order n must lie in 0..{weights.size - 1}, got {n!r}")
    n = int(n)
    if model.m**n > 10**7:
        raise FeatureSpaceTooLarge(f"{model.m}**{n} monomials exceed the 1e7 limit")
    block = monomial_block(model.training_inputs, n)
    c = model.scale
    return weights[n] * c ** (1 - n) * (block.T @ model.gamma)


def symmetric_coefficients(model: VolterraModel, n: int) -> dict[tuple[int, ...], float]:
    """Volterra kernel ``h^(n)`` keyed by lag multiset.

    Ordered monomials that are permutations of each other describe the same
    product of lagged values, so their coefficients are summed. Keys are
    ascending 1-based lags, e.g. ``(1, 1)`` for ``y_{t-1}**2``.
    """
    eta = recover_coefficients(model, n)
    m = model.m
    table: dict[tuple[int, ...], float] = {}
    for coef, idx in zip(eta, monomial_index_tuples(m, n)):
        key = tuple(sorted(m - j for j in idx))
        table[key] = table.get(key, 0.0) + float(coef)
    return dict(sorted(table.items()))


@dataclass(frozen=True)
class ExplicitFit:
    """Coefficients over the stacked ordered monomial features."""

    coefficients: np.ndarray
    m: int
    p: int
    lambda_: float
    rank: int

    def features(self, X) -> np.ndarray:
        return feature_matrix(X, self.p)

    def predict_many(self, X) -> np.ndarray:
        A = np.asarray(X, dtype=np.float64)
        if A.ndim == 1:
            A = A[None, :]
        if A.shape[1] != self.m:
            raise DimensionMismatch(f"expected inputs of dimension {self.m}, got {A.shape[1]}")
        return self.features(A) @ self.coefficients

    def predict(self, x) -> float:
        return float(self.predict_many(np.asarray(x, dtype=np.float64)[None, :])[0])


def fit_explicit(trajectory: TrajectoryMatrix, p: int, lambda_: float = 0.0) -> ExplicitFit:
    """Ridge / minimum-norm least squares directly on monomial features.

    Computes ``E = Phi^T (Phi Phi^T + lambda I)^{-1} y`` through the SVD of
    ``Phi`` (``E = V diag(s / (s**2 + lambda)) U^T y``). With ``lambda == 0``
    this is the pseudoinverse solution, which coincides with
    ``Phi^T (Phi Phi^T)^{-1} y`` when ``Phi`` has full row rank and with the
    ordinary least-squares fit when the system is overdetermined.
    """
    lambda_ = float(lambda_)
    if not (math.isfinite(lambda_) and lambda_ >= 0):
        raise InvalidLambda(f"lambda must be finite and >= 0, got {lambda_}")
    m = trajectory.m
    if feature_dimension(m, p) > MAX_EXPLICIT_FEATURES:
        raise FeatureSpaceTooLarge(
            f"explicit path limited to {MAX_EXPLICIT_FEATURES} features, "
            f"m={m}, p={p} gives {feature_dimension(m, p)}"
        )
    Phi = feature_matrix(trajectory.inputs, p)
    if not np.all(np.isfinite(Phi)):
        raise Overflow("monomial features overflowed")
    y = trajectory.targets
    try:
        U, s, Vt = np.linalg.svd(Phi, full_matrices=False)
    except np.linalg.LinAlgError as exc:
        raise SingularSystem(f"SVD of the feature matrix failed: {exc}") from exc
    if s.size == 0 or s[0] == 0:
        raise SingularSystem("feature matrix is identically zero")
    if lambda_ > 0:
        gain = s / (s * s + lambda_)
        rank = int(np.sum(s > 0))
    else:
        cutoff = max(Phi.shape) * np.finfo(np.float64).eps * s[0]
        keep = s > cutoff
        gain = np.where(keep, 1.0 / np.where(keep, s, 1.0), 0.0)
        rank = int(np.sum(keep))
    coef = Vt.T @ (gain * (U.T @ y))
    if not np.all(np.isfinite(coef)):
        raise NumericalError("explicit solution is not finite")
    return ExplicitFit(coef, m, int(p), lambda_, rank)

"""Chronological train/test split and k-fold cross-validation over ``(lambda, m, p)``.

Folds are contiguous blocks of trajectory rows, never shuffled; the last
fold absorbs the ``N mod k`` remainder. Validation uses one-step predictions
from true past values.
"""

from __future__ import annotations

import dataclasses
import itertools
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from ._parallel import parallel_map
from .core import ModelConfig, TimeSeries, as_series, embed, rmse, volterra_dimension
from .errors import InsufficientData, InvalidGrid, SingularSystem, VolterraError
from .kernels import KernelFamily, KernelSpec, gram
from .solver import VolterraModel, _solve_spd, fit, predict_many

DEFAULT_LAMBDAS = (0.0, 1e-8, 1e-6, 1e-4, 1e-2, 1.0)
DEFAULT_MEMORIES = tuple(range(1, 11))
DEFAULT_ORDERS = tuple(range(1, 6))
DEFAULT_SIGMA_FACTORS = (0.1, 0.3, 1.0, 3.0, 10.0)
TIE_RTOL = 1e-12


@dataclass(frozen=True)
class SearchGrid:
    """Candidate hyperparameters and fold settings.

    ``sigmas`` is only used by the Gaussian family. When it is ``None`` the
    widths are ``DEFAULT_SIGMA_FACTORS`` times the median squared distance
    between training windows.
    """

    lambdas: Sequence[float] = DEFAULT_LAMBDAS
    memories: Sequence[int] = DEFAULT_MEMORIES
    orders: Sequence[int] = DEFAULT_ORDERS
    k: int = 5
    train_fraction: float = 0.8
    sigmas: Optional[Sequence[float]] = None

    def __post_init__(self):
        for name in ("lambdas", "memories", "orders"):
            values = tuple(getattr(self, name))
            if not values:
                raise InvalidGrid(f"grid list {name!r} is empty")
            object.__setattr__(self, name, values)
        if self.sigmas is not None:
            sigmas = tuple(float(s) for s in self.sigmas)
            if not sigmas or any(not (s > 0 and math.isfinite(s)) for s in sigmas):
                raise InvalidGrid("sigmas must be a non-empty list of positive widths")
            object.__setattr__(self, "sigmas", sigmas)
        # validates every value
        for m, p, lam in itertools.product(self.memories, self.orders, self.lambdas):
            ModelConfig(m, p, lam)
        if isinstance(self.k, bool) or int(self.k) != self.k or self.k < 2:
            raise InvalidGrid(f"fold count k must be an integer >= 2, got {self.k!r}")
        if not 0 < self.train_fraction < 1:
            raise InvalidGrid(f"train_fraction must lie in (0, 1), got {self.train_fraction}")

    @property
    def max_memory(self) -> int:
        return max(self.memories)

    def check_length(self, train_length: int) -> None:
        """Every memory must leave at least two rows per fold."""
        for m in self.memories:
            n_rows = train_length - m
            if n_rows < 2 * self.k:
                raise InsufficientData(
                    f"training length {train_length} with m={m} gives {n_rows} rows, "
                    f"need at least {2 * self.k} for {self.k} folds"
                )

    def to_dict(self) -> dict:
        return {
            "lambdas": list(self.lambdas),
            "memories": list(self.memories),
            "orders": list(self.orders),
            "k": self.k,
            "train_fraction": self.train_fraction,
            "sigmas": None if self.sigmas is None else list(self.sigmas),
        }


@dataclass(frozen=True)
class CandidateScore:
    config: ModelConfig
    spec: KernelSpec
    fold_rmse: tuple
    mean_rmse: float

    def to_dict(self) -> dict:
        return {
            "m": self.config.m,
            "p": self.config.p,
            "lambda": self.config.lambda_,
            "kernel": self.spec.to_dict(),
            "fold_rmse": list(self.fold_rmse),
            "mean_rmse": self.mean_rmse,
        }


@dataclass(frozen=True)
class CvReport:
    candidates: tuple
    selected: ModelConfig
    selected_spec: KernelSpec
    k: int
    train_length: int
    test_length: int = 0
    test_rmse: Optional[float] = None

    @property
    def best(self) -> CandidateScore:
        for c in self.candidates:
            if c.config == self.selected and c.spec == self.selected_spec:
                return c
        raise LookupError("selected candidate missing from report")

    def to_dict(self) -> dict:
        return {
            "k": self.k,
            "train_length": self.train_length,
            "test_length": self.test_length,
            "selected": {
                "m": self.selected.m,
                "p": self.selected.p,
                "lambda": self.selected.lambda_,
                "kernel": self.selected_spec.to_dict(),
            },
            "test_rmse": self.test_rmse,
            "candidates": [c.to_dict() for c in self.candidates],
        }


def split(series, train_fraction: float, min_length: int = 0) -> tuple[TimeSeries, TimeSeries]:
    """Chronological split: the first ``ceil(T * train_fraction)`` points train."""
    series = as_series(series)
    if not 0 < train_fraction < 1:
        raise InvalidGrid(f"train_fraction must lie in (0, 1), got {train_fraction}")
    T = len(series)
    # rounding guards against 0.8 * 100 landing a hair above 80
    n_train = math.ceil(round(T * train_fraction, 9))
    n_test = T - n_train
    if n_test < 1 or n_train <= min_length or n_test <= min_length:
        raise InsufficientData(
            f"split of T={T} at {train_fraction} gives ({n_train}, {n_test}); "
            f"both parts must be longer than {min_length}"
        )
    y = series.values
    label = series.label or "series"
    return (
        TimeSeries(y[:n_train], f"{label}:train"),
        TimeSeries(y[n_train:], f"{label}:test"),
    )


def fold_slices(N: int, k: int) -> list[slice]:
    """Contiguous folds of ``N // k`` rows; the last one also takes the remainder."""
    if N < k:
        raise InsufficientData(f"{N} rows cannot form {k} folds")
    size = N // k
    return [slice(i * size, N if i == k - 1 else (i + 1) * size) for i in range(k)]


def _median_sq_distance(X: np.ndarray) -> float:
    sq = np.sum(X * X, axis=1)
    d = sq[:, None] + sq[None, :] - 2 * X @ X.T
    iu = np.triu_indices(X.shape[0], 1)
    vals = d[iu]
    med = float(np.median(vals)) if vals.size else 0.0
    return med if med > 0 else 1.0


def kernel_specs(family, orders: Sequence[int], sigmas: Optional[Sequence[float]], X: Optional[np.ndarray] = None) -> list[KernelSpec]:
    """Kernel specs a grid expands to for one family (and one memory)."""
    family = KernelFamily.parse(family)
    if family.is_polynomial:
        return [KernelSpec(family, p=p) for p in orders]
    if family is KernelFamily.EXPONENTIAL:
        return [KernelSpec.exponential()]
    if sigmas is None:
        base = _median_sq_distance(X) if X is not None else 1.0
        sigmas = [f * base for f in DEFAULT_SIGMA_FACTORS]
    return [KernelSpec.gaussian(s) for s in sigmas]


def _score_memory(y: np.ndarray, m: int, grid: SearchGrid, family, scale) -> list[CandidateScore]:
    tm = embed(y, m)
    c = 1.0
    if scale:
        c = float(np.std(y, ddof=1)) if scale is True else float(scale)
        c = c if c > 0 else 1.0
    X, t = tm.inputs / c, tm.targets / c
    folds = fold_slices(tm.N, grid.k)
    rows = np.arange(tm.N)
    out = []
    for spec in kernel_specs(family, grid.orders, grid.sigmas, X):
        try:
            K = gram(spec, X).entries
            usable = bool(np.all(np.isfinite(K)))
        except VolterraError:
            usable = False
        per_lambda = {lam: [] for lam in grid.lambdas}
        for fold in folds:
            val = rows[fold]
            tr = np.setdiff1d(rows, val)
            for lam in grid.lambdas:
                if not usable:
                    per_lambda[lam].append(math.inf)
                    continue
                try:
                    A = K[np.ix_(tr, tr)] + lam * np.eye(tr.size)
                    gamma, _ = _solve_spd(A, t[tr], allow_jitter=True)
                    pred = K[np.ix_(val, tr)] @ gamma
                    err = rmse(t[val], pred) * c
                    per_lambda[lam].append(err if math.isfinite(err) else math.inf)
                except VolterraError:
                    per_lambda[lam].append(math.inf)
        p = spec.p if spec.family.is_polynomial else 0
        for lam in grid.lambdas:
            scores = tuple(per_lambda[lam])
            mean = math.inf if any(math.isinf(s) for s in scores) else float(np.mean(scores))
            out.append(CandidateScore(ModelConfig(m, p, lam), spec, scores, mean))
    return out


def _tie_key(c: CandidateScore):
    if c.spec.family.is_polynomial:
        size = volterra_dimension(c.config.m, c.config.p)
    else:
        size = 0
    sigma = c.spec.sigma or 0.0
    return (size, c.config.lambda_, c.config.m, -sigma)


def choose(candidates: Sequence[CandidateScore]) -> CandidateScore:
    """Lowest mean CV error; near-ties go to the most parsimonious candidate."""
    finite = [c for c in candidates if math.isfinite(c.mean_rmse)]
    if not finite:
        raise SingularSystem("no candidate could be fitted on every fold")
    best = min(c.mean_rmse for c in finite)
    tied = [c for c in finite if c.mean_rmse - best <= TIE_RTOL * abs(best)]
    return min(tied, key=_tie_key)


def cross_validate(train, grid: SearchGrid, family="sum", scale=None) -> CvReport:
    """Score every grid candidate by k-fold CV on the training series.

    A candidate that fails on any fold scores ``inf``; it never aborts the
    search. Candidates are reported in grid order (memory, kernel, lambda).
    """
    train = as_series(train)
    grid.check_length(len(train))
    y = train.values
    per_m = parallel_map(lambda m: _score_memory(y, m, grid, family, scale), list(grid.memories))
    candidates = tuple(itertools.chain.from_iterable(per_m))
    best = choose(candidates)
    return CvReport(candidates, best.config, best.spec, grid.k, len(train))


def _test_trajectory(train: TimeSeries, test: TimeSeries, m: int):
    """Test rows: windows whose target lies in the test part, seeded with the last ``m`` training values."""
    joined = np.concatenate([train.values[-m:], test.values])
    return embed(joined, m)


def refit(train: TimeSeries, config: ModelConfig, spec: KernelSpec, scale=None) -> VolterraModel:
    tm = embed(train, config.m)
    if scale is True:
        scale = train.sd or None
    return fit(tm, spec, config.lambda_, scale=scale)


def holdout_rmse(train, test, config: ModelConfig, spec: KernelSpec, scale=None) -> float:
    """Out-of-sample one-step RMSE of a configuration refitted on ``train``."""
    train, test = as_series(train), as_series(test)
    model = refit(train, config, spec, scale)
    tm = _test_trajectory(train, test, config.m)
    return rmse(tm.targets, predict_many(model, tm.inputs))


def select_and_refit(series, grid: SearchGrid, family="sum", scale=None) -> tuple[VolterraModel, CvReport]:
    """Split, cross-validate on the training part, refit the winner and score it on the test part."""
    series = as_series(series)
    train, test = split(series, grid.train_fraction, min_length=grid.max_memory)
    report = cross_validate(train, grid, family, scale)
    model = refit(train, report.selected, report.selected_spec, scale)
    tm = _test_trajectory(train, test, report.selected.m)
    score = rmse(tm.targets, predict_many(model, tm.inputs))
    report = dataclasses.replace(report, test_length=len(test), test_rmse=score)
    return model, report

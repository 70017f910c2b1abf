"""Seeded ARMA-type process generators, linear/Gaussian baselines and the Monte-Carlo harness.

Noise generation is fixed so that results depend only on the seed: uniforms
come from numpy's PCG64 bit generator and are turned into standard normals by
the Box-Muller transform (pairs ``(u1, u2)`` give ``r cos(2 pi u2)`` and
``r sin(2 pi u2)`` with ``r = sqrt(-2 log(1 - u1))``).
"""

from __future__ import annotations

import dataclasses
import enum
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from ._parallel import parallel_map
from .core import ModelConfig, TimeSeries, as_series, embed, rmse
from .errors import InsufficientData, NonStationarySpec, SingularSystem, VolterraError
from .kernels import KernelSpec
from .selection import SearchGrid, cross_validate
from .solver import fit, reconstruct

DEFAULT_BURN_IN = 100


class ProcessKind(str, enum.Enum):
    AR1 = "ar1"
    MA1 = "ma1"
    ARMA11 = "arma11"
    P3_AS_WRITTEN = "p3"
    P3_ARMA21 = "p3-arma21"


@dataclass(frozen=True)
class ProcessSpec:
    """A simulated process ``y_t = sum_k ar[k] y_{t-1-k} + e_t + theta e_{t-1}``.

    ``initial`` is ``y_0``; the first generated value is ``y_1``. ``burn_in``
    values are generated first and discarded.
    """

    kind: ProcessKind
    phi: float = 0.0
    theta: float = 0.0
    noise_sd: float = 1.0
    length: int = 100
    burn_in: int = DEFAULT_BURN_IN
    seed: int = 0
    initial: float = 0.0
    label: Optional[str] = None

    def __post_init__(self):
        object.__setattr__(self, "kind", ProcessKind(self.kind))
        if self.length < 1:
            raise InsufficientData(f"process length must be >= 1, got {self.length}")
        if self.burn_in < 0:
            raise NonStationarySpec(f"burn_in must be >= 0, got {self.burn_in}")
        if not (self.noise_sd >= 0 and math.isfinite(self.noise_sd)):
            raise NonStationarySpec(f"noise_sd must be >= 0, got {self.noise_sd}")
        ar = self.ar_coefficients
        if ar:
            roots = np.roots(np.concatenate([[1.0], -np.asarray(ar)]))
            if np.any(np.abs(roots) >= 1):
                raise NonStationarySpec(f"{self.name} is not stationary (AR coefficients {ar})")

    @property
    def ar_coefficients(self) -> tuple:
        kind = self.kind
        if kind in (ProcessKind.AR1, ProcessKind.ARMA11):
            return (self.phi,)
        if kind is ProcessKind.P3_AS_WRITTEN:
            # y_{t-1} - 0.9 y_{t-1}
            return (1.0 - 0.9,)
        if kind is ProcessKind.P3_ARMA21:
            return (1.0, -0.9)
        return ()

    @property
    def ma_coefficient(self) -> float:
        kind = self.kind
        if kind in (ProcessKind.MA1, ProcessKind.ARMA11):
            return self.theta
        if kind in (ProcessKind.P3_AS_WRITTEN, ProcessKind.P3_ARMA21):
            return -0.8
        return 0.0

    @property
    def name(self) -> str:
        return self.label or self.kind.value

    def with_seed(self, seed: int) -> "ProcessSpec":
        return dataclasses.replace(self, seed=int(seed))

    def to_dict(self) -> dict:
        return {
            "kind": self.kind.value,
            "label": self.name,
            "ar": list(self.ar_coefficients),
            "ma": self.ma_coefficient,
            "noise_sd": self.noise_sd,
            "length": self.length,
            "burn_in": self.burn_in,
            "seed": self.seed,
            "initial": self.initial,
        }


def p1(**kw) -> ProcessSpec:
    """``y_t = 0.5 y_{t-1} + e_t``."""
    return ProcessSpec(ProcessKind.AR1, phi=0.5, label="P1", **kw)


def p2(**kw) -> ProcessSpec:
    """``y_t = e_t - 0.9 e_{t-1}``."""
    return ProcessSpec(ProcessKind.MA1, theta=-0.9, label="P2", **kw)


def p3(alternate: bool = False, **kw) -> ProcessSpec:
    """P3 as printed (``y_{t-1} - 0.9 y_{t-1}``) or, with ``alternate``, as ARMA(2,1)."""
    kind = ProcessKind.P3_ARMA21 if alternate else ProcessKind.P3_AS_WRITTEN
    return ProcessSpec(kind, label="P3", **kw)


def standard_normals(seed: int, n: int) -> np.ndarray:
    """``n`` standard normal draws via Box-Muller on PCG64 uniforms."""
    rng = np.random.Generator(np.random.PCG64(int(seed)))
    pairs = (n + 1) // 2
    u = rng.random((pairs, 2))
    r = np.sqrt(-2.0 * np.log1p(-u[:, 0]))
    angle = 2.0 * np.pi * u[:, 1]
    z = np.column_stack([r * np.cos(angle), r * np.sin(angle)]).ravel()
    return z[:n]


def generate(spec: ProcessSpec) -> TimeSeries:
    """Simulate ``spec.length`` values after ``spec.burn_in`` discarded ones."""
    total = spec.burn_in + spec.length
    eps = spec.noise_sd * standard_normals(spec.seed, total)
    ar = spec.ar_coefficients
    theta = spec.ma_coefficient
    history = [spec.initial] + [0.0] * (len(ar) - 1)  # y_{t-1}, y_{t-2}, ...
    prev_eps = 0.0
    y = np.empty(total)
    for t in range(total):
        value = eps[t] + theta * prev_eps
        for k, a in enumerate(ar):
            value += a * history[k]
        y[t] = value
        if ar:
            history = [value] + history[:-1]
        prev_eps = eps[t]
    return TimeSeries(y[spec.burn_in:], f"{spec.name}[seed={spec.seed}]")


@dataclass(frozen=True)
class ArBaseline:
    """OLS autoregression with intercept; ``coefficients[k]`` multiplies lag ``k + 1``."""

    coefficients: np.ndarray
    intercept: float
    fitted: np.ndarray
    residuals: np.ndarray

    @property
    def order(self) -> int:
        return int(self.coefficients.size)

    @property
    def rmse(self) -> float:
        return float(np.sqrt(np.mean(self.residuals**2)))


def fit_ar_baseline(series, order: int) -> ArBaseline:
    series = as_series(series)
    if len(series) <= order + 1:
        raise InsufficientData(f"AR({order}) needs more than {order + 1} observations, got {len(series)}")
    tm = embed(series, order)
    lags = tm.inputs[:, ::-1]
    design = np.column_stack([np.ones(tm.N), lags])
    beta, _, rank, _ = np.linalg.lstsq(design, tm.targets, rcond=None)
    if rank < design.shape[1]:
        raise SingularSystem(f"AR({order}) design matrix has rank {rank} < {design.shape[1]}")
    fitted = design @ beta
    return ArBaseline(beta[1:], float(beta[0]), fitted, tm.targets - fitted)


@dataclass(frozen=True)
class MethodFit:
    """In-sample one-step reconstruction from one method on one series."""

    method: str
    targets: np.ndarray
    fitted: np.ndarray
    settings: dict = field(default_factory=dict)

    @property
    def rmse(self) -> float:
        return rmse(self.targets, self.fitted)

    @property
    def abs_errors(self) -> np.ndarray:
        return np.abs(self.targets - self.fitted)


VOLTERRA = "volterra"
GAUSSIAN_RIDGE = "gaussian_ridge"
AR_OLS = "ar_ols"
METHODS = (VOLTERRA, GAUSSIAN_RIDGE, AR_OLS)

DEFAULT_GAUSSIAN_LAMBDAS = (1e-8, 1e-6, 1e-4, 1e-2, 1.0)


def volterra_fit(series, config: ModelConfig, lambda_grid: Optional[Sequence[float]] = None, folds: int = 5, scale=None) -> MethodFit:
    """Sum-kernel fit at ``(m, p)``; lambda from ``config`` or chosen by CV over ``lambda_grid``."""
    series = as_series(series)
    lam = config.lambda_
    if lambda_grid:
        grid = SearchGrid(lambdas=tuple(lambda_grid), memories=(config.m,), orders=(config.p,), k=folds)
        lam = cross_validate(series, grid, "sum", scale).selected.lambda_
    tm = embed(series, config.m)
    model = fit(tm, KernelSpec.sum_polynomial(config.p), lam, scale=scale)
    return MethodFit(VOLTERRA, tm.targets, reconstruct(model), {"m": config.m, "p": config.p, "lambda": lam, "jitter": model.jitter})


def gaussian_ridge_fit(series, m: int, lambdas: Sequence[float] = DEFAULT_GAUSSIAN_LAMBDAS, sigmas=None, folds: int = 5, scale=None) -> MethodFit:
    """Gaussian-kernel ridge on the same windows, width and lambda chosen by CV."""
    series = as_series(series)
    grid = SearchGrid(lambdas=tuple(lambdas), memories=(m,), orders=(0,), k=folds, sigmas=sigmas)
    report = cross_validate(series, grid, "gaussian", scale)
    tm = embed(series, m)
    if scale is True:
        scale = series.sd or None
    model = fit(tm, report.selected_spec, report.selected.lambda_, scale=scale)
    return MethodFit(GAUSSIAN_RIDGE, tm.targets, reconstruct(model), {"m": m, "sigma": report.selected_spec.sigma, "lambda": report.selected.lambda_})


def ar_fit(series, order: int) -> MethodFit:
    series = as_series(series)
    base = fit_ar_baseline(series, order)
    return MethodFit(AR_OLS, series.values[order:], base.fitted, {"order": order})


def _run_method(method: str, series, config: ModelConfig, lambda_grid, folds: int) -> Optional[MethodFit]:
    try:
        if method == VOLTERRA:
            return volterra_fit(series, config, lambda_grid, folds)
        if method == GAUSSIAN_RIDGE:
            return gaussian_ridge_fit(series, config.m, folds=folds)
        if method == AR_OLS:
            return ar_fit(series, config.m)
    except VolterraError:
        return None
    raise ValueError(f"unknown method {method!r}")


@dataclass
class McSummary:
    """Monte-Carlo RMSE table.

    ``rmse[(process, config_key, method)]`` lists per-run RMSE values in run
    order, ``nan`` marking a failed cell. ``errors`` keeps the absolute
    one-step errors of each run for distribution tests.
    """

    processes: list
    configs: list
    methods: tuple
    runs: int
    master_seed: int
    rmse: dict
    settings: dict
    errors: dict = field(default_factory=dict, repr=False)

    def mean(self, process: str, config: ModelConfig, method: str) -> float:
        values = np.asarray(self.rmse[(process, config_key(config), method)], dtype=np.float64)
        ok = values[np.isfinite(values)]
        return float(np.mean(ok)) if ok.size else math.nan

    def pooled_errors(self, process: str, config: ModelConfig, method: str) -> np.ndarray:
        chunks = [e for e in self.errors.get((process, config_key(config), method), []) if e is not None]
        return np.concatenate(chunks) if chunks else np.empty(0)

    def to_dict(self) -> dict:
        rows = []
        for proc in self.processes:
            for cfg in self.configs:
                for method in self.methods:
                    key = (proc, config_key(cfg), method)
                    values = self.rmse[key]
                    rows.append({
                        "process": proc,
                        "m": cfg.m,
                        "p": cfg.p,
                        "method": method,
                        "mean_rmse": self.mean(proc, cfg, method),
                        "failed_runs": int(sum(1 for v in values if not math.isfinite(v))),
                        "run_rmse": list(values),
                        "settings": self.settings.get(key, []),
                    })
        return {
            "runs": self.runs,
            "master_seed": self.master_seed,
            "methods": list(self.methods),
            "cells": rows,
        }


def config_key(config: ModelConfig) -> str:
    return f"m={config.m},p={config.p}"


def run_table1(
    processes: Sequence[ProcessSpec],
    configs: Sequence[ModelConfig],
    runs: int,
    master_seed: int = 0,
    lambda_grid: Optional[Sequence[float]] = None,
    folds: int = 5,
    methods: Sequence[str] = METHODS,
    keep_errors: bool = True,
) -> McSummary:
    """Simulate each process ``runs`` times and fit every method at every configuration.

    Run ``i`` uses seed ``master_seed + i`` for all processes. Each cell holds
    the in-sample one-step reconstruction RMSE. When ``lambda_grid`` is given
    the Volterra lambda is chosen per run by CV at the configuration's
    ``(m, p)``; otherwise ``config.lambda_`` is used as is.
    """
    if runs < 1:
        raise InsufficientData(f"runs must be >= 1, got {runs}")
    methods = tuple(methods)
    names = [p.name for p in processes]
    if len(set(names)) != len(names):
        raise NonStationarySpec("process labels must be unique")

    def one_run(i: int):
        out = {}
        for proc in processes:
            series = generate(proc.with_seed(master_seed + i))
            for cfg in configs:
                for method in methods:
                    out[(proc.name, config_key(cfg), method)] = _run_method(method, series, cfg, lambda_grid, folds)
        return out

    per_run = parallel_map(one_run, range(runs))
    table, settings, errors = {}, {}, {}
    for proc in processes:
        for cfg in configs:
            for method in methods:
                key = (proc.name, config_key(cfg), method)
                fits = [r[key] for r in per_run]
                table[key] = [f.rmse if f is not None else math.nan for f in fits]
                settings[key] = [f.settings if f is not None else None for f in fits]
                if keep_errors:
                    errors[key] = [f.abs_errors if f is not None else None for f in fits]
    return McSummary(names, list(configs), methods, runs, master_seed, table, settings, errors)

"""Closed-loop Volterra series estimation with polynomial kernels.

A scalar time series is delay-embedded, regressed on its own past through a
kernel ridge model whose polynomial kernel spans all Volterra terms up to a
given order, and the fitted model is decomposed back into per-order Volterra
operators and coefficients. Model selection uses contiguous k-fold CV, and
competing models are compared with KSPA tests on their error samples.
"""

from .core import ModelConfig, TimeSeries, TrajectoryMatrix, embed, rmse, volterra_dimension
from .datasets import ingest_csv, load_bundled
from .errors import VolterraError
from .kernels import KernelFamily, KernelSpec, feature_map, gram, kernel_eval
from .kspa import ErrorSample, KspaResult, bonferroni, ecdf, kspa_one_sided, kspa_two_sided
from .selection import CvReport, SearchGrid, cross_validate, select_and_refit, split
from .simulation import ProcessSpec, fit_ar_baseline, generate, run_table1
from .solver import (
    VolterraModel,
    fit,
    fit_explicit,
    operator_contributions,
    predict,
    reconstruct,
    recover_coefficients,
    symmetric_coefficients,
)

__version__ = "0.1.0"

__all__ = [
    "CvReport", "ErrorSample", "KernelFamily", "KernelSpec", "KspaResult", "ModelConfig",
    "ProcessSpec", "SearchGrid", "TimeSeries", "TrajectoryMatrix", "VolterraError", "VolterraModel",
    "bonferroni", "cross_validate", "ecdf", "embed", "feature_map", "fit", "fit_ar_baseline",
    "fit_explicit", "generate", "gram", "ingest_csv", "load_bundled", "kernel_eval", "kspa_one_sided", "kspa_two_sided",
    "operator_contributions", "predict", "reconstruct", "recover_coefficients", "rmse",
    "run_table1", "select_and_refit", "split", "symmetric_coefficients", "volterra_dimension",
]

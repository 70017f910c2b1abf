"""Command line interface.

Subcommands: ``fit``, ``select``, ``kspa``, ``simulate`` and ``reproduce``.
Every command builds a :class:`~clvolterra.reporting.Report`; with ``--out``
the report is written as JSON plus CSV files, otherwise the JSON is printed.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 numerical
failure, 5 I/O error.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Optional

import numpy as np

from . import experiments
from .core import ModelConfig, embed, rmse
from .datasets import ingest_csv, load_series
from .errors import ConfigError, VolterraError
from .kernels import KernelFamily, KernelSpec
from .kspa import ErrorSample, bonferroni, kspa_one_sided, kspa_two_sided
from .reporting import Report, Table, atomic_write, columns_table, ecdf_table, histogram_table
from .selection import DEFAULT_LAMBDAS, SearchGrid, select_and_refit
from .simulation import ProcessSpec, p1, p2, p3, run_table1
from .solver import fit, operator_contributions, reconstruct

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_NUMERICAL = 4
EXIT_IO = 5

KERNEL_CHOICES = [f.value for f in KernelFamily]


@dataclass
class RunConfig:
    """Parameters of one CLI run; serializes to ``key = <json value>`` lines."""

    command: str = ""
    input: Optional[str] = None
    input2: Optional[str] = None
    memory: Optional[int] = None
    order: Optional[int] = None
    lambda_: Optional[float] = None
    kernel: str = "sum"
    sigma: Optional[float] = None
    scale: bool = False
    folds: int = 5
    train_fraction: float = 0.8
    lambdas: Optional[list] = None
    memories: Optional[list] = None
    orders: Optional[list] = None
    seed: int = 0
    runs: int = 100
    processes: Optional[list] = None
    p3_alternate: bool = False
    target: Optional[list] = None
    out: Optional[str] = None
    transform: str = "abs"
    family_size: Optional[int] = None

    def to_text(self) -> str:
        lines = []
        for f in fields(self):
            lines.append(f"{f.name} = {json.dumps(getattr(self, f.name))}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "RunConfig":
        known = {f.name for f in fields(cls)}
        values = {}
        for lineno, raw in enumerate(text.splitlines(), start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            key, sep, value = line.partition("=")
            key = key.strip()
            if not sep or key not in known:
                raise ConfigError(f"config line {lineno}: unrecognised entry {raw!r}")
            try:
                values[key] = json.loads(value.strip())
            except json.JSONDecodeError as exc:
                raise ConfigError(f"config line {lineno}: bad value for {key}: {exc}") from None
        return cls(**values)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


def _floats(text: str) -> list:
    return [float(v) for v in text.split(",") if v.strip()]


def _ints(text: str) -> list:
    out = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        if ".." in part:
            lo, hi = part.split("..")
            out.extend(range(int(lo), int(hi) + 1))
        else:
            out.append(int(part))
    return out


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="clvolterra", description="Closed-loop Volterra series estimation in an RKHS.")
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="read defaults from a key = value file")
    common.add_argument("--save-config", help="write the effective configuration to this file")
    common.add_argument("--out", help="output directory (default: print JSON)")
    common.add_argument("--seed", type=int)
    common.add_argument("--transform", choices=["abs", "sq"])
    common.add_argument("--family-size", type=int, help="Bonferroni family size")

    model = argparse.ArgumentParser(add_help=False)
    model.add_argument("--kernel", choices=KERNEL_CHOICES)
    model.add_argument("--sigma", type=float, help="Gaussian kernel width")
    model.add_argument("--scale", action="store_true", default=None, help="divide the series by its standard deviation before fitting")

    p = sub.add_parser("fit", parents=[common, model], help="fit one configuration")
    p.add_argument("input", nargs="?", help="CSV file or bundled name (death, nile)")
    p.add_argument("--memory", "-m", type=int)
    p.add_argument("--order", "-p", type=int)
    p.add_argument("--lambda", dest="lambda_", type=float)

    p = sub.add_parser("select", parents=[common, model], help="k-fold CV over (lambda, m, p)")
    p.add_argument("input", nargs="?")
    p.add_argument("--lambdas", type=_floats, help="comma-separated lambda grid")
    p.add_argument("--memories", type=_ints, help="e.g. 1..10")
    p.add_argument("--orders", type=_ints, help="e.g. 1..5")
    p.add_argument("--folds", type=int)
    p.add_argument("--train-fraction", type=float)

    p = sub.add_parser("kspa", parents=[common], help="compare two error files")
    p.add_argument("input", nargs="?", help="errors of model d1")
    p.add_argument("input2", nargs="?", help="errors of model d2")

    p = sub.add_parser("simulate", parents=[common], help="Monte-Carlo RMSE harness")
    p.add_argument("--processes", type=lambda s: [v.strip() for v in s.split(",") if v.strip()], help="subset of P1,P2,P3")
    p.add_argument("--runs", type=int)
    p.add_argument("--memory", "-m", type=int)
    p.add_argument("--order", "-p", type=int)
    p.add_argument("--lambda", dest="lambda_", type=float, help="fixed lambda (default: chosen by CV)")
    p.add_argument("--lambdas", type=_floats)
    p.add_argument("--folds", type=int)
    p.add_argument("--p3-alternate", action="store_true", default=None)

    p = sub.add_parser("reproduce", parents=[common], help="regenerate the tables and figure data")
    p.add_argument("--target", action="append", choices=list(experiments.TARGETS) + ["all"])
    p.add_argument("--runs", type=int)
    p.add_argument("--folds", type=int)
    p.add_argument("--p3-alternate", action="store_true", default=None)
    return parser


def resolve_config(args: argparse.Namespace) -> RunConfig:
    cfg = RunConfig()
    if getattr(args, "config", None):
        cfg = RunConfig.from_text(Path(args.config).read_text(encoding="utf-8"))
    cfg.command = args.command
    names = {f.name for f in fields(RunConfig)}
    for key, value in vars(args).items():
        if key in names and value is not None and key != "command":
            setattr(cfg, key, value)
    return cfg


def _grid(cfg: RunConfig) -> SearchGrid:
    kw = {"k": cfg.folds, "train_fraction": cfg.train_fraction}
    if cfg.lambdas:
        kw["lambdas"] = tuple(cfg.lambdas)
    if cfg.memories:
        kw["memories"] = tuple(cfg.memories)
    if cfg.orders:
        kw["orders"] = tuple(cfg.orders)
    if cfg.sigma is not None:
        kw["sigmas"] = (cfg.sigma,)
    return SearchGrid(**kw)


def _require(value, name: str):
    if value is None:
        raise ConfigError(f"missing required option {name}")
    return value


def cmd_fit(cfg: RunConfig) -> Report:
    series = load_series(_require(cfg.input, "input"))
    m = _require(cfg.memory, "--memory")
    family = KernelFamily.parse(cfg.kernel)
    order = cfg.order if cfg.order is not None else (0 if not family.is_polynomial else None)
    spec = KernelSpec.build(family, p=_require(order, "--order") if family.is_polynomial else None, sigma=cfg.sigma)
    lam = cfg.lambda_ if cfg.lambda_ is not None else 0.0
    tm = embed(series, m)
    model = fit(tm, spec, lam, scale=True if cfg.scale else None)
    fitted = reconstruct(model)
    t = np.arange(m + 1, len(series) + 1)
    recon = columns_table(["t", "actual", "fitted", "error"], t, tm.targets, fitted, tm.targets - fitted)
    tables = {"reconstruction": recon}
    results = {
        "series": series.label,
        "T": len(series),
        "N": tm.N,
        "rmse": rmse(tm.targets, fitted),
        "jitter": model.jitter,
        "scale": model.scale,
        "kernel": spec.to_dict(),
    }
    if family.is_polynomial:
        H = np.array([operator_contributions(model, x).contributions for x in tm.inputs])
        cols = ["t"] + [f"H{n}" for n in range(H.shape[1])]
        tables["operators"] = columns_table(cols, t, *H.T)
        results["operator_rms"] = [float(np.sqrt(np.mean(H[:, n] ** 2))) for n in range(H.shape[1])]
    return Report("fit", cfg.to_dict(), results, tables)


def cmd_select(cfg: RunConfig) -> Report:
    series = load_series(_require(cfg.input, "input"))
    grid = _grid(cfg)
    model, report = select_and_refit(series, grid, cfg.kernel, scale=True if cfg.scale else None)
    rows = [[c.config.m, c.config.p, c.config.lambda_, c.spec.sigma, c.mean_rmse] + list(c.fold_rmse) for c in report.candidates]
    table = Table(["m", "p", "lambda", "sigma", "mean_rmse"] + [f"fold{i + 1}" for i in range(grid.k)], rows)
    return Report("select", {**cfg.to_dict(), "grid": grid.to_dict()}, {"cv": report.to_dict()}, {"cv_trace": table})


def cmd_kspa(cfg: RunConfig) -> Report:
    a = ingest_csv(_require(cfg.input, "input"))
    b = ingest_csv(_require(cfg.input2, "input2"))
    transform = cfg.transform
    to_err = (lambda v: np.abs(v)) if transform == "abs" else (lambda v: v * v)
    e1 = ErrorSample(to_err(a.values), transform, a.label or "d1")
    e2 = ErrorSample(to_err(b.values), transform, b.label or "d2")
    results = [kspa_two_sided(e1, e2).to_dict(), kspa_one_sided(e1, e2).to_dict()]
    family = cfg.family_size or len(results)
    for r, adj in zip(results, bonferroni([r["p_value"] for r in results], family)):
        r["adjusted_p"] = adj
    table = Table(["direction", "statistic", "p_value", "adjusted_p", "method", "n1", "n2"],
                  [[r["direction"], r["statistic"], r["p_value"], r["adjusted_p"], r["method"], r["n1"], r["n2"]] for r in results])
    plots = {
        "ecdf_d1": ecdf_table(e1.values), "ecdf_d2": ecdf_table(e2.values),
        "hist_d1": histogram_table(e1.values), "hist_d2": histogram_table(e2.values),
    }
    return Report("kspa", cfg.to_dict(), {"tests": results, "family_size": family}, {"kspa": table}, plots)


_PROCESS_FACTORIES = {"P1": p1, "P2": p2, "P3": p3}


def cmd_simulate(cfg: RunConfig) -> Report:
    names = cfg.processes or ["P1", "P2", "P3"]
    procs: list[ProcessSpec] = []
    for name in names:
        key = name.upper()
        if key not in _PROCESS_FACTORIES:
            raise ConfigError(f"unknown process {name!r}; choose from P1, P2, P3")
        procs.append(p3(alternate=cfg.p3_alternate) if key == "P3" else _PROCESS_FACTORIES[key]())
    config = ModelConfig(cfg.memory or 8, cfg.order if cfg.order is not None else 3, cfg.lambda_ or 0.0)
    grid = None if cfg.lambda_ is not None else tuple(cfg.lambdas or DEFAULT_LAMBDAS)
    summary = run_table1(procs, [config], cfg.runs, cfg.seed, lambda_grid=grid, folds=cfg.folds)
    rows = [[proc, config.p, config.m] + [summary.mean(proc, config, m) for m in summary.methods] for proc in summary.processes]
    table = Table(["process", "p", "m"] + list(summary.methods), rows)
    return Report("simulate", cfg.to_dict(), {"summary": summary.to_dict()}, {"simulate": table})


def cmd_reproduce(cfg: RunConfig) -> list[Report]:
    targets = cfg.target or ["all"]
    return experiments.reproduce(targets, runs=cfg.runs, seed=cfg.seed, transform=cfg.transform,
                                 family_size=cfg.family_size, folds=cfg.folds, p3_alternate=cfg.p3_alternate)


COMMANDS = {"fit": cmd_fit, "select": cmd_select, "kspa": cmd_kspa, "simulate": cmd_simulate, "reproduce": cmd_reproduce}


def run(argv=None, stdout=None) -> int:
    stdout = stdout or sys.stdout
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0) and EXIT_CONFIG
    try:
        cfg = resolve_config(args)
        if getattr(args, "save_config", None):
            atomic_write(Path(args.save_config), cfg.to_text())
        result = COMMANDS[cfg.command](cfg)
        reports = result if isinstance(result, list) else [result]
        if cfg.out:
            for rep in reports:
                rep.write(cfg.out)
            print(f"wrote {len(reports)} report(s) to {cfg.out}", file=stdout)
        else:
            for rep in reports:
                stdout.write(rep.to_json())
        return EXIT_OK
    except VolterraError as exc:
        print(f"clvolterra: error: {exc}", file=sys.stderr)
        return exc.exit_code
    except (TypeError, ValueError) as exc:
        print(f"clvolterra: error: invalid configuration: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"clvolterra: error: {exc}", file=sys.stderr)
        return EXIT_IO


def main(argv=None) -> None:
    sys.exit(run(argv))


if __name__ == "__main__":
    main()

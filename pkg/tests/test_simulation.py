import math

import numpy as np
import pytest
import scipy.signal

from clvolterra.core import ModelConfig, rmse
from clvolterra.errors import InsufficientData, NonStationarySpec, SingularSystem
from clvolterra.simulation import (
    AR_OLS,
    GAUSSIAN_RIDGE,
    VOLTERRA,
    ProcessKind,
    ProcessSpec,
    ar_fit,
    fit_ar_baseline,
    gaussian_ridge_fit,
    generate,
    p1,
    p2,
    p3,
    run_table1,
    standard_normals,
    volterra_fit,
)


def lfilter_oracle(spec):
    """Same recursion through scipy's IIR filter, starting from zero state."""
    e = spec.noise_sd * standard_normals(spec.seed, spec.burn_in + spec.length)
    a = np.concatenate([[1.0], -np.asarray(spec.ar_coefficients)]) if spec.ar_coefficients else [1.0]
    b = [1.0, spec.ma_coefficient]
    return scipy.signal.lfilter(b, a, e)[spec.burn_in:]


class TestNoise:
    def test_deterministic(self):
        assert np.array_equal(standard_normals(3, 101), standard_normals(3, 101))
        assert not np.array_equal(standard_normals(3, 10), standard_normals(4, 10))

    def test_prefix_stable(self):
        assert np.array_equal(standard_normals(5, 7), standard_normals(5, 8)[:7])

    def test_moments(self):
        z = standard_normals(0, 200_000)
        assert abs(z.mean()) < 0.01
        assert abs(z.std() - 1) < 0.01
        assert abs(np.mean(z**4) - 3) < 0.06


class TestProcesses:
    @pytest.mark.parametrize("factory", [p1, p2, p3, lambda **kw: p3(alternate=True, **kw)])
    def test_matches_lfilter(self, factory):
        spec = factory(seed=17, length=150)
        assert np.allclose(generate(spec).values, lfilter_oracle(spec), rtol=1e-12, atol=1e-12)

    def test_coefficients(self):
        assert p1().ar_coefficients == (0.5,) and p1().ma_coefficient == 0.0
        assert p2().ar_coefficients == () and p2().ma_coefficient == -0.9
        assert p3().ar_coefficients == pytest.approx((0.1,)) and p3().ma_coefficient == -0.8
        assert p3(alternate=True).ar_coefficients == (1.0, -0.9)

    def test_first_values_by_hand(self):
        spec = p1(seed=1, burn_in=0, length=3)
        e = standard_normals(1, 3)
        y = generate(spec).values
        assert y[0] == e[0]
        assert y[1] == pytest.approx(0.5 * e[0] + e[1])
        assert y[2] == pytest.approx(0.5 * y[1] + e[2])

    def test_non_stationary(self):
        with pytest.raises(NonStationarySpec):
            ProcessSpec(ProcessKind.AR1, phi=1.0)
        with pytest.raises(NonStationarySpec):
            ProcessSpec(ProcessKind.AR1, phi=-1.2)

    def test_length_validation(self):
        with pytest.raises(InsufficientData):
            p1(length=0)

    def test_ar1_mean_sanity(self):
        y = generate(p1(length=5000, seed=8)).values
        sd = np.std(y, ddof=1)
        assert abs(y.mean()) <= 4 * sd / math.sqrt(5000)
        assert sd == pytest.approx(1 / math.sqrt(0.75), rel=0.05)

    def test_ma1_autocorrelation(self):
        y = generate(p2(length=20000, seed=9)).values
        r1 = np.corrcoef(y[:-1], y[1:])[0, 1]
        assert r1 == pytest.approx(-0.9 / 1.81, abs=0.02)

    def test_seed_reproducible(self):
        assert np.array_equal(generate(p3(seed=4)).values, generate(p3(seed=4)).values)
        assert not np.array_equal(generate(p3(seed=4)).values, generate(p3(seed=5)).values)


class TestArBaseline:
    def test_recovers_coefficients(self):
        base = fit_ar_baseline(generate(p1(length=5000, seed=2)), 2)
        assert base.coefficients[0] == pytest.approx(0.5, abs=0.05)
        assert base.coefficients[1] == pytest.approx(0.0, abs=0.05)
        assert abs(base.intercept) < 0.1

    def test_matches_lstsq_oracle(self, rng):
        y = rng.normal(size=40)
        base = fit_ar_baseline(y, 3)
        rows = np.array([[1.0, y[t - 1], y[t - 2], y[t - 3]] for t in range(3, 40)])
        beta = np.linalg.solve(rows.T @ rows, rows.T @ y[3:])
        assert np.allclose(base.coefficients, beta[1:], atol=1e-10)
        assert base.intercept == pytest.approx(beta[0], abs=1e-10)
        assert base.rmse == pytest.approx(rmse(y[3:], rows @ beta), rel=1e-10)

    def test_constant_series_singular(self):
        with pytest.raises(SingularSystem):
            fit_ar_baseline(np.ones(20), 1)

    def test_too_short(self):
        with pytest.raises(InsufficientData):
            fit_ar_baseline([1.0, 2.0, 3.0], 2)


class TestMethods:
    def test_volterra_fixed_and_cv(self):
        series = generate(p1(seed=3))
        fixed = volterra_fit(series, ModelConfig(3, 2, 1e-2))
        assert fixed.settings["lambda"] == 1e-2
        chosen = volterra_fit(series, ModelConfig(3, 2), lambda_grid=(1e-4, 1.0))
        assert chosen.settings["lambda"] in (1e-4, 1.0)
        assert fixed.method == VOLTERRA and fixed.targets.size == 97

    def test_gaussian_and_ar(self):
        series = generate(p2(seed=6))
        g = gaussian_ridge_fit(series, 2)
        a = ar_fit(series, 2)
        assert g.method == GAUSSIAN_RIDGE and a.method == AR_OLS
        assert np.array_equal(g.targets, a.targets)
        assert g.settings["sigma"] > 0


class TestRunTable1:
    def test_small_harness(self):
        procs = [p1(length=60), p2(length=60)]
        cfgs = [ModelConfig(2, 2)]
        s = run_table1(procs, cfgs, 4, master_seed=10, lambda_grid=(1e-6, 1e-2))
        for proc in ("P1", "P2"):
            for method in (VOLTERRA, GAUSSIAN_RIDGE, AR_OLS):
                vals = s.rmse[(proc, "m=2,p=2", method)]
                assert len(vals) == 4
                assert s.mean(procs[0].name if proc == "P1" else "P2", cfgs[0], method) == pytest.approx(np.mean(vals))
        # run i uses seed master + i
        direct = ar_fit(generate(p1(length=60, seed=12)), 2).rmse
        assert s.rmse[("P1", "m=2,p=2", AR_OLS)][2] == pytest.approx(direct, rel=1e-14)
        assert s.pooled_errors("P1", cfgs[0], AR_OLS).size == 4 * 58

    def test_bit_reproducible(self):
        args = ([p1(length=40)], [ModelConfig(2, 1, 1e-3)], 3)
        a = run_table1(*args, master_seed=1).to_dict()
        b = run_table1(*args, master_seed=1).to_dict()
        assert a == b

    def test_thread_count_does_not_matter(self, monkeypatch):
        args = ([p1(length=40)], [ModelConfig(2, 1, 1e-3)], 4)
        monkeypatch.setenv("VOLTERRA_THREADS", "1")
        serial = run_table1(*args).to_dict()
        monkeypatch.setenv("VOLTERRA_THREADS", "4")
        assert run_table1(*args).to_dict() == serial

    def test_failed_cell_is_nan(self):
        # AR baseline on a constant series fails; the cell turns into nan
        procs = [ProcessSpec(ProcessKind.AR1, phi=0.0, noise_sd=0.0, length=30, label="flat")]
        s = run_table1(procs, [ModelConfig(1, 1, 1e-3)], 2, methods=(AR_OLS,))
        assert all(math.isnan(v) for v in s.rmse[("flat", "m=1,p=1", AR_OLS)])
        assert math.isnan(s.mean("flat", ModelConfig(1, 1, 1e-3), AR_OLS))
        assert s.to_dict()["cells"][0]["failed_runs"] == 2

    def test_noise_free_ar1(self):
        procs = [ProcessSpec(ProcessKind.AR1, phi=0.5, noise_sd=0.0, length=30, initial=1.0, burn_in=0, label="det")]
        s = run_table1(procs, [ModelConfig(1, 1, 0.0)], 1, methods=(VOLTERRA,))
        assert s.rmse[("det", "m=1,p=1", VOLTERRA)][0] < 1e-8

    def test_zero_runs(self):
        with pytest.raises(InsufficientData):
            run_table1([p1()], [ModelConfig(1, 1)], 0)


@pytest.mark.slow
def test_capacity_dominance():
    procs = [p1(), p2(), p3()]
    cfg = ModelConfig(10, 5, 1e-8)
    s = run_table1(procs, [cfg], 5, master_seed=0, methods=(VOLTERRA, AR_OLS), keep_errors=False)
    for proc in ("P1", "P2", "P3"):
        for v, a in zip(s.rmse[(proc, "m=10,p=5", VOLTERRA)], s.rmse[(proc, "m=10,p=5", AR_OLS)]):
            assert v <= a

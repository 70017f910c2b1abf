import numpy as np
import pytest

from clvolterra.core import TrajectoryMatrix, embed
from clvolterra.datasets import load_bundled
from clvolterra.errors import DimensionMismatch, FeatureSpaceTooLarge, InvalidOrder, SingularSystem, UnsupportedKernel
from clvolterra.kernels import KernelSpec, feature_matrix, gram
from clvolterra.simulation import generate, p1
from clvolterra.solver import (
    fit,
    fit_explicit,
    operator_contributions,
    predict,
    predict_many,
    recover_coefficients,
    reconstruct,
    residual_norm,
    rollout,
    symmetric_coefficients,
)

from conftest import random_problem


def gauss_solve(A, b):
    """Gauss-Jordan elimination with partial pivoting, pure Python loops."""
    n = len(b)
    M = [list(map(float, A[i])) + [float(b[i])] for i in range(n)]
    for c in range(n):
        piv = max(range(c, n), key=lambda r: abs(M[r][c]))
        M[c], M[piv] = M[piv], M[c]
        for r in range(n):
            if r != c:
                f = M[r][c] / M[c][c]
                M[r] = [a - f * b_ for a, b_ in zip(M[r], M[c])]
    return np.array([M[i][n] / M[i][i] for i in range(n)])


def single_point():
    return fit(TrajectoryMatrix([[1.0]], [4.0]), KernelSpec.sum_polynomial(1))


class TestFit:
    def test_single_point(self):
        model = single_point()
        assert model.gamma.tolist() == [2.0]
        assert predict(model, [1.0]) == 4.0

    def test_gauss_oracle(self, rng):
        X = rng.uniform(-1, 1, size=(5, 2))
        y = rng.normal(size=5)
        spec = KernelSpec.sum_polynomial(2)
        model = fit(TrajectoryMatrix(X, y), spec, 0.1)
        K = gram(spec, X).entries
        expected = gauss_solve(K + 0.1 * np.eye(5), y)
        assert np.allclose(model.gamma, expected, rtol=1e-8, atol=1e-12)

    def test_residual_invariant(self, rng):
        X = rng.uniform(-1, 1, size=(30, 3))
        y = rng.normal(size=30)
        model = fit(TrajectoryMatrix(X, y), KernelSpec.sum_polynomial(3), 1e-3)
        A = gram(model.spec, X).entries + 1e-3 * np.eye(30)
        assert np.linalg.norm(A @ model.gamma - y) <= 1e-8 * np.linalg.norm(y)
        assert residual_norm(model) >= 0

    def test_large_lambda_limit(self, rng):
        X = rng.uniform(-1, 1, size=(6, 2))
        y = rng.normal(size=6)
        model = fit(TrajectoryMatrix(X, y), KernelSpec.sum_polynomial(2), 1e12)
        assert np.allclose(model.gamma, y / 1e12, rtol=1e-9)
        assert np.max(np.abs(predict_many(model, X))) < 1e-9

    def test_duplicate_rows_conflicting_targets(self):
        tm = TrajectoryMatrix([[0.5], [0.5]], [1.0, 3.0])
        model = fit(tm, KernelSpec.sum_polynomial(2), 0.1)
        value = predict(model, [0.5])
        assert np.isfinite(value) and 1.0 < value < 3.0

    def test_duplicate_rows_jitter(self):
        tm = TrajectoryMatrix([[0.5], [0.5]], [2.0, 2.0])
        model = fit(tm, KernelSpec.sum_polynomial(1), 0.0)
        assert model.jitter > 0
        assert predict(model, [0.5]) == pytest.approx(2.0, rel=1e-5)

    def test_model_immutable(self):
        model = single_point()
        with pytest.raises(ValueError):
            model.gamma[0] = 1.0
        with pytest.raises(Exception):
            model.spec = None

    def test_gaussian_far_away_vanishes(self, rng):
        X = rng.uniform(-1, 1, size=(10, 2))
        model = fit(TrajectoryMatrix(X, rng.normal(size=10)), KernelSpec.gaussian(0.5), 1e-3)
        assert abs(predict(model, [50.0, 50.0])) < 1e-12

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatch):
            predict(single_point(), [1.0, 2.0])

    def test_singular_after_jitter(self):
        from clvolterra.solver import _solve_spd

        with pytest.raises(SingularSystem):
            _solve_spd(np.array([[1.0, 0.0], [0.0, -1.0]]), np.ones(2), allow_jitter=True)

    def test_interpolation(self, rng):
        X = rng.uniform(-1, 1, size=(12, 3))
        y = rng.normal(size=12)
        model = fit(TrajectoryMatrix(X, y), KernelSpec.sum_polynomial(3))
        assert np.sqrt(np.mean((reconstruct(model) - y) ** 2)) <= 1e-6 * np.std(y, ddof=1)

    def test_scaling_reports_original_units(self):
        series = load_bundled("nile")
        tm = embed(series, 3)
        plain = fit(tm, KernelSpec.sum_polynomial(2), 1e-2, scale=True)
        assert plain.scale == pytest.approx(series.sd)
        recon = reconstruct(plain)
        assert abs(np.mean(recon) - np.mean(tm.targets)) < 0.2 * series.sd

    def test_death_interpolation(self):
        series = load_bundled("death")
        model = fit(embed(series, 10), KernelSpec.sum_polynomial(5), 0.0)
        err = reconstruct(model) - embed(series, 10).targets
        assert np.sqrt(np.mean(err**2)) / series.sd < 1e-4

    def test_rollout(self):
        model = single_point()
        # y_t = 2 + 2 y_{t-1} fed back from 1
        assert rollout(model, [1.0], 2).tolist() == [4.0, 10.0]


class TestOperators:
    def test_single_point_decomposition(self):
        model = single_point()
        dec = operator_contributions(model, [3.0])
        assert dec.contributions.tolist() == [2.0, 6.0]
        assert operator_contributions(model, [1.0]).total == 4.0
        assert recover_coefficients(model, 1).tolist() == [2.0]
        assert recover_coefficients(model, 0).tolist() == [2.0]

    def test_order_zero_model(self, rng):
        X = rng.normal(size=(4, 2))
        model = fit(TrajectoryMatrix(X, rng.normal(size=4)), KernelSpec.sum_polynomial(0), 0.5)
        x = rng.normal(size=2)
        assert operator_contributions(model, x).contributions[0] == pytest.approx(predict(model, x))

    @pytest.mark.parametrize("spec", [KernelSpec.sum_polynomial(3), KernelSpec.inhomogeneous(3)])
    @pytest.mark.parametrize("scale", [None, 2.5])
    def test_sum_equals_prediction_and_eta(self, rng, spec, scale):
        X = rng.uniform(-1, 1, size=(15, 3))
        model = fit(TrajectoryMatrix(X, rng.normal(size=15)), spec, 1e-2, scale=scale)
        etas = [recover_coefficients(model, n) for n in range(4)]
        for x in rng.uniform(-1, 1, size=(100, 3)):
            dec = operator_contributions(model, x)
            assert dec.total == pytest.approx(predict(model, x), rel=1e-8, abs=1e-10)
            for n in range(4):
                block = feature_matrix(x[None, :], n)[0][-3**n:]
                assert etas[n] @ block == pytest.approx(dec.contributions[n], rel=1e-8, abs=1e-10)

    def test_symmetric_coefficients_recover_map(self, rng):
        # y_t = 0.3 + 0.5 y_{t-1} - 0.2 y_{t-1} y_{t-2}, noise free
        y = list(rng.uniform(-0.5, 0.5, 2))
        for _ in range(60):
            y.append(0.3 + 0.5 * y[-1] - 0.2 * y[-1] * y[-2] + 0.1 * np.sin(len(y)))
        tm = embed(y, 2)
        y_true = [0.3 + 0.5 * a - 0.2 * a * b for b, a in tm.inputs]
        tm = type(tm)(tm.inputs, np.array(y_true))
        model = fit(tm, KernelSpec.sum_polynomial(2), 1e-10)
        h2 = symmetric_coefficients(model, 2)
        assert set(h2) == {(1, 1), (1, 2), (2, 2)}
        assert h2[(1, 2)] == pytest.approx(-0.2, abs=1e-4)
        assert h2[(1, 1)] == pytest.approx(0.0, abs=1e-4)
        assert h2[(2, 2)] == pytest.approx(0.0, abs=1e-4)
        h1 = symmetric_coefficients(model, 1)
        assert h1[(1,)] == pytest.approx(0.5, abs=1e-4)
        assert h1[(2,)] == pytest.approx(0.0, abs=1e-4)
        assert symmetric_coefficients(model, 0)[()] == pytest.approx(0.3, abs=1e-4)

    def test_unsupported_kernel(self, rng):
        model = fit(TrajectoryMatrix(rng.normal(size=(3, 1)), rng.normal(size=3)), KernelSpec.gaussian(1.0), 0.1)
        with pytest.raises(UnsupportedKernel):
            operator_contributions(model, [0.0])
        with pytest.raises(UnsupportedKernel):
            recover_coefficients(model, 1)

    def test_order_out_of_range(self):
        with pytest.raises(InvalidOrder):
            recover_coefficients(single_point(), 2)


class TestExplicit:
    def test_linear_recovery(self):
        x = np.linspace(-1, 1, 7)
        tm = TrajectoryMatrix(x[:, None], 0.5 * x)
        assert np.allclose(fit_explicit(tm, 1).coefficients, [0.0, 0.5], atol=1e-14)

    def test_feature_budget(self):
        with pytest.raises(FeatureSpaceTooLarge):
            fit_explicit(TrajectoryMatrix(np.ones((2, 10)), np.ones(2)), 5)

    def test_zero_order_constant(self):
        ex = fit_explicit(TrajectoryMatrix(np.zeros((3, 1)), np.array([1.0, 2.0, 3.0])), 0)
        assert ex.coefficients.tolist() == pytest.approx([2.0])

    def test_ridge_matches_dual(self, rng):
        X = rng.uniform(-1, 1, size=(25, 2))
        y = rng.normal(size=25)
        tm = TrajectoryMatrix(X, y)
        dual = fit(tm, KernelSpec.sum_polynomial(3), 0.05)
        primal = fit_explicit(tm, 3, 0.05)
        Q = rng.uniform(-1, 1, size=(10, 2))
        assert np.allclose(predict_many(dual, Q), primal.predict_many(Q), rtol=1e-8, atol=1e-10)


def test_dual_primal_equivalence(rng):
    for _ in range(50):
        tm, p = random_problem(rng)
        dual = reconstruct(fit(tm, KernelSpec.sum_polynomial(p), 0.0))
        primal = fit_explicit(tm, p).predict_many(tm.inputs)
        scale = max(1.0, np.max(np.abs(primal)))
        assert np.max(np.abs(dual - primal)) <= 1e-7 * scale


def test_orthogonality(rng):
    for _ in range(50):
        tm, p = random_problem(rng, max_n=60)
        ex = fit_explicit(tm, p)
        Phi = feature_matrix(tm.inputs, p)
        r = tm.targets - Phi @ ex.coefficients
        assert np.linalg.norm(Phi.T @ r) <= 1e-7 * np.linalg.norm(tm.targets)


def test_unbiasedness():
    rng = np.random.default_rng(7)
    m, p, N = 2, 2, 40
    X = rng.uniform(-1, 1, size=(N, m))
    Phi = feature_matrix(X, p)
    # symmetric true coefficients: ordered pair (1,2) and (2,1) share the weight
    E = np.array([0.2, -0.4, 0.7, 0.3, 0.25, 0.25, -0.5])
    trials = np.array([
        fit_explicit(TrajectoryMatrix(X, Phi @ E + 0.3 * rng.normal(size=N)), p).coefficients
        for _ in range(500)
    ])
    se = trials.std(axis=0, ddof=1) / np.sqrt(500)
    assert np.all(np.abs(trials.mean(axis=0) - E) <= 3 * se + 1e-12)


def test_consistency_trend():
    # AR(1) with phi = 0.5 as a memory-2, order-2 map: only the lag-1 linear term is nonzero
    E = np.zeros(7)
    E[2] = 0.5
    medians = []
    for N in (50, 200, 800):
        errs = []
        for rep in range(20):
            series = generate(p1(length=N + 2, seed=1000 * N + rep))
            ex = fit_explicit(embed(series, 2), 2)
            errs.append(np.linalg.norm(ex.coefficients - E))
        medians.append(np.median(errs))
    assert medians[0] >= medians[1] >= medians[2]


def test_linear_in_targets(rng):
    X = rng.uniform(-1, 1, size=(12, 2))
    y1, y2 = rng.normal(size=12), rng.normal(size=12)
    a, b = 1.7, -0.6
    spec = KernelSpec.sum_polynomial(2)
    Q = rng.uniform(-1, 1, size=(8, 2))
    combo = predict_many(fit(TrajectoryMatrix(X, a * y1 + b * y2), spec, 0.1), Q)
    parts = a * predict_many(fit(TrajectoryMatrix(X, y1), spec, 0.1), Q) + b * predict_many(fit(TrajectoryMatrix(X, y2), spec, 0.1), Q)
    assert np.allclose(combo, parts, rtol=1e-10, atol=1e-12)

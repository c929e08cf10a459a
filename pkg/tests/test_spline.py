import dataclasses

import numpy as np
import pytest
from scipy.integrate import simpson
from sklearn.base import clone

from amimpute.exceptions import DataError, DegenerateBasisError, NumericalError
from amimpute.spline import (
    DEFAULT_LAMBDA_GRID,
    PenalizedSystem,
    SmoothingSpline,
    build_basis,
    fit_pls,
    gcv_select,
    pls_objective,
    predict_spline,
)


@pytest.fixture(scope="module")
def noisy_sine():
    rng = np.random.default_rng(42)
    x = rng.random(500)
    y = np.sin(4 * np.pi * x) + rng.normal(0, 0.1, 500)
    return x, y


def _simpson_curvature(basis, coefficients, panels=32):
    """Independent integral of the squared second derivative.

    Simpson panels are aligned with the knots, so the piecewise-quadratic
    integrand is integrated essentially exactly.
    """
    total = 0.0
    for a, b in zip(basis.knots[:-1], basis.knots[1:]):
        grid = np.linspace(a, b, panels + 1)
        d2 = basis.second_derivative_matrix(grid) @ coefficients
        total += simpson(d2**2, x=grid)
    return total


# Basis construction ----------------------------------------------------------


def test_minimal_basis_spans_cubics():
    # size 4 leaves no interior knots: the basis is all cubics on [0,1],
    # whose curvature penalty vanishes exactly on {1, t}
    x = np.linspace(0, 1, 25)
    basis = build_basis(x, 4)
    assert basis.size == 4
    assert np.array_equal(basis.knots, [0.0, 1.0])
    eigs = np.linalg.eigvalsh(basis.penalty)
    assert (eigs < 1e-10 * max(eigs.max(), 1.0)).sum() == 2


def test_penalty_null_space_is_constant_and_linear():
    rng = np.random.default_rng(1)
    basis = build_basis(rng.random(200), 12)
    ones = np.ones(basis.size)
    t = basis.padded_knots
    greville = np.array(
        [t[k + 1 : k + 4].mean() for k in range(basis.size)]
    )
    scale = np.abs(basis.penalty).max()
    assert np.abs(basis.penalty @ ones).max() < 1e-10 * scale
    assert np.abs(basis.penalty @ greville).max() < 1e-10 * scale


def test_penalty_matches_dense_numerical_integration():
    rng = np.random.default_rng(2)
    basis = build_basis(rng.random(300), 10)
    K = basis.size
    numeric = np.zeros((K, K))
    for a, b in zip(basis.knots[:-1], basis.knots[1:]):
        grid = np.linspace(a, b, 33)
        d2 = basis.second_derivative_matrix(grid)
        numeric += simpson(d2[:, :, None] * d2[:, None, :], x=grid, axis=0)
    assert np.abs(numeric - basis.penalty).max() < 1e-8


def test_partition_of_unity():
    rng = np.random.default_rng(3)
    basis = build_basis(rng.random(100), 8)
    pts = np.array([0.0, 0.123, 0.5, 0.999, 1.0])
    assert np.allclose(basis.design_matrix(pts).sum(axis=1), 1.0, atol=1e-12)


def test_basis_size_reduced_to_distinct_values():
    x = np.array([0.0, 0.2, 0.4, 0.6, 0.8, 1.0] * 10)
    basis = build_basis(x, 10)
    assert basis.size == 6


def test_too_few_distinct_values():
    with pytest.raises(DegenerateBasisError):
        build_basis(np.array([0.0, 0.5, 1.0] * 5), 10)


def test_basis_size_below_four_rejected():
    with pytest.raises(DataError):
        build_basis(np.linspace(0, 1, 20), 3)


# Penalized fitting -----------------------------------------------------------


def test_linear_data_zero_residual_for_any_lambda():
    rng = np.random.default_rng(4)
    x = rng.random(120)
    y = 1.5 - 2.0 * x
    basis = build_basis(x, 10)
    for lam in [0.0, 1e-4, 1.0, 1e10]:
        fit = fit_pls(basis, x, y, lam=lam)
        assert np.abs(predict_spline(fit, x) - y).max() < 1e-9


def test_huge_lambda_matches_weighted_least_squares():
    rng = np.random.default_rng(5)
    n = 250
    x = rng.random(n)
    y = np.sin(2 * np.pi * x) + rng.normal(0, 0.3, n)
    w = rng.uniform(0.5, 4.0, n)
    basis = build_basis(x, 12)
    fit = fit_pls(basis, x, y, weights=w, lam=1e10)
    Z = np.column_stack([np.ones(n), x])
    beta = np.linalg.solve(Z.T @ (w[:, None] * Z), Z.T @ (w * y))
    assert np.abs(predict_spline(fit, x) - Z @ beta).max() < 1e-5


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_constant_weights_equal_unweighted(seed):
    rng = np.random.default_rng(seed)
    x = rng.random(80)
    y = rng.normal(0, 1, 80)
    basis = build_basis(x, 9)
    unweighted = fit_pls(basis, x, y, lam=0.37)
    for c in [0.2, 1.0, 31.0]:
        weighted = fit_pls(basis, x, y, weights=np.full(80, c), lam=0.37)
        scale = np.abs(unweighted.coefficients).max()
        assert np.abs(weighted.coefficients - unweighted.coefficients).max() < 1e-12 * scale


def test_fit_requires_two_points():
    basis = build_basis(np.linspace(0, 1, 10), 6)
    with pytest.raises(DataError):
        fit_pls(basis, np.array([0.5]), np.array([1.0]), lam=1.0)


# GCV selection ---------------------------------------------------------------


def test_gcv_tie_break_on_exact_fit_takes_largest_lambda():
    rng = np.random.default_rng(6)
    x = rng.random(100)
    y = 0.25 + 0.5 * x  # in the penalty null space: RSS ~ 0 at every lambda
    fit = gcv_select(build_basis(x, 10), x, y)
    assert fit.lam == DEFAULT_LAMBDA_GRID.max()
    assert fit.gcv_score == 0.0


def test_gcv_selects_interior_lambda(noisy_sine):
    x, y = noisy_sine
    fit = gcv_select(build_basis(x, 20), x, y)
    assert DEFAULT_LAMBDA_GRID.min() < fit.lam < DEFAULT_LAMBDA_GRID.max()


def test_gcv_matches_dense_eigendecomposition_oracle(noisy_sine):
    x, y = noisy_sine
    rng = np.random.default_rng(7)
    w = rng.uniform(0.5, 2.0, len(x))
    basis = build_basis(x, 10)
    system = PenalizedSystem(basis, x, w)
    wn = w / w.sum()
    B = basis.design_matrix(x)
    M = B.T @ (wn[:, None] * B)
    n = len(x)
    for lam in 10.0 ** rng.uniform(-6, 3, 5):
        fit = system.fit_lambda(y, lam)
        evals, evecs = np.linalg.eigh(M + lam * basis.penalty)
        hat = B @ ((evecs / evals) @ evecs.T) @ (B * wn[:, None]).T
        edf = float(np.trace(hat))
        rss = float(wn @ (y - hat @ y) ** 2)
        oracle = n * rss / (n - edf) ** 2
        assert fit.gcv_score == pytest.approx(oracle, rel=1e-8)
        assert fit.edf == pytest.approx(edf, rel=1e-7)


def test_gcv_empty_grid_rejected(noisy_sine):
    x, y = noisy_sine
    with pytest.raises(DataError):
        gcv_select(build_basis(x, 10), x, y, lambda_grid=[])


def test_gcv_strict_guard_when_edf_reaches_n():
    x = np.linspace(0, 1, 8)
    y = np.sin(x)
    basis = build_basis(x, 8)
    with pytest.raises(NumericalError):
        gcv_select(basis, x, y, lambda_grid=[0.0])


# Prediction ------------------------------------------------------------------


def test_square_system_interpolates():
    rng = np.random.default_rng(8)
    x = np.linspace(0, 1, 10)
    y = rng.normal(0, 1, 10)
    fit = fit_pls(build_basis(x, 10), x, y, lam=0.0)
    assert np.abs(predict_spline(fit, x) - y).max() < 1e-8


def test_constant_data_constant_prediction():
    rng = np.random.default_rng(9)
    x = rng.random(60)
    fit = gcv_select(build_basis(x, 8), x, np.full(60, 3.25))
    preds = predict_spline(fit, np.linspace(0, 1, 50))
    assert np.abs(preds - 3.25).max() < 1e-8


def test_out_of_range_prediction_clamps():
    rng = np.random.default_rng(10)
    x = rng.random(100)
    fit = gcv_select(build_basis(x, 10), x, np.sin(3 * x))
    assert predict_spline(fit, [1.2])[0] == predict_spline(fit, [1.0])[0]
    assert predict_spline(fit, [-0.4])[0] == predict_spline(fit, [0.0])[0]


# Invariants ------------------------------------------------------------------


def test_edf_monotone_and_limits(noisy_sine):
    x, y = noisy_sine
    system = PenalizedSystem(build_basis(x, 10), x)
    edfs = np.array([system.fit_lambda(y, lam).edf for lam in DEFAULT_LAMBDA_GRID])
    assert np.all(np.diff(edfs) <= 1e-10)
    assert np.all(edfs >= 2.0 - 1e-10)  # penalty null space survives
    assert np.all(edfs <= 10.0 + 1e-8)
    assert system.fit_lambda(y, 1e12).edf == pytest.approx(2.0, abs=1e-4)


def test_objective_local_minimum(noisy_sine):
    x, y = noisy_sine
    rng = np.random.default_rng(11)
    w = rng.uniform(0.5, 2.0, len(x))
    fit = gcv_select(build_basis(x, 10), x, y, weights=w)
    base = pls_objective(fit, x, y, w)
    for k in range(len(fit.coefficients)):
        for sign in (1.0, -1.0):
            coef = fit.coefficients.copy()
            coef[k] += sign * 1e-4
            perturbed = dataclasses.replace(fit, coefficients=coef)
            assert pls_objective(perturbed, x, y, w) >= base - 1e-12 * (1 + abs(base))


def test_penalty_quadratic_form_matches_integral(noisy_sine):
    x, y = noisy_sine
    fit = gcv_select(build_basis(x, 10), x, y)
    quad = float(fit.coefficients @ fit.basis.penalty @ fit.coefficients)
    assert quad == pytest.approx(_simpson_curvature(fit.basis, fit.coefficients), rel=1e-8)


# Estimator wrapper -----------------------------------------------------------


def test_estimator_fit_predict(noisy_sine):
    x, y = noisy_sine
    est = SmoothingSpline(basis_size=12).fit(x.reshape(-1, 1), y)
    preds = est.predict(x.reshape(-1, 1))
    assert np.corrcoef(preds, np.sin(4 * np.pi * x))[0, 1] > 0.95
    assert est.edf_ > 2.0


def test_estimator_clone_and_params():
    est = SmoothingSpline(basis_size=7, lam=0.5)
    params = est.get_params()
    assert params["basis_size"] == 7
    twin = clone(est)
    assert twin.get_params() == params


def test_estimator_rejects_multicolumn():
    est = SmoothingSpline()
    with pytest.raises(DataError):
        est.fit(np.zeros((10, 2)), np.zeros(10))

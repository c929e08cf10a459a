import math

import numpy as np
import pytest

from amimpute.exceptions import DataError
from amimpute.population import Population, generate_synthetic
from amimpute.response import (
    LogisticResponseModel,
    ResponseSet,
    calibrate_intercept,
    draw_response,
)
from amimpute.sampling import srswor


@pytest.fixture(scope="module")
def uniform_pop():
    rng = np.random.default_rng(5)
    X = rng.random((10_000, 2))
    return Population(y=np.ones(10_000), X=X)


def test_flat_slope_recovers_logit(uniform_pop):
    model = calibrate_intercept(uniform_pop, 0, b1=0.0, target_rate=0.75)
    assert model.b0 == pytest.approx(math.log(3.0), abs=1e-9)


def test_calibration_hits_target(uniform_pop):
    model = calibrate_intercept(uniform_pop, 0, b1=1.0, target_rate=0.75)
    mean_p = model.probabilities(uniform_pop.X[:, 0]).mean()
    assert mean_p == pytest.approx(0.75, abs=1e-6)


def test_calibration_on_skewed_covariate():
    # gamma-derived covariate, 70% target
    pop = generate_synthetic(1, size=5000, noise_sd=0.1, seed=8)
    model = calibrate_intercept(pop, 3, b1=1.0, target_rate=0.70)
    mean_p = model.probabilities(pop.X[:, 3]).mean()
    assert mean_p == pytest.approx(0.70, abs=1e-6)


def test_calibration_monotone_in_target(uniform_pop):
    low = calibrate_intercept(uniform_pop, 0, b1=1.0, target_rate=0.6)
    high = calibrate_intercept(uniform_pop, 0, b1=1.0, target_rate=0.9)
    assert high.b0 > low.b0


def test_invalid_target_rate(uniform_pop):
    with pytest.raises(DataError):
        calibrate_intercept(uniform_pop, 0, b1=1.0, target_rate=1.0)


def test_saturated_intercepts(uniform_pop, rng):
    sample = srswor(uniform_pop.size, 500, rng)
    all_in = draw_response(
        sample, LogisticResponseModel(b0=50.0, b1=1.0, covariate_index=0), uniform_pop, rng
    )
    assert all_in.n_respondents == 500
    none_in = draw_response(
        sample, LogisticResponseModel(b0=-50.0, b1=1.0, covariate_index=0), uniform_pop, rng
    )
    assert none_in.n_respondents == 0


def test_partition_is_exact(uniform_pop, rng):
    sample = srswor(uniform_pop.size, 200, rng)
    model = calibrate_intercept(uniform_pop, 0, b1=1.0, target_rate=0.75)
    response = draw_response(sample, model, uniform_pop, rng)
    both = np.concatenate([response.respondent_idx, response.nonrespondent_idx])
    assert np.array_equal(np.sort(both), np.arange(sample.size))


def test_mean_respondent_fraction(uniform_pop, rng):
    model = calibrate_intercept(uniform_pop, 0, b1=1.0, target_rate=0.75)
    sample = srswor(uniform_pop.size, 2000, rng)
    fractions = [
        draw_response(sample, model, uniform_pop, rng).n_respondents / 2000
        for _ in range(1000)
    ]
    assert abs(np.mean(fractions) - 0.75) < 0.01


def test_indicators_independent_across_units(uniform_pop, rng):
    # near-zero empirical pairwise correlation over repeated draws
    model = calibrate_intercept(uniform_pop, 0, b1=1.0, target_rate=0.75)
    sample = srswor(uniform_pop.size, 50, rng)
    draws = np.array(
        [draw_response(sample, model, uniform_pop, rng).indicators for _ in range(4000)]
    )
    corr = np.corrcoef(draws[:, :10].T)
    off_diag = corr[~np.eye(10, dtype=bool)]
    assert np.abs(off_diag).max() < 0.08


def test_response_set_validates_indicators():
    with pytest.raises(DataError):
        ResponseSet(indicators=np.array([0, 2]))

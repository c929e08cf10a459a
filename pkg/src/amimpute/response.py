"""Nonresponse mechanisms: logistic response model and Bernoulli draws.

Response depends on a single covariate through a logistic link; the
intercept is calibrated so the population mean response probability hits a
target rate, which keeps the mechanism missing-at-random given that
covariate and identical across replicates.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import bisect
from scipy.special import expit

from .exceptions import AmimputeError, DataError
from .population import Population
from .sampling import Sample
from .validation import as_int_1d

CALIBRATION_TOL = 1e-8


@dataclass(frozen=True)
class LogisticResponseModel:
    """Response probability p = expit(b0 + b1 * x[covariate_index])."""

    b0: float
    b1: float
    covariate_index: int = 0

    def probabilities(self, x: np.ndarray) -> np.ndarray:
        return expit(self.b0 + self.b1 * np.asarray(x, dtype=np.float64))


@dataclass(frozen=True)
class ResponseSet:
    """Respondent/nonrespondent partition of a sample.

    ``indicators`` holds one 0/1 flag per sampled unit (1 = observed);
    the derived index lists are positions into the sample arrays.
    """

    indicators: np.ndarray

    def __post_init__(self):
        ind = as_int_1d(self.indicators, "indicators")
        if ind.size and not np.all((ind == 0) | (ind == 1)):
            raise DataError("indicators must contain only 0 and 1")
        object.__setattr__(self, "indicators", ind)

    @property
    def respondent_idx(self) -> np.ndarray:
        return np.flatnonzero(self.indicators == 1)

    @property
    def nonrespondent_idx(self) -> np.ndarray:
        return np.flatnonzero(self.indicators == 0)

    @property
    def n_respondents(self) -> int:
        return int(self.indicators.sum())


def calibrate_intercept(
    pop: Population,
    covariate_index: int,
    b1: float,
    target_rate: float,
) -> LogisticResponseModel:
    """Solve the intercept so the population mean response rate hits target.

    The mean of ``expit(b0 + b1 x)`` is strictly increasing in ``b0``, so a
    bisection bracket always exists; the solution satisfies
    ``|mean p - target_rate| <= 1e-8``.
    """
    if not 0 < target_rate < 1:
        raise DataError(f"target_rate must lie in (0, 1), got {target_rate}")
    if not 0 <= covariate_index < pop.n_covariates:
        raise DataError(
            f"covariate_index {covariate_index} out of range 0..{pop.n_covariates - 1}"
        )
    x = pop.X[:, covariate_index]

    def gap(b0: float) -> float:
        return float(np.mean(expit(b0 + b1 * x))) - target_rate

    lo, hi = -60.0, 60.0
    while gap(lo) > 0:
        lo *= 2
    while gap(hi) < 0:
        hi *= 2
    b0 = float(bisect(gap, lo, hi, xtol=1e-12, maxiter=200))
    if abs(gap(b0)) > CALIBRATION_TOL:
        raise AmimputeError(
            f"intercept calibration did not reach tolerance: residual {gap(b0):.3g}"
        )
    return LogisticResponseModel(b0=b0, b1=b1, covariate_index=covariate_index)


def draw_response(
    sample: Sample,
    model: LogisticResponseModel,
    pop: Population,
    rng: np.random.Generator,
) -> ResponseSet:
    """Independent Bernoulli(p_i) response indicator per sampled unit."""
    if sample.unit_ids.max() >= pop.size:
        raise DataError("sample references units outside the population")
    p = model.probabilities(pop.X[sample.unit_ids, model.covariate_index])
    indicators = (rng.random(sample.size) < p).astype(np.int64)
    return ResponseSet(indicators=indicators)

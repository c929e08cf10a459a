"""Imputation methods for item nonresponse and the imputed total estimator.

Four deterministic methods fill missing responses from respondent data:
the design-weighted respondent mean, weighted linear regression on the
covariates, nearest-neighbor donation in covariate space, and additive
model predictions. Every method preserves observed values exactly; the
additive model degrades gracefully (AM -> regression -> mean) when a fit
is not identifiable, with the degradation recorded.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Callable

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .am import SmootherSettings, fit_am, predict_am
from .exceptions import DataError, DegenerateBasisError, DegenerateFitError, NoRespondentsError
from .response import ResponseSet
from .sampling import Sample
from .validation import as_float_1d, as_float_2d, check_weights

METHODS = ("mean", "regression", "nn", "am")
_ALIASES = {
    "reg": "regression",
    "nearest_neighbor": "nn",
    "nearest-neighbor": "nn",
}
_REGRESSION_RIDGE = 1e-10

ImputeFn = Callable[..., "ImputedDataset"]


@dataclass(frozen=True)
class ImputedDataset:
    """Completed response vector over a sample.

    ``tilde_y`` holds the observed value for respondents and the imputed
    value for nonrespondents. ``fallback_used`` documents any degradation
    of the requested method; ``detail`` carries method diagnostics such as
    per-term smoothing parameters.
    """

    tilde_y: np.ndarray
    method: str
    fallback_used: str | None = None
    detail: dict[str, Any] = field(default_factory=dict)


def canonical_method(name: str) -> str:
    method = _ALIASES.get(name.strip().lower(), name.strip().lower())
    if method not in METHODS:
        raise DataError(f"unknown imputation method {name!r}; known: {METHODS}")
    return method


def _respondent_mask(resp, n: int) -> np.ndarray:
    mask = np.asarray(resp, dtype=bool)
    if mask.shape != (n,):
        raise DataError(f"response indicators must have shape ({n},)")
    if not mask.any():
        raise NoRespondentsError("cannot impute: the sample has no respondents")
    return mask


def _weighted_mean(values: np.ndarray, weights: np.ndarray | None) -> float:
    if weights is None:
        return float(np.mean(values))
    return float(np.sum(weights * values) / np.sum(weights))


def impute_mean_arrays(y, resp, weights=None) -> ImputedDataset:
    """Impute every nonrespondent with the weighted respondent mean."""
    y = as_float_1d(y, "y")
    mask = _respondent_mask(resp, len(y))
    w = check_weights(weights, len(y))
    ybar = _weighted_mean(y[mask], None if w is None else w[mask])
    tilde = y.copy()
    tilde[~mask] = ybar
    return ImputedDataset(tilde_y=tilde, method="mean", detail={"mean": ybar})


def impute_regression_arrays(y, X, resp, weights=None) -> ImputedDataset:
    """Weighted linear regression imputation on (1, x_1..x_q).

    Coefficients solve the design-weighted normal equations over the
    respondents. A ridge of 1e-10 is added if the Gram matrix is not
    positive definite; if it still fails the method falls back to the
    respondent mean with a note.
    """
    y = as_float_1d(y, "y")
    X = np.empty((len(y), 0)) if X is None else as_float_2d(X, "X")
    if X.shape[0] != len(y):
        raise DataError(f"X has {X.shape[0]} rows, expected {len(y)}")
    mask = _respondent_mask(resp, len(y))
    w = check_weights(weights, len(y))
    wr = np.ones(int(mask.sum())) if w is None else w[mask]
    design = np.column_stack([np.ones(int(mask.sum())), X[mask]])
    gram = design.T @ (wr[:, None] * design)
    rhs = design.T @ (wr * y[mask])
    beta = None
    for attempt in (gram, gram + _REGRESSION_RIDGE * np.eye(gram.shape[0])):
        try:
            beta = cho_solve(cho_factor(attempt, lower=True), rhs)
        except np.linalg.LinAlgError:
            continue
        if np.all(np.isfinite(beta)):
            break
        beta = None
    if beta is None:
        fallback = impute_mean_arrays(y, resp, weights)
        return ImputedDataset(
            tilde_y=fallback.tilde_y,
            method="regression",
            fallback_used="regression->mean",
            detail=fallback.detail,
        )
    tilde = y.copy()
    if (~mask).any():
        design_m = np.column_stack([np.ones(int((~mask).sum())), X[~mask]])
        tilde[~mask] = design_m @ beta
    return ImputedDataset(
        tilde_y=tilde, method="regression", detail={"coefficients": beta}
    )


def impute_nn_arrays(y, X, resp, ids=None) -> ImputedDataset:
    """Nearest-neighbor imputation under Euclidean covariate distance.

    Distance ties break toward the donor with the smallest id (array
    position when ``ids`` is not given), so results are reproducible.
    """
    y = as_float_1d(y, "y")
    X = as_float_2d(X, "X")
    mask = _respondent_mask(resp, len(y))
    if ids is None:
        ids = np.arange(len(y))
    ids = np.asarray(ids)
    resp_idx = np.flatnonzero(mask)
    order = np.argsort(ids[resp_idx], kind="stable")
    donors = resp_idx[order]
    tilde = y.copy()
    miss_idx = np.flatnonzero(~mask)
    if miss_idx.size:
        diff = X[miss_idx][:, None, :] - X[donors][None, :, :]
        dist2 = np.einsum("mrk,mrk->mr", diff, diff)
        nearest = np.argmin(dist2, axis=1)  # first minimum = smallest id
        tilde[miss_idx] = y[donors[nearest]]
    return ImputedDataset(tilde_y=tilde, method="nn")


def impute_am_arrays(
    y, X, resp, weights=None, settings: SmootherSettings | None = None
) -> ImputedDataset:
    """Additive-model imputation with a recorded fallback chain.

    Fits the additive model on respondents (design-weighted when weights
    are given) and predicts the nonrespondents. If the fit is degenerate
    (too few respondents or no usable covariate) the method degrades to
    regression, and from there to the mean, recording the chain.
    """
    y = as_float_1d(y, "y")
    X = as_float_2d(X, "X")
    mask = _respondent_mask(resp, len(y))
    w = check_weights(weights, len(y))
    try:
        fit = fit_am(
            X[mask], y[mask], None if w is None else w[mask], settings=settings
        )
    except (DegenerateFitError, DegenerateBasisError) as exc:
        fallback = impute_regression_arrays(y, X, resp, weights)
        chain = "am->" + (fallback.fallback_used or "regression")
        return ImputedDataset(
            tilde_y=fallback.tilde_y,
            method="am",
            fallback_used=chain,
            detail={"reason": str(exc), **fallback.detail},
        )
    tilde = y.copy()
    if (~mask).any():
        tilde[~mask] = predict_am(fit, X[~mask])
    detail = {
        "lambdas": fit.lambdas,
        "dropped_terms": fit.dropped,
        "converged": fit.converged,
        "iterations": fit.iterations_used,
    }
    return ImputedDataset(tilde_y=tilde, method="am", detail=detail)


def impute_arrays(
    method: str,
    y,
    X,
    resp,
    weights=None,
    settings: SmootherSettings | None = None,
    ids=None,
) -> ImputedDataset:
    """Dispatch to one of the four imputation methods by name."""
    method = canonical_method(method)
    if method == "mean":
        return impute_mean_arrays(y, resp, weights)
    if method == "regression":
        return impute_regression_arrays(y, X, resp, weights)
    if method == "nn":
        return impute_nn_arrays(y, X, resp, ids=ids)
    return impute_am_arrays(y, X, resp, weights, settings)


def make_impute_fn(
    method: str, weighted: bool = True, settings: SmootherSettings | None = None
) -> ImputeFn:
    """Bind method and configuration into ``fn(y, X, resp, weights)``.

    The returned callable is what the bootstrap procedures refit on every
    replicate; ``weighted`` decides whether the replicate design weights
    are used or dropped.
    """
    method = canonical_method(method)

    def impute(y, X, resp, weights=None) -> ImputedDataset:
        return impute_arrays(
            method, y, X, resp, weights if weighted else None, settings
        )

    return impute


# Survey-facing wrappers ----------------------------------------------------


def _check_sample_arrays(sample: Sample, response: ResponseSet, y_obs) -> np.ndarray:
    y = as_float_1d(y_obs, "y_obs")
    if len(y) != sample.size:
        raise DataError(f"y_obs has length {len(y)}, expected {sample.size}")
    if len(response.indicators) != sample.size:
        raise DataError("response indicators do not match the sample size")
    return y


def impute_mean(sample, response, y_obs, weights=None) -> ImputedDataset:
    y = _check_sample_arrays(sample, response, y_obs)
    return impute_mean_arrays(y, response.indicators == 1, weights)


def impute_regression(sample, response, y_obs, X, weights=None) -> ImputedDataset:
    y = _check_sample_arrays(sample, response, y_obs)
    return impute_regression_arrays(y, X, response.indicators == 1, weights)


def impute_nearest_neighbor(sample, response, y_obs, X) -> ImputedDataset:
    y = _check_sample_arrays(sample, response, y_obs)
    return impute_nn_arrays(y, X, response.indicators == 1, ids=sample.unit_ids)


def impute_am(
    sample, response, y_obs, X, weights=None, settings: SmootherSettings | None = None
) -> ImputedDataset:
    y = _check_sample_arrays(sample, response, y_obs)
    return impute_am_arrays(y, X, response.indicators == 1, weights, settings)


def imputed_total(sample: Sample, imputed: ImputedDataset) -> float:
    """Horvitz-Thompson form total over observed-or-imputed values."""
    tilde = imputed.tilde_y
    if len(tilde) != sample.size:
        raise DataError("imputed dataset does not match the sample size")
    return float(np.sum(tilde / sample.pi))

"""Bootstrap variance estimation for the imputed total estimator.

Two procedures, matched to the sampling design:

* SRSWOR: a without-replacement bootstrap that replicates the sample k
  times into a pseudopopulation (each copy keeping its covariates and
  response indicator) and redraws SRSWOR samples of the original size.
* Stratified sampling: a mirror-match bootstrap that redraws, within each
  stratum, k_h independent SRSWOR subsamples of size n_h' chosen so the
  bootstrap mimics the original design.

Every bootstrap replicate is re-imputed from its own respondents, so the
variance estimate carries the imputation uncertainty. The variance is the
mean squared deviation of replicate totals around their mean (1/B
divisor).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.stats import norm

from .exceptions import ConfigError, DataError
from .imputation import ImputeFn
from .response import ResponseSet
from .sampling import Sample, randomized_round
from .validation import as_float_1d, as_float_2d, round_if_close

MAX_CONSECUTIVE_REDRAWS = 100

#: supported rules for the per-stratum bootstrap subsample size n_h'
N_PRIME_RULE_DEFAULT = "f*n_h"


@dataclass(frozen=True)
class BootstrapVariance:
    """Bootstrap variance of an imputed total.

    ``variance`` equals the mean squared deviation of
    ``replicate_totals`` around ``mean_total`` (1/B divisor);
    ``fallback_count`` counts replicates whose imputation degraded;
    ``redraw_count`` counts replicates redrawn for having no respondents.
    """

    variance: float
    n_replicates: int
    replicate_totals: np.ndarray
    mean_total: float
    fallback_count: int = 0
    redraw_count: int = 0


def _finalize(totals: list[float], fallbacks: int, redraws: int) -> BootstrapVariance:
    arr = np.asarray(totals, dtype=np.float64)
    mean = float(arr.mean())
    variance = float(np.mean((arr - mean) ** 2))
    return BootstrapVariance(
        variance=variance,
        n_replicates=len(arr),
        replicate_totals=arr,
        mean_total=mean,
        fallback_count=fallbacks,
        redraw_count=redraws,
    )


def _validate_inputs(sample: Sample, response: ResponseSet, y, X):
    y = as_float_1d(y, "y")
    X = as_float_2d(X, "X")
    if len(y) != sample.size or X.shape[0] != sample.size:
        raise DataError("y and X must have one row per sampled unit")
    if len(response.indicators) != sample.size:
        raise DataError("response indicators do not match the sample size")
    return y, X


def build_pseudopopulation(
    sample: Sample, response: ResponseSet, y, X
) -> tuple[np.ndarray, np.ndarray, np.ndarray, int, int]:
    """Replicate the sample k = N/n times (nearest integer, ties to even).

    Returns the pseudopopulation arrays ``(y, X, respondent mask)`` of
    k*n rows, the replication factor k, and the population size N
    inferred from the inclusion probabilities. Every pseudopopulation row
    is an exact copy of its source sample row, response indicator
    included.
    """
    y, X = _validate_inputs(sample, response, y, X)
    pi0 = float(sample.pi[0])
    if not np.allclose(sample.pi, pi0, rtol=1e-9, atol=0.0):
        raise DataError("BWO bootstrap requires an SRSWOR sample (constant pi)")
    n = sample.size
    pop_size, _ = round_if_close(n / pi0)
    pop_size = int(round(pop_size))
    k = max(int(round(pop_size / n)), 1)
    resp_mask = response.indicators == 1
    return np.tile(y, k), np.tile(X, (k, 1)), np.tile(resp_mask, k), k, pop_size


def bwo_variance(
    sample: Sample,
    response: ResponseSet,
    y,
    X,
    impute_fn: ImputeFn,
    n_replicates: int,
    rng: np.random.Generator,
) -> BootstrapVariance:
    """Without-replacement bootstrap variance under SRSWOR.

    The sample is replicated ``k = N/n`` times (rounded to the nearest
    integer, ties to even) into a pseudopopulation of size k*n; each
    replicate draws an SRSWOR of size n from it, re-imputes the missing
    values from the replicate's own respondents, and evaluates the total
    as (N/n) * sum of completed values. Replicates without respondents
    are redrawn; 100 consecutive failures abort.
    """
    if n_replicates < 2:
        raise DataError(f"need at least 2 bootstrap replicates, got {n_replicates}")
    pseudo_y, pseudo_X, pseudo_resp, k, pop_size = build_pseudopopulation(
        sample, response, y, X
    )
    n = sample.size
    pseudo_size = k * n
    expansion = pop_size / n

    totals: list[float] = []
    fallbacks = 0
    redraws = 0
    consecutive = 0
    while len(totals) < n_replicates:
        idx = rng.choice(pseudo_size, size=n, replace=False)
        resp_b = pseudo_resp[idx]
        if not resp_b.any():
            consecutive += 1
            redraws += 1
            if consecutive >= MAX_CONSECUTIVE_REDRAWS:
                raise DataError(
                    "bootstrap replicate had no respondents "
                    f"{MAX_CONSECUTIVE_REDRAWS} times in a row"
                )
            continue
        consecutive = 0
        weights_b = np.full(n, expansion)
        imputed = impute_fn(pseudo_y[idx], pseudo_X[idx], resp_b, weights_b)
        if imputed.fallback_used:
            fallbacks += 1
        totals.append(expansion * float(np.sum(imputed.tilde_y)))
    return _finalize(totals, fallbacks, redraws)


def resolve_n_prime_rule(rule) -> callable:
    """Turn an n_h' rule into ``fn(n_h, N_h) -> float``.

    Accepts the string ``"f*n_h"`` (subsample at the original sampling
    fraction), a numeric literal (fixed size for every stratum), or a
    callable.
    """
    if callable(rule):
        return rule
    if isinstance(rule, (int, float)) and not isinstance(rule, bool):
        value = float(rule)
        return lambda n_h, N_h: value
    if isinstance(rule, str):
        text = rule.strip().lower().replace(" ", "")
        if text in ("f*n_h", "f*nh", "fnh"):
            return lambda n_h, N_h: (n_h / N_h) * n_h
        try:
            value = float(text)
        except ValueError:
            raise ConfigError(
                [f"unknown n_prime_rule {rule!r}; use 'f*n_h' or a number"]
            ) from None
        return lambda n_h, N_h: value
    raise ConfigError([f"unsupported n_prime_rule {rule!r}"])


@dataclass(frozen=True)
class StratumPlan:
    """Per-stratum bootstrap parameters resolved before replication."""

    members: np.ndarray  # positions into the sample arrays
    n_sampled: int  # n_h
    pop_size: int  # N_h
    subsample_target: float  # n_h' before randomized rounding


def plan_mmb_strata(sample: Sample, n_prime_rule) -> list[StratumPlan]:
    """Resolve and validate the mirror-match parameters per stratum."""
    if sample.stratum is None:
        raise DataError("mirror-match bootstrap requires a stratified sample")
    rule = resolve_n_prime_rule(n_prime_rule)
    plans = []
    for h in np.unique(sample.stratum):
        members = np.flatnonzero(sample.stratum == h)
        pi_h = sample.pi[members]
        if not np.allclose(pi_h, pi_h[0], rtol=1e-9, atol=0.0):
            raise DataError(f"stratum {h}: inclusion probabilities are not constant")
        n_h = len(members)
        size_h, _ = round_if_close(n_h / float(pi_h[0]))
        size_h = int(round(size_h))
        target = rule(n_h, size_h)
        if target < 1 - 1e-9 or target > n_h - 1 + 1e-9:
            raise ConfigError(
                [
                    f"stratum {h}: n_h' = {target:.6g} outside [1, n_h-1] "
                    f"with n_h = {n_h}"
                ]
            )
        plans.append(
            StratumPlan(
                members=members,
                n_sampled=n_h,
                pop_size=size_h,
                subsample_target=target,
            )
        )
    return plans


def draw_mmb_replicate(
    plans: list[StratumPlan], rng: np.random.Generator
) -> tuple[np.ndarray, np.ndarray, np.ndarray, float]:
    """One mirror-match draw: sample positions, weights, strata, implied N*.

    Returns the concatenated sample positions, the per-row expansion
    factors ``n_h / n_h'``, the per-row stratum index into ``plans``, and
    the implied population size ``sum_h k_h n_h``.
    """
    rows, factors, stratum_of = [], [], []
    implied_pop = 0.0
    for s, plan in enumerate(plans):
        n_h = plan.n_sampled
        n_prime = min(max(randomized_round(plan.subsample_target, rng), 1), n_h)
        f_h = n_h / plan.pop_size
        f_star = n_prime / n_h
        k_raw = n_h * (1.0 - f_star) / (n_prime * (1.0 - f_h))
        k_h = max(randomized_round(k_raw, rng), 1)
        for _ in range(k_h):
            rows.append(rng.choice(plan.members, size=n_prime, replace=False))
        factors.append(np.full(n_prime * k_h, n_h / n_prime, dtype=np.float64))
        stratum_of.append(np.full(n_prime * k_h, s, dtype=np.int64))
        # size of the stratum population the bootstrap implicitly expands
        # to; equals N_h exactly when n_h' = f_h * n_h
        implied_pop += n_h * k_h
    return (
        np.concatenate(rows),
        np.concatenate(factors),
        np.concatenate(stratum_of),
        implied_pop,
    )


def mmb_variance(
    sample: Sample,
    response: ResponseSet,
    y,
    X,
    impute_fn: ImputeFn,
    n_prime_rule,
    n_replicates: int,
    rng: np.random.Generator,
) -> BootstrapVariance:
    """Mirror-match bootstrap variance under stratified sampling.

    Per stratum h with sampled size n_h from N_h units: draw SRSWOR
    subsamples of size n_h' from the stratum sample and repeat
    ``k_h = n_h (1 - f_h*) / (n_h' (1 - f_h))`` times (``f_h = n_h/N_h``,
    ``f_h* = n_h'/n_h``), concatenating into the bootstrap stratum sample.
    Non-integer n_h' and k_h are randomly rounded once per replicate and
    stratum. The replicate total is
    ``(N/N*) * sum_h (n_h/n_h') * sum of completed values in stratum h``,
    re-imputed from the replicate's own respondents, where
    ``N* = sum_h k_h n_h`` is the population size the bootstrap implicitly
    expands to. N* equals N whenever ``n_h' = f_h n_h`` is integer, so the
    leading fraction only corrects randomization-induced size changes.
    """
    y, X = _validate_inputs(sample, response, y, X)
    if n_replicates < 2:
        raise DataError(f"need at least 2 bootstrap replicates, got {n_replicates}")
    plans = plan_mmb_strata(sample, n_prime_rule)
    total_pop = float(sum(plan.pop_size for plan in plans))
    resp_mask = response.indicators == 1

    totals: list[float] = []
    fallbacks = 0
    redraws = 0
    consecutive = 0
    while len(totals) < n_replicates:
        idx, factor, _, implied_pop = draw_mmb_replicate(plans, rng)
        resp_b = resp_mask[idx]
        if not resp_b.any():
            consecutive += 1
            redraws += 1
            if consecutive >= MAX_CONSECUTIVE_REDRAWS:
                raise DataError(
                    "bootstrap replicate had no respondents "
                    f"{MAX_CONSECUTIVE_REDRAWS} times in a row"
                )
            continue
        consecutive = 0
        imputed = impute_fn(y[idx], X[idx], resp_b, factor)
        if imputed.fallback_used:
            fallbacks += 1
        totals.append(
            (total_pop / implied_pop) * float(np.sum(factor * imputed.tilde_y))
        )
    return _finalize(totals, fallbacks, redraws)


def confidence_interval(
    total: float, variance: float, level: float = 0.95
) -> tuple[float, float]:
    """Normal-theory interval: total +/- z * sqrt(variance)."""
    if variance < 0:
        raise DataError(f"variance must be nonnegative, got {variance}")
    if not 0 < level < 1:
        raise DataError(f"level must lie in (0, 1), got {level}")
    z = float(norm.ppf(0.5 + level / 2.0))
    half = z * float(np.sqrt(variance))
    return (total - half, total + half)

"""Monte Carlo comparison measures and method ranking.

Given per-replicate imputed totals (and, for the additive model,
bootstrap variances), these functions compute the accuracy of imputed
values (MRPE), the relative bias, root variance and root MSE of the total
estimator, bootstrap-variance accuracy (VAR, VAR_boot, coverage), and
tie-averaged method ranks.
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.stats import rankdata

from .bootstrap import confidence_interval
from .exceptions import DataError

MEASURE_NAMES = ("mrpe", "rb", "rrvar", "rrmse")

MEASURES_COLUMNS = ("population", "design", "method", "MRPE", "RB", "RRVAR", "RRMSE")
VARIANCE_COLUMNS = ("population", "design", "VAR", "VAR_boot", "CR")
RANKS_COLUMNS = ("design", "method", "MRPE", "RB", "RRVAR", "RRMSE")


@dataclass
class MethodResults:
    """Per-replicate outcomes of one imputation method.

    ``mrpe_terms`` holds each replicate's mean absolute relative
    prediction error over its nonrespondents (NaN when a replicate had
    none); ``zero_y_excluded`` counts units skipped because their true
    value is 0 and the relative error is undefined.
    """

    method: str
    totals: np.ndarray
    mrpe_terms: np.ndarray
    zero_y_excluded: int = 0
    fallback_count: int = 0
    v_boot: np.ndarray | None = None


@dataclass
class SimulationResult:
    """All replicate outcomes of one experiment cell."""

    true_total: float
    n_replicates: int
    methods: dict[str, MethodResults]

    def require(self, method: str) -> MethodResults:
        if method not in self.methods:
            raise DataError(f"no results recorded for method {method!r}")
        return self.methods[method]


def summarize_relative_errors(imputed: np.ndarray, truth: np.ndarray) -> tuple[float, int]:
    """One replicate's mean |(y* - y)/y| over nonrespondents.

    Units with true value exactly 0 are excluded (and counted), since
    their relative error is undefined. Returns NaN when nothing remains.
    """
    imputed = np.asarray(imputed, dtype=np.float64)
    truth = np.asarray(truth, dtype=np.float64)
    usable = truth != 0.0
    excluded = int((~usable).sum())
    if not usable.any():
        return float("nan"), excluded
    rel = np.abs((imputed[usable] - truth[usable]) / truth[usable])
    return float(rel.mean()), excluded


def mrpe(result: SimulationResult, method: str) -> float:
    """Mean relative prediction error, averaged over replicates."""
    res = result.require(method)
    if res.zero_y_excluded:
        warnings.warn(
            f"{method}: {res.zero_y_excluded} nonrespondent(s) with true value 0 "
            "were excluded from MRPE",
            stacklevel=2,
        )
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        return float(np.nanmean(res.mrpe_terms))


def _check_total(result: SimulationResult) -> float:
    if result.true_total == 0:
        raise DataError("true total is 0; relative measures are undefined")
    return result.true_total


def rb(result: SimulationResult, method: str) -> float:
    """Monte Carlo relative bias of the imputed total."""
    truth = _check_total(result)
    totals = result.require(method).totals
    return float((totals.mean() - truth) / truth)


def monte_carlo_variance(totals: np.ndarray) -> float:
    if len(totals) < 2:
        raise DataError("need at least 2 replicates for a variance")
    return float(np.var(totals, ddof=1))


def rrvar(result: SimulationResult, method: str) -> float:
    """Monte Carlo relative root variance (relative standard deviation)."""
    truth = _check_total(result)
    return float(np.sqrt(monte_carlo_variance(result.require(method).totals)) / abs(truth))


def rrmse(result: SimulationResult, method: str) -> float:
    """Monte Carlo relative root mean squared error."""
    truth = _check_total(result)
    totals = result.require(method).totals
    bias = totals.mean() - truth
    return float(np.sqrt(bias**2 + monte_carlo_variance(totals)) / abs(truth))


@dataclass(frozen=True)
class Measures:
    mrpe: float
    rb: float
    rrvar: float
    rrmse: float


def compute_measures(result: SimulationResult, method: str) -> Measures:
    return Measures(
        mrpe=mrpe(result, method),
        rb=rb(result, method),
        rrvar=rrvar(result, method),
        rrmse=rrmse(result, method),
    )


@dataclass(frozen=True)
class BootstrapAccuracy:
    variance: float
    variance_boot: float
    coverage: float


def bootstrap_summary(
    result: SimulationResult, method: str, level: float = 0.95
) -> BootstrapAccuracy:
    """Monte Carlo variance, mean bootstrap variance, and CI coverage."""
    res = result.require(method)
    if res.v_boot is None or np.any(np.isnan(res.v_boot)):
        raise DataError(f"{method}: bootstrap variances missing for some replicates")
    covered = 0
    for total, v in zip(res.totals, res.v_boot):
        lo, hi = confidence_interval(float(total), float(v), level)
        covered += lo <= result.true_total <= hi
    return BootstrapAccuracy(
        variance=monte_carlo_variance(res.totals),
        variance_boot=float(res.v_boot.mean()),
        coverage=covered / len(res.totals),
    )


def rank_methods(
    per_population: dict[object, dict[str, Measures]],
) -> dict[str, dict[str, float]]:
    """Average tie-adjusted ranks across populations, per measure.

    Within each population and measure, methods are ranked ascending
    (1 = best = smallest value; relative bias is ranked on its absolute
    value) with ties sharing the average rank.
    """
    if not per_population:
        raise DataError("need at least one population to rank")
    populations = list(per_population)
    methods = list(per_population[populations[0]])
    if len(methods) < 2:
        raise DataError("need at least two methods to rank")
    for pop in populations:
        if list(per_population[pop]) != methods:
            raise DataError("every population must report the same methods")
    sums = {m: dict.fromkeys(MEASURE_NAMES, 0.0) for m in methods}
    for pop in populations:
        for measure in MEASURE_NAMES:
            values = np.array(
                [getattr(per_population[pop][m], measure) for m in methods]
            )
            if measure == "rb":
                values = np.abs(values)
            ranks = rankdata(values, method="average")
            for m, r in zip(methods, ranks):
                sums[m][measure] += float(r)
    n_pop = len(populations)
    return {
        m: {measure: sums[m][measure] / n_pop for measure in MEASURE_NAMES}
        for m in methods
    }


def _format_cell(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_csv(path, columns, rows) -> None:
    """Write rows of dicts with a fixed column order.

    Floats are serialized with ``repr`` so equal results produce
    byte-identical files.
    """
    path = Path(path)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_format_cell(row[c]) for c in columns])

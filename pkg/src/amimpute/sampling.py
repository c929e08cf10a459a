"""Sampling designs: SRSWOR, median-split stratification, stratified SRSWOR.

Selected samples carry first-order inclusion probabilities and design
weights; the Horvitz-Thompson estimator closes the loop from sample to
population total.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .exceptions import DataError
from .population import Population
from .validation import as_float_1d, as_int_1d, round_if_close


@dataclass(frozen=True)
class Sample:
    """Selected units with inclusion probabilities.

    ``unit_ids`` index into the population; ``pi`` holds first-order
    inclusion probabilities in (0, 1]; ``stratum`` labels are present for
    stratified designs. Design weights are ``d = 1/pi`` by construction.
    """

    unit_ids: np.ndarray
    pi: np.ndarray
    stratum: np.ndarray | None = None

    def __post_init__(self):
        ids = as_int_1d(self.unit_ids, "unit_ids")
        pi = as_float_1d(self.pi, "pi")
        if len(ids) != len(pi):
            raise DataError("unit_ids and pi must have the same length")
        if len(np.unique(ids)) != len(ids):
            raise DataError("unit_ids contains duplicates (designs are without replacement)")
        if np.any(pi <= 0) or np.any(pi > 1):
            raise DataError("inclusion probabilities must lie in (0, 1]")
        stratum = self.stratum
        if stratum is not None:
            stratum = as_int_1d(stratum, "stratum")
            if len(stratum) != len(ids):
                raise DataError("stratum must have one label per sampled unit")
        object.__setattr__(self, "unit_ids", ids)
        object.__setattr__(self, "pi", pi)
        object.__setattr__(self, "stratum", stratum)

    @property
    def size(self) -> int:
        return len(self.unit_ids)

    @property
    def design_weights(self) -> np.ndarray:
        return 1.0 / self.pi


@dataclass(frozen=True)
class StrataAssignment:
    """Partition of the population into strata labelled 1..H."""

    labels: np.ndarray
    sizes: np.ndarray
    n_strata: int

    def __post_init__(self):
        labels = as_int_1d(self.labels, "labels")
        sizes = as_int_1d(self.sizes, "sizes")
        if len(sizes) != self.n_strata:
            raise DataError("sizes must have one entry per stratum")
        if sizes.sum() != len(labels):
            raise DataError("stratum sizes must sum to the population size")
        if labels.size and (labels.min() < 1 or labels.max() > self.n_strata):
            raise DataError(f"labels must lie in 1..{self.n_strata}")
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "sizes", sizes)


def srswor(population_size: int, sample_size: int, rng: np.random.Generator) -> Sample:
    """Simple random sample without replacement; every unit has pi = n/N."""
    if sample_size < 1:
        raise DataError(f"sample size must be >= 1, got {sample_size}")
    if sample_size > population_size:
        raise DataError(
            f"sample size {sample_size} exceeds population size {population_size}"
        )
    ids = np.sort(rng.choice(population_size, size=sample_size, replace=False))
    pi = np.full(sample_size, sample_size / population_size)
    return Sample(unit_ids=ids, pi=pi)


def _split_by_median(values: np.ndarray, members: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Split ``members`` at the median of ``values``; balance group sizes.

    Units exactly at the median go to the lower group. If tied values make
    the groups unequal by more than one unit, the largest-valued units of
    the lower group (ties broken toward the larger unit index) move up
    until the sizes differ by at most 1.
    """
    med = np.median(values)
    in_lower = values <= med
    lower, upper = members[in_lower], members[~in_lower]
    excess = (len(lower) - len(upper)) // 2 if len(lower) - len(upper) > 1 else 0
    if excess > 0:
        lower_vals = values[in_lower]
        order = np.lexsort((lower, lower_vals))  # by value, then unit index
        moving = order[-excess:]
        keep = np.ones(len(lower), dtype=bool)
        keep[moving] = False
        upper = np.sort(np.concatenate([upper, lower[~keep]]))
        lower = lower[keep]
    return lower, upper


def stratify_by_medians(pop: Population, var_indices) -> StrataAssignment:
    """Recursive binary median splits on the given covariates, in order.

    Each covariate doubles the number of groups, so k covariates yield
    2**k strata. Deterministic given the population.
    """
    var_indices = list(var_indices)
    if not var_indices:
        raise DataError("var_indices must not be empty")
    for j in var_indices:
        if not 0 <= j < pop.n_covariates:
            raise DataError(f"covariate index {j} out of range 0..{pop.n_covariates - 1}")
    groups = [np.arange(pop.size)]
    for j in var_indices:
        next_groups = []
        for members in groups:
            if len(members) == 0:
                next_groups.extend([members, members])
                continue
            lower, upper = _split_by_median(pop.X[members, j], members)
            next_groups.extend([lower, upper])
        groups = next_groups
    n_strata = len(groups)
    labels = np.zeros(pop.size, dtype=np.int64)
    sizes = np.zeros(n_strata, dtype=np.int64)
    for h, members in enumerate(groups, start=1):
        labels[members] = h
        sizes[h - 1] = len(members)
    return StrataAssignment(labels=labels, sizes=sizes, n_strata=n_strata)


def randomized_round(value: float, rng: np.random.Generator) -> int:
    """Round up with probability equal to the fractional part.

    Integers (within float tolerance) pass through without consuming
    randomness, so expected value is preserved and integer targets are
    exact.
    """
    snapped, is_int = round_if_close(value)
    if is_int:
        return int(snapped)
    low = int(np.floor(value))
    return low + int(rng.random() < value - low)


def stratified_sample(
    strata: StrataAssignment, rate: float, rng: np.random.Generator
) -> Sample:
    """Independent SRSWOR within each stratum at a common sampling rate.

    Non-integer target sizes ``rate * N_h`` are randomly rounded; inclusion
    probabilities use the realized per-stratum sample size.
    """
    if not 0 < rate <= 1:
        raise DataError(f"sampling rate must lie in (0, 1], got {rate}")
    occupied = [h for h in range(1, strata.n_strata + 1) if strata.sizes[h - 1] > 0]
    for h in occupied:
        if rate * strata.sizes[h - 1] < 1 - 1e-9:
            raise DataError(
                f"stratum {h}: rate * N_h = {rate * strata.sizes[h - 1]:.3g} < 1"
            )
    ids, pis, labels = [], [], []
    for h in occupied:
        members = np.flatnonzero(strata.labels == h)
        n_h = randomized_round(rate * len(members), rng)
        n_h = min(max(n_h, 1), len(members))
        chosen = np.sort(rng.choice(members, size=n_h, replace=False))
        ids.append(chosen)
        pis.append(np.full(n_h, n_h / len(members)))
        labels.append(np.full(n_h, h, dtype=np.int64))
    return Sample(
        unit_ids=np.concatenate(ids),
        pi=np.concatenate(pis),
        stratum=np.concatenate(labels),
    )


def save_sample_csv(sample: Sample, path) -> None:
    """Write (unit_id, pi, stratum) rows for inspection and debugging."""
    path = Path(path)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["unit_id", "pi", "stratum"])
        for i in range(sample.size):
            writer.writerow(
                [
                    int(sample.unit_ids[i]),
                    repr(float(sample.pi[i])),
                    "" if sample.stratum is None else int(sample.stratum[i]),
                ]
            )


def horvitz_thompson(sample: Sample, y_values) -> float:
    """Design-unbiased total estimate: sum of y_i / pi_i over the sample."""
    y = as_float_1d(y_values, "y_values")
    if len(y) != sample.size:
        raise DataError(
            f"y_values has length {len(y)}, expected {sample.size} sampled units"
        )
    return float(np.sum(y / sample.pi))

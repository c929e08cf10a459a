"""Finite populations: synthetic generators, CSV ingestion, true totals.

A :class:`Population` is the ground truth of a simulation study: the
variable of interest ``y`` together with auxiliary variables ``X`` whose
columns are scaled into ``[0, 1]``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .exceptions import CsvFormatError, DataError
from .rng import make_rng
from .validation import as_float_1d, as_float_2d, check_unit_interval

N_SYNTHETIC_POPULATIONS = 5


@dataclass(frozen=True)
class Population:
    """A finite universe of (y, x_1..x_q) records.

    Attributes
    ----------
    y : ndarray of shape (N,)
        Variable of interest.
    X : ndarray of shape (N, q)
        Auxiliary variables, each scaled into [0, 1].
    """

    y: np.ndarray
    X: np.ndarray

    def __post_init__(self):
        y = as_float_1d(self.y, "y")
        X = as_float_2d(self.X, "X")
        if len(y) != X.shape[0]:
            raise DataError(f"y has {len(y)} entries but X has {X.shape[0]} rows")
        if len(y) == 0:
            raise DataError("population must contain at least one unit")
        check_unit_interval(X, "X")
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "X", X)

    @property
    def size(self) -> int:
        return len(self.y)

    @property
    def n_covariates(self) -> int:
        return self.X.shape[1]


def mean_response(pop_id: int, X: np.ndarray) -> np.ndarray:
    """Noise-free response surface of synthetic population ``pop_id``.

    Population 1 is linear, population 2 additive but nonlinear,
    populations 3 and 4 contain interactions, and population 5 carries no
    signal at all.
    """
    X = as_float_2d(X, "X")
    if X.shape[1] < 4:
        raise DataError("synthetic response surfaces require 4 covariates")
    x1, x2, x3, x4 = (X[:, j] for j in range(4))
    if pop_id == 1:
        return 1.0 + 5.0 * x1 + x2 + x3 + x4
    if pop_id == 2:
        return (
            2.0
            + np.cos(np.pi * x1 + np.pi)
            + np.sin(4.0 * np.pi * x2)
            + np.exp(-((x3 - 0.5) ** 2))
            + (x4 - 0.5) ** 2
        )
    if pop_id == 3:
        return 1.0 + np.cos(2.0 * np.pi * x1) + x1 * x2 + x3**2 * x4
    if pop_id == 4:
        return 2.0 + np.cos(np.pi * (x1 + x2)) * np.sin(np.pi * (x3 + x4))
    if pop_id == 5:
        return np.ones(X.shape[0])
    raise DataError(f"pop_id must be in 1..{N_SYNTHETIC_POPULATIONS}, got {pop_id}")


def generate_synthetic(
    pop_id: int, size: int = 10_000, noise_sd: float = 0.1, seed: int = 0
) -> Population:
    """Generate one of the five synthetic populations.

    Covariates x1..x3 are iid Uniform[0,1]; x4 is gamma(shape 3, scale 1/6)
    min-max rescaled into [0,1] (the generator's native gamma sampler is
    exact for any shape). Gaussian noise with standard deviation
    ``noise_sd`` is added to the response surface. A fixed seed yields
    bit-identical output; the draw order is x1, x2, x3, x4, noise.
    """
    if not 1 <= pop_id <= N_SYNTHETIC_POPULATIONS:
        raise DataError(
            f"pop_id must be in 1..{N_SYNTHETIC_POPULATIONS}, got {pop_id}"
        )
    if size < 1:
        raise DataError(f"size must be >= 1, got {size}")
    if noise_sd < 0:
        raise DataError(f"noise_sd must be >= 0, got {noise_sd}")
    rng = make_rng(seed)
    x1 = rng.random(size)
    x2 = rng.random(size)
    x3 = rng.random(size)
    x4 = rng.gamma(3.0, 1.0 / 6.0, size)
    span = x4.max() - x4.min()
    x4 = (x4 - x4.min()) / span if span > 0 else np.zeros(size)
    X = np.column_stack([x1, x2, x3, x4])
    y = mean_response(pop_id, X) + rng.normal(0.0, noise_sd, size)
    return Population(y=y, X=X)


def population_total(pop: Population) -> float:
    """Sum of y over the whole population."""
    return float(np.sum(pop.y))


def _parse_cell(raw: str, row: int, column: str) -> float:
    try:
        return float(raw)
    except ValueError:
        raise CsvFormatError(
            f"row {row}, column {column!r}: could not parse {raw!r} as a number"
        ) from None


def load_csv(
    path, y_column: str, x_columns: list[str], rescale: bool = False
) -> Population:
    """Read a population from a comma-separated file.

    The file must be UTF-8 with a header row; ``y`` must be numeric and
    fully observed. With ``rescale`` each x column is min-max mapped to
    [0, 1] (a constant column maps to all zeros).
    """
    path = Path(path)
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise CsvFormatError(f"{path}: file is empty") from None
        header = [h.strip() for h in header]
        for name in [y_column, *x_columns]:
            if name not in header:
                raise CsvFormatError(
                    f"{path}: column {name!r} not found in header {header}"
                )
        y_idx = header.index(y_column)
        x_idx = [header.index(name) for name in x_columns]
        y_vals: list[float] = []
        x_vals: list[list[float]] = []
        for row_no, row in enumerate(reader, start=2):
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) < len(header):
                raise CsvFormatError(
                    f"row {row_no}: expected {len(header)} fields, got {len(row)}"
                )
            if not row[y_idx].strip():
                raise CsvFormatError(
                    f"row {row_no}, column {y_column!r}: y must be fully observed"
                )
            y_vals.append(_parse_cell(row[y_idx], row_no, y_column))
            x_vals.append(
                [_parse_cell(row[j], row_no, header[j]) for j in x_idx]
            )
    if not y_vals:
        raise CsvFormatError(f"{path}: no data rows")
    X = np.asarray(x_vals, dtype=np.float64)
    if rescale:
        lo = X.min(axis=0)
        span = X.max(axis=0) - lo
        safe = np.where(span > 0, span, 1.0)
        X = np.where(span > 0, (X - lo) / safe, 0.0)
    return Population(y=np.asarray(y_vals), X=X)


def save_csv(pop: Population, path) -> None:
    """Write a population in the same CSV format that :func:`load_csv` reads.

    Floats are written with ``repr`` so a reload round-trips exactly and
    identical populations serialize to identical bytes.
    """
    path = Path(path)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["y"] + [f"x{j + 1}" for j in range(pop.n_covariates)])
        for i in range(pop.size):
            writer.writerow(
                [repr(float(pop.y[i]))]
                + [repr(float(v)) for v in pop.X[i]]
            )

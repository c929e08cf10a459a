"""Experiment configuration: INI-backed, fully validated before any work.

A configuration file contains ``key = value`` pairs grouped in sections
(population, design, response, imputation, spline, simulation, output).
``validate_config`` reports every violated constraint, not just the
first; ``load_config``/``save_config`` round-trip the file so runs can
echo their exact configuration for provenance.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .bootstrap import N_PRIME_RULE_DEFAULT
from .exceptions import ConfigError
from .imputation import METHODS, canonical_method

DESIGNS = ("srswor", "ss")


@dataclass(frozen=True)
class PopulationSpec:
    kind: str = "synthetic"  # "synthetic" | "csv"
    pop_id: int = 1
    size: int = 10_000
    noise_sd: float = 0.1
    csv_path: str = ""
    y_column: str = "y"
    x_columns: tuple[str, ...] = ()
    rescale: bool = True


@dataclass(frozen=True)
class DesignSpec:
    kind: str = "srswor"  # "srswor" | "ss"
    rate: float = 0.2
    stratify_vars: tuple[int, ...] = (0, 1, 2, 3)


@dataclass(frozen=True)
class ResponseSpec:
    covariate: int = 0
    b1: float = 1.0
    target_rate: float = 0.75
    #: optional fixed intercept; when set, calibration is skipped (useful
    #: to force near-certain response with a large value).
    b0: float | None = None


@dataclass(frozen=True)
class ImputationSpec:
    """Imputation methods to compare.

    Each entry is a method name, optionally suffixed with ``:weighted``
    or ``:unweighted`` to override the default ``weighted`` flag for that
    method alone (e.g. ``am:unweighted``).
    """

    methods: tuple[str, ...] = ("regression", "mean", "nn", "am")
    weighted: bool = True


def parse_method_entry(entry: str, default_weighted: bool) -> tuple[str, str, bool]:
    """Split ``method[:weighted|:unweighted]`` into (label, method, weighted)."""
    label = entry.strip()
    name, _, suffix = label.partition(":")
    weighted = default_weighted
    if suffix:
        if suffix.strip().lower() not in ("weighted", "unweighted"):
            raise ConfigError(
                [f"imputation.methods: bad suffix in {entry!r}; "
                 "use ':weighted' or ':unweighted'"]
            )
        weighted = suffix.strip().lower() == "weighted"
    return label, canonical_method(name), weighted


@dataclass(frozen=True)
class SplineSpec:
    basis_size: int = 10
    lambda_min: float = 1e-8
    lambda_max: float = 1e4
    lambda_count: int = 40
    tol: float = 1e-6
    max_iter: int = 50
    gcv_cycles: int = 5

    def lambda_grid(self) -> tuple[float, ...]:
        return tuple(
            np.logspace(
                np.log10(self.lambda_min),
                np.log10(self.lambda_max),
                self.lambda_count,
            )
        )


@dataclass(frozen=True)
class SimulationSpec:
    replicates: int = 100
    bootstrap_replicates: int = 0
    n_prime_rule: str = N_PRIME_RULE_DEFAULT
    seed: int = 0
    threads: int = 1


@dataclass(frozen=True)
class ExperimentConfig:
    population: PopulationSpec = field(default_factory=PopulationSpec)
    design: DesignSpec = field(default_factory=DesignSpec)
    response: ResponseSpec = field(default_factory=ResponseSpec)
    imputation: ImputationSpec = field(default_factory=ImputationSpec)
    spline: SplineSpec = field(default_factory=SplineSpec)
    simulation: SimulationSpec = field(default_factory=SimulationSpec)
    output_dir: str = "results"

    def with_overrides(self, seed=None, threads=None, output_dir=None) -> "ExperimentConfig":
        cfg = self
        if seed is not None:
            cfg = replace(cfg, simulation=replace(cfg.simulation, seed=int(seed)))
        if threads is not None:
            cfg = replace(cfg, simulation=replace(cfg.simulation, threads=int(threads)))
        if output_dir is not None:
            cfg = replace(cfg, output_dir=str(output_dir))
        return cfg


def validate_config(config: ExperimentConfig) -> list[str]:
    """Return every violated constraint as ``section.key: message``."""
    errors: list[str] = []
    pop = config.population
    if pop.kind not in ("synthetic", "csv"):
        errors.append(f"population.kind: must be 'synthetic' or 'csv', got {pop.kind!r}")
    elif pop.kind == "synthetic":
        if not 1 <= pop.pop_id <= 5:
            errors.append(f"population.pop_id: must be in 1..5, got {pop.pop_id}")
        if pop.size < 1:
            errors.append(f"population.size: must be >= 1, got {pop.size}")
        if pop.noise_sd < 0:
            errors.append(f"population.noise_sd: must be >= 0, got {pop.noise_sd}")
    else:
        if not pop.csv_path:
            errors.append("population.csv_path: required when kind is 'csv'")
        elif not Path(pop.csv_path).exists():
            errors.append(f"population.csv_path: file not found: {pop.csv_path}")
        if not pop.x_columns:
            errors.append("population.x_columns: required when kind is 'csv'")

    design = config.design
    if design.kind not in DESIGNS:
        errors.append(f"design.kind: must be one of {DESIGNS}, got {design.kind!r}")
    if not 0 < design.rate <= 1:
        errors.append(f"design.rate: must lie in (0, 1], got {design.rate}")
    if design.kind == "ss" and not design.stratify_vars:
        errors.append("design.stratify_vars: required for stratified sampling")

    resp = config.response
    if resp.covariate < 0:
        errors.append(f"response.covariate: must be >= 0, got {resp.covariate}")
    if resp.b0 is None and not 0 < resp.target_rate < 1:
        errors.append(
            f"response.target_rate: must lie in (0, 1), got {resp.target_rate}"
        )

    imp = config.imputation
    if not imp.methods:
        errors.append("imputation.methods: must not be empty")
    for m in imp.methods:
        try:
            parse_method_entry(m, imp.weighted)
        except Exception:
            errors.append(f"imputation.methods: unknown method {m!r}; known: {METHODS}")

    spl = config.spline
    if spl.basis_size < 4:
        errors.append(f"spline.basis_size: must be >= 4, got {spl.basis_size}")
    if spl.lambda_min <= 0 or spl.lambda_max < spl.lambda_min:
        errors.append("spline.lambda_min/lambda_max: need 0 < min <= max")
    if spl.lambda_count < 1:
        errors.append(f"spline.lambda_count: must be >= 1, got {spl.lambda_count}")
    if spl.tol <= 0:
        errors.append(f"spline.tol: must be > 0, got {spl.tol}")
    if spl.max_iter < 1:
        errors.append(f"spline.max_iter: must be >= 1, got {spl.max_iter}")

    sim = config.simulation
    if sim.replicates < 1:
        errors.append(f"simulation.replicates: must be >= 1, got {sim.replicates}")
    if sim.bootstrap_replicates < 0:
        errors.append(
            "simulation.bootstrap_replicates: must be >= 0, "
            f"got {sim.bootstrap_replicates}"
        )
    if sim.threads < 1:
        errors.append(f"simulation.threads: must be >= 1, got {sim.threads}")

    # cross-field checks
    n_cov = 4 if pop.kind == "synthetic" else len(pop.x_columns)
    if resp.covariate >= n_cov > 0:
        errors.append(
            f"response.covariate: index {resp.covariate} out of range for "
            f"{n_cov} covariates"
        )
    if design.kind == "ss":
        for v in design.stratify_vars:
            if not 0 <= v < n_cov:
                errors.append(
                    f"design.stratify_vars: index {v} out of range for "
                    f"{n_cov} covariates"
                )
    return errors


def _parse_bool(raw: str) -> bool:
    value = raw.strip().lower()
    if value in ("1", "true", "yes", "on"):
        return True
    if value in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {raw!r}")


def _csv_list(raw: str) -> list[str]:
    return [item.strip() for item in raw.split(",") if item.strip()]


def load_config(path) -> ExperimentConfig:
    """Parse an INI experiment file into an :class:`ExperimentConfig`.

    Raises :class:`ConfigError` listing every malformed value; semantic
    constraints are checked separately by :func:`validate_config`.
    """
    parser = configparser.ConfigParser(interpolation=None)
    read = parser.read(path, encoding="utf-8")
    if not read:
        raise ConfigError([f"config file not found: {path}"])

    errors: list[str] = []

    def get(section, key, cast, default):
        if not parser.has_option(section, key):
            return default
        raw = parser.get(section, key)
        try:
            return cast(raw)
        except (ValueError, TypeError):
            errors.append(f"{section}.{key}: cannot parse {raw!r}")
            return default

    pop = PopulationSpec(
        kind=get("population", "kind", str.strip, "synthetic"),
        pop_id=get("population", "pop_id", int, 1),
        size=get("population", "size", int, 10_000),
        noise_sd=get("population", "noise_sd", float, 0.1),
        csv_path=get("population", "csv_path", str.strip, ""),
        y_column=get("population", "y_column", str.strip, "y"),
        x_columns=tuple(get("population", "x_columns", _csv_list, [])),
        rescale=get("population", "rescale", _parse_bool, True),
    )
    design = DesignSpec(
        kind=get("design", "kind", str.strip, "srswor"),
        rate=get("design", "rate", float, 0.2),
        stratify_vars=tuple(
            get("design", "stratify_vars", lambda s: [int(v) for v in _csv_list(s)], [0, 1, 2, 3])
        ),
    )
    b0_raw = get("response", "b0", str.strip, "")
    try:
        b0 = float(b0_raw) if b0_raw else None
    except ValueError:
        errors.append(f"response.b0: cannot parse {b0_raw!r}")
        b0 = None
    response = ResponseSpec(
        covariate=get("response", "covariate", int, 0),
        b1=get("response", "b1", float, 1.0),
        target_rate=get("response", "target_rate", float, 0.75),
        b0=b0,
    )
    imputation = ImputationSpec(
        methods=tuple(
            get("imputation", "methods", _csv_list, ["regression", "mean", "nn", "am"])
        ),
        weighted=get("imputation", "weighted", _parse_bool, True),
    )
    spline = SplineSpec(
        basis_size=get("spline", "basis_size", int, 10),
        lambda_min=get("spline", "lambda_min", float, 1e-8),
        lambda_max=get("spline", "lambda_max", float, 1e4),
        lambda_count=get("spline", "lambda_count", int, 40),
        tol=get("spline", "tol", float, 1e-6),
        max_iter=get("spline", "max_iter", int, 50),
        gcv_cycles=get("spline", "gcv_cycles", int, 5),
    )
    simulation = SimulationSpec(
        replicates=get("simulation", "replicates", int, 100),
        bootstrap_replicates=get("simulation", "bootstrap_replicates", int, 0),
        n_prime_rule=get("simulation", "n_prime_rule", str.strip, N_PRIME_RULE_DEFAULT),
        seed=get("simulation", "seed", int, 0),
        threads=get("simulation", "threads", int, 1),
    )
    output_dir = get("output", "directory", str.strip, "results")
    if errors:
        raise ConfigError(errors)
    return ExperimentConfig(
        population=pop,
        design=design,
        response=response,
        imputation=imputation,
        spline=spline,
        simulation=simulation,
        output_dir=output_dir,
    )


def save_config(config: ExperimentConfig, path) -> None:
    """Write a configuration back to INI (used to echo runs)."""
    parser = configparser.ConfigParser(interpolation=None)
    parser["population"] = {
        "kind": config.population.kind,
        "pop_id": str(config.population.pop_id),
        "size": str(config.population.size),
        "noise_sd": repr(config.population.noise_sd),
        "csv_path": config.population.csv_path,
        "y_column": config.population.y_column,
        "x_columns": ", ".join(config.population.x_columns),
        "rescale": str(config.population.rescale).lower(),
    }
    parser["design"] = {
        "kind": config.design.kind,
        "rate": repr(config.design.rate),
        "stratify_vars": ", ".join(str(v) for v in config.design.stratify_vars),
    }
    parser["response"] = {
        "covariate": str(config.response.covariate),
        "b1": repr(config.response.b1),
        "target_rate": repr(config.response.target_rate),
        "b0": "" if config.response.b0 is None else repr(config.response.b0),
    }
    parser["imputation"] = {
        "methods": ", ".join(config.imputation.methods),
        "weighted": str(config.imputation.weighted).lower(),
    }
    parser["spline"] = {
        "basis_size": str(config.spline.basis_size),
        "lambda_min": repr(config.spline.lambda_min),
        "lambda_max": repr(config.spline.lambda_max),
        "lambda_count": str(config.spline.lambda_count),
        "tol": repr(config.spline.tol),
        "max_iter": str(config.spline.max_iter),
        "gcv_cycles": str(config.spline.gcv_cycles),
    }
    parser["simulation"] = {
        "replicates": str(config.simulation.replicates),
        "bootstrap_replicates": str(config.simulation.bootstrap_replicates),
        "n_prime_rule": config.simulation.n_prime_rule,
        "seed": str(config.simulation.seed),
        "threads": str(config.simulation.threads),
    }
    parser["output"] = {"directory": config.output_dir}
    with open(path, "w", encoding="utf-8") as fh:
        parser.write(fh)

"""Monte Carlo experiment orchestration.

One experiment repeatedly draws a sample and a response pattern from a
fixed population, imputes the missing values with each configured method,
and aggregates the comparison measures; with bootstrap replicates enabled
it also estimates the variance of the additive-model imputed total with
the design-matched bootstrap procedure.

Replicates are mutually independent with RNG streams keyed by
``(seed, replicate index)`` and results merged in index order, so output
is byte-identical across runs and worker counts.
"""

from __future__ import annotations

import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import bootstrap as bs
from .am import SmootherSettings
from .config import ExperimentConfig, parse_method_entry, save_config, validate_config
from .exceptions import ConfigError
from .imputation import impute_arrays, make_impute_fn
from .metrics import (
    MEASURES_COLUMNS,
    RANKS_COLUMNS,
    VARIANCE_COLUMNS,
    Measures,
    MethodResults,
    SimulationResult,
    bootstrap_summary,
    compute_measures,
    rank_methods,
    summarize_relative_errors,
    write_csv,
)
from .population import Population, generate_synthetic, load_csv, population_total
from .response import LogisticResponseModel, calibrate_intercept, draw_response
from .rng import replicate_rng
from .sampling import StrataAssignment, srswor, stratified_sample, stratify_by_medians
from .validation import round_if_close

FAILURE_BUDGET = 0.01

REPLICATES_COLUMNS = (
    "replicate",
    "method",
    "total",
    "mrpe_term",
    "zero_y_excluded",
    "fallback",
    "v_boot",
    "ci_lo",
    "ci_hi",
    "bootstrap_fallbacks",
    "bootstrap_redraws",
)


@dataclass(frozen=True)
class MethodPlan:
    """One configured imputation column: label, base method, weighting."""

    label: str
    method: str
    weighted: bool


@dataclass(frozen=True)
class ReplicatePayload:
    """Immutable inputs shared by every replicate worker."""

    population: Population
    strata: StrataAssignment | None
    model: LogisticResponseModel
    design_kind: str
    rate: float
    sample_size: int
    methods: tuple[MethodPlan, ...]
    settings: SmootherSettings
    bootstrap_replicates: int
    n_prime_rule: str
    seed: int

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(plan.label for plan in self.methods)


@dataclass
class ReplicateRecord:
    """Outcome of one simulation replicate (timing excluded from CSVs)."""

    index: int
    totals: dict[str, float]
    mrpe_terms: dict[str, float]
    zero_y_excluded: dict[str, int]
    fallbacks: dict[str, int]
    v_boot: float | None = None
    ci: tuple[float, float] | None = None
    bootstrap_fallbacks: int = 0
    bootstrap_redraws: int = 0
    seconds: float = 0.0


@dataclass
class ReplicateFailure:
    index: int
    message: str


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    population_label: str
    true_total: float
    result: SimulationResult
    records: list[ReplicateRecord]
    measures: dict[str, Measures]
    bootstrap: object | None
    ranks: dict[str, dict[str, float]]
    output_dir: Path | None
    n_failures: int = 0
    seconds: float = 0.0


def build_population(config: ExperimentConfig) -> tuple[Population, str]:
    pop_spec = config.population
    if pop_spec.kind == "synthetic":
        pop = generate_synthetic(
            pop_spec.pop_id, pop_spec.size, pop_spec.noise_sd, config.simulation.seed
        )
        return pop, f"synthetic-{pop_spec.pop_id}"
    pop = load_csv(
        pop_spec.csv_path,
        pop_spec.y_column,
        list(pop_spec.x_columns),
        rescale=pop_spec.rescale,
    )
    return pop, Path(pop_spec.csv_path).stem


def prepare_payload(config: ExperimentConfig) -> ReplicatePayload:
    errors = validate_config(config)
    if errors:
        raise ConfigError(errors)
    pop, _ = build_population(config)
    strata = None
    sample_size = 0
    if config.design.kind == "ss":
        strata = stratify_by_medians(pop, list(config.design.stratify_vars))
    else:
        target, _ = round_if_close(config.design.rate * pop.size)
        sample_size = max(1, int(round(target)))
    if config.response.b0 is not None:
        model = LogisticResponseModel(
            b0=config.response.b0,
            b1=config.response.b1,
            covariate_index=config.response.covariate,
        )
    else:
        model = calibrate_intercept(
            pop, config.response.covariate, config.response.b1, config.response.target_rate
        )
    settings = SmootherSettings(
        basis_size=config.spline.basis_size,
        lambda_grid=config.spline.lambda_grid(),
        tol=config.spline.tol,
        max_iter=config.spline.max_iter,
        gcv_cycles=config.spline.gcv_cycles,
    )
    plans = tuple(
        MethodPlan(*parse_method_entry(m, config.imputation.weighted))
        for m in config.imputation.methods
    )
    return ReplicatePayload(
        population=pop,
        strata=strata,
        model=model,
        design_kind=config.design.kind,
        rate=config.design.rate,
        sample_size=sample_size,
        methods=plans,
        settings=settings,
        bootstrap_replicates=config.simulation.bootstrap_replicates,
        n_prime_rule=config.simulation.n_prime_rule,
        seed=config.simulation.seed,
    )


def run_single_replicate(payload: ReplicatePayload, index: int) -> ReplicateRecord:
    """Draw sample and response, impute per method, optionally bootstrap.

    Deterministic function of (payload, index): the replicate stream is
    consumed in a fixed order (sample draw, response draw, bootstrap).
    """
    start = time.perf_counter()
    rng = replicate_rng(payload.seed, index)
    pop = payload.population
    if payload.design_kind == "ss":
        sample = stratified_sample(payload.strata, payload.rate, rng)
    else:
        sample = srswor(pop.size, payload.sample_size, rng)
    response = draw_response(sample, payload.model, pop, rng)
    resp_mask = response.indicators == 1
    y_s = pop.y[sample.unit_ids]
    X_s = pop.X[sample.unit_ids]
    design_weights = sample.design_weights

    totals: dict[str, float] = {}
    mrpe_terms: dict[str, float] = {}
    excluded: dict[str, int] = {}
    fallbacks: dict[str, int] = {}
    miss = ~resp_mask
    for plan in payload.methods:
        imputed = impute_arrays(
            plan.method,
            y_s,
            X_s,
            resp_mask,
            design_weights if plan.weighted else None,
            settings=payload.settings,
            ids=sample.unit_ids,
        )
        totals[plan.label] = float(np.sum(imputed.tilde_y / sample.pi))
        term, n_zero = summarize_relative_errors(imputed.tilde_y[miss], y_s[miss])
        mrpe_terms[plan.label] = term
        excluded[plan.label] = n_zero
        fallbacks[plan.label] = int(imputed.fallback_used is not None)

    record = ReplicateRecord(
        index=index,
        totals=totals,
        mrpe_terms=mrpe_terms,
        zero_y_excluded=excluded,
        fallbacks=fallbacks,
    )
    am_plan = next((p for p in payload.methods if p.method == "am"), None)
    if payload.bootstrap_replicates > 0 and am_plan is not None:
        impute_fn = make_impute_fn("am", am_plan.weighted, payload.settings)
        if payload.design_kind == "ss":
            boot = bs.mmb_variance(
                sample,
                response,
                y_s,
                X_s,
                impute_fn,
                payload.n_prime_rule,
                payload.bootstrap_replicates,
                rng,
            )
        else:
            boot = bs.bwo_variance(
                sample,
                response,
                y_s,
                X_s,
                impute_fn,
                payload.bootstrap_replicates,
                rng,
            )
        record.v_boot = boot.variance
        record.ci = bs.confidence_interval(totals[am_plan.label], boot.variance)
        record.bootstrap_fallbacks = boot.fallback_count
        record.bootstrap_redraws = boot.redraw_count
    record.seconds = time.perf_counter() - start
    return record


_WORKER_PAYLOAD: ReplicatePayload | None = None


def _init_worker(payload: ReplicatePayload) -> None:
    global _WORKER_PAYLOAD
    _WORKER_PAYLOAD = payload


def _worker_entry(index: int):
    try:
        return run_single_replicate(_WORKER_PAYLOAD, index)
    except Exception as exc:  # noqa: BLE001 - reported against the budget
        return ReplicateFailure(index=index, message=f"{type(exc).__name__}: {exc}")


def _run_replicates(payload: ReplicatePayload, n: int, threads: int):
    indices = range(n)
    if threads <= 1:
        return [_collect(payload, i) for i in indices]
    chunk = max(1, n // (threads * 4))
    with ProcessPoolExecutor(
        max_workers=threads, initializer=_init_worker, initargs=(payload,)
    ) as pool:
        return list(pool.map(_worker_entry, indices, chunksize=chunk))


def _collect(payload: ReplicatePayload, index: int):
    try:
        return run_single_replicate(payload, index)
    except Exception as exc:  # noqa: BLE001
        return ReplicateFailure(index=index, message=f"{type(exc).__name__}: {exc}")


def aggregate_records(
    records: list[ReplicateRecord],
    labels: tuple[str, ...],
    true_total: float,
    bootstrap_label: str | None,
) -> SimulationResult:
    by_method: dict[str, MethodResults] = {}
    for label in labels:
        by_method[label] = MethodResults(
            method=label,
            totals=np.array([r.totals[label] for r in records]),
            mrpe_terms=np.array([r.mrpe_terms[label] for r in records]),
            zero_y_excluded=sum(r.zero_y_excluded[label] for r in records),
            fallback_count=sum(r.fallbacks[label] for r in records),
            v_boot=(
                np.array([np.nan if r.v_boot is None else r.v_boot for r in records])
                if label == bootstrap_label
                else None
            ),
        )
    return SimulationResult(
        true_total=true_total, n_replicates=len(records), methods=by_method
    )


def run_experiment(
    config: ExperimentConfig, write_outputs: bool = True
) -> ExperimentResult:
    """Run the full Monte Carlo study described by ``config``.

    Validates the configuration, runs the replicates (in parallel when
    ``simulation.threads > 1``), aggregates the comparison measures, and
    writes the CSV outputs. Aborts if more than 1% of replicates fail.
    """
    started = time.perf_counter()
    payload = prepare_payload(config)
    am_plan = next((p for p in payload.methods if p.method == "am"), None)
    if config.simulation.bootstrap_replicates > 0 and am_plan is None:
        raise ConfigError(
            ["simulation.bootstrap_replicates: bootstrap requires 'am' among methods"]
        )
    pop = payload.population
    label = population_label(config)
    true_total = population_total(pop)

    n = config.simulation.replicates
    outcomes = _run_replicates(payload, n, config.simulation.threads)
    failures = [o for o in outcomes if isinstance(o, ReplicateFailure)]
    records = [o for o in outcomes if isinstance(o, ReplicateRecord)]
    if len(failures) > FAILURE_BUDGET * n:
        details = "; ".join(f"#{f.index}: {f.message}" for f in failures[:5])
        raise RuntimeError(
            f"{len(failures)} of {n} replicates failed (> {FAILURE_BUDGET:.0%}): {details}"
        )

    boot_label = (
        am_plan.label
        if config.simulation.bootstrap_replicates > 0 and am_plan is not None
        else None
    )
    result = aggregate_records(records, payload.labels, true_total, boot_label)
    measures = {m: _safe_measures(result, m) for m in payload.labels}
    boot_summary = bootstrap_summary(result, boot_label) if boot_label else None
    ranks = (
        rank_methods({label: measures}) if len(payload.labels) >= 2 else {}
    )

    out_dir: Path | None = None
    if write_outputs:
        out_dir = Path(config.output_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        _write_outputs(
            out_dir,
            config,
            label,
            payload.labels,
            boot_label,
            records,
            measures,
            boot_summary,
            ranks,
        )
    elapsed = time.perf_counter() - started
    if write_outputs and out_dir is not None:
        with open(out_dir / "run.log", "w", encoding="utf-8") as fh:
            fh.write(
                f"replicates={n} failures={len(failures)} "
                f"elapsed_seconds={elapsed:.3f}\n"
            )
            for failure in failures:
                fh.write(f"failed replicate {failure.index}: {failure.message}\n")
    return ExperimentResult(
        config=config,
        population_label=label,
        true_total=true_total,
        result=result,
        records=records,
        measures=measures,
        bootstrap=boot_summary,
        ranks=ranks,
        output_dir=out_dir,
        n_failures=len(failures),
        seconds=elapsed,
    )


def _safe_measures(result: SimulationResult, method: str) -> Measures:
    """Measures with variance-type entries NaN when only one replicate ran."""
    if result.n_replicates >= 2:
        return compute_measures(result, method)
    from .metrics import mrpe as _mrpe, rb as _rb

    return Measures(
        mrpe=_mrpe(result, method),
        rb=_rb(result, method),
        rrvar=float("nan"),
        rrmse=float("nan"),
    )


def population_label(config: ExperimentConfig) -> str:
    if config.population.kind == "synthetic":
        return f"synthetic-{config.population.pop_id}"
    return Path(config.population.csv_path).stem


def _write_outputs(
    out_dir: Path,
    config: ExperimentConfig,
    label: str,
    method_labels: tuple[str, ...],
    boot_label: str | None,
    records: list[ReplicateRecord],
    measures: dict[str, Measures],
    boot_summary,
    ranks: dict[str, dict[str, float]],
) -> None:
    design = config.design.kind
    save_config(config, out_dir / "config.ini")

    rep_rows = []
    for record in records:
        for method in method_labels:
            is_boot = method == boot_label and record.v_boot is not None
            rep_rows.append(
                {
                    "replicate": record.index,
                    "method": method,
                    "total": record.totals[method],
                    "mrpe_term": record.mrpe_terms[method],
                    "zero_y_excluded": record.zero_y_excluded[method],
                    "fallback": record.fallbacks[method],
                    "v_boot": record.v_boot if is_boot else "",
                    "ci_lo": record.ci[0] if is_boot else "",
                    "ci_hi": record.ci[1] if is_boot else "",
                    "bootstrap_fallbacks": record.bootstrap_fallbacks if is_boot else "",
                    "bootstrap_redraws": record.bootstrap_redraws if is_boot else "",
                }
            )
    write_csv(out_dir / "replicates.csv", REPLICATES_COLUMNS, rep_rows)

    measure_rows = [
        {
            "population": label,
            "design": design,
            "method": method,
            "MRPE": m.mrpe,
            "RB": m.rb,
            "RRVAR": m.rrvar,
            "RRMSE": m.rrmse,
        }
        for method, m in measures.items()
    ]
    write_csv(out_dir / "measures.csv", MEASURES_COLUMNS, measure_rows)

    if boot_summary is not None:
        write_csv(
            out_dir / "variance.csv",
            VARIANCE_COLUMNS,
            [
                {
                    "population": label,
                    "design": design,
                    "VAR": boot_summary.variance,
                    "VAR_boot": boot_summary.variance_boot,
                    "CR": boot_summary.coverage,
                }
            ],
        )

    if ranks:
        rank_rows = [
            {
                "design": design,
                "method": method,
                "MRPE": r["mrpe"],
                "RB": r["rb"],
                "RRVAR": r["rrvar"],
                "RRMSE": r["rrmse"],
            }
            for method, r in ranks.items()
        ]
        write_csv(out_dir / "ranks.csv", RANKS_COLUMNS, rank_rows)

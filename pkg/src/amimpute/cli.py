"""Command-line interface.

Subcommands:

* ``simulate``: run a Monte Carlo experiment from an INI config file.
* ``generate``: write one of the synthetic populations to CSV.
* ``impute``: complete a CSV whose response column has empty cells.
* ``bootstrap-variance``: bootstrap variance of an imputed total for a
  drawn sample stored as CSV.
"""

from __future__ import annotations

import argparse
import csv
import sys
from pathlib import Path

import numpy as np

from . import bootstrap as bs
from .am import SmootherSettings
from .config import load_config, validate_config
from .exceptions import AmimputeError, ConfigError, CsvFormatError
from .imputation import canonical_method, impute_arrays, make_impute_fn
from .population import generate_synthetic, save_csv
from .response import ResponseSet
from .rng import make_rng
from .runner import run_experiment
from .sampling import Sample


def _add_simulate(subparsers) -> None:
    p = subparsers.add_parser("simulate", help="run a Monte Carlo experiment")
    p.add_argument("--config", required=True, help="INI experiment file")
    p.add_argument("--threads", type=int, default=None, help="worker processes")
    p.add_argument("--seed", type=int, default=None, help="override master seed")
    p.add_argument("--out", default=None, help="override output directory")


def _add_generate(subparsers) -> None:
    p = subparsers.add_parser("generate", help="write a synthetic population CSV")
    p.add_argument("--pop", type=int, required=True, choices=range(1, 6))
    p.add_argument("--n", type=int, required=True, help="population size")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--noise-sd", type=float, default=0.1)
    p.add_argument("--out", required=True, help="output CSV path")


def _add_impute(subparsers) -> None:
    p = subparsers.add_parser(
        "impute", help="fill missing response cells in a CSV (empty field = missing)"
    )
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--method", required=True, choices=["mean", "reg", "nn", "am"])
    p.add_argument("--out", required=True)
    p.add_argument("--y-column", default="y")
    p.add_argument(
        "--x-columns",
        default=None,
        help="comma-separated covariate columns (default: all other columns)",
    )
    p.add_argument("--weight-column", default=None, help="design weight column")
    p.add_argument(
        "--no-rescale",
        action="store_true",
        help="trust that covariates already lie in [0, 1]",
    )
    p.add_argument("--basis-size", type=int, default=10)


def _add_bootstrap(subparsers) -> None:
    p = subparsers.add_parser(
        "bootstrap-variance",
        help="bootstrap variance of the imputed total for a drawn sample CSV",
    )
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--design", required=True, choices=["srswor", "ss"])
    p.add_argument("--B", dest="n_boot", type=int, required=True)
    p.add_argument("--n-prime-rule", default="f*n_h")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--method", default="am", choices=["mean", "reg", "nn", "am"])
    p.add_argument("--y-column", default="y")
    p.add_argument("--pi-column", default="pi")
    p.add_argument("--stratum-column", default="stratum")
    p.add_argument("--x-columns", default=None)
    p.add_argument("--unweighted", action="store_true")
    p.add_argument("--out", default=None, help="optional CSV for the summary row")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="amimpute",
        description="Survey imputation with additive-model smoothing splines",
    )
    subparsers = parser.add_subparsers(dest="command", required=True)
    _add_simulate(subparsers)
    _add_generate(subparsers)
    _add_impute(subparsers)
    _add_bootstrap(subparsers)
    return parser


def _read_table(path: str) -> tuple[list[str], list[list[str]]]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise CsvFormatError(f"{path}: file is empty") from None
        rows = [row for row in reader if row and any(cell.strip() for cell in row)]
    return header, rows


def _column_values(header, rows, name, path) -> list[str]:
    if name not in header:
        raise CsvFormatError(f"{path}: column {name!r} not found in header {header}")
    j = header.index(name)
    return [row[j].strip() if j < len(row) else "" for row in rows]


def _parse_floats(raw: list[str], name: str) -> np.ndarray:
    out = np.empty(len(raw))
    for i, cell in enumerate(raw):
        try:
            out[i] = float(cell)
        except ValueError:
            raise CsvFormatError(
                f"row {i + 2}, column {name!r}: could not parse {cell!r}"
            ) from None
    return out


def _load_sample_table(args, require_pi: bool):
    """Shared CSV -> (y, resp, X, x_names, extra columns) loader."""
    header, rows = _read_table(args.infile)
    y_raw = _column_values(header, rows, args.y_column, args.infile)
    resp = np.array([cell != "" for cell in y_raw])
    y = np.zeros(len(y_raw))
    for i, cell in enumerate(y_raw):
        if cell:
            try:
                y[i] = float(cell)
            except ValueError:
                raise CsvFormatError(
                    f"row {i + 2}, column {args.y_column!r}: could not parse {cell!r}"
                ) from None
    reserved = {args.y_column}
    if require_pi:
        reserved |= {args.pi_column, args.stratum_column}
    if getattr(args, "weight_column", None):
        reserved.add(args.weight_column)
    if args.x_columns:
        x_names = [c.strip() for c in args.x_columns.split(",") if c.strip()]
    else:
        x_names = [c for c in header if c not in reserved]
    if not x_names:
        raise CsvFormatError(f"{args.infile}: no covariate columns found")
    X = np.column_stack(
        [_parse_floats(_column_values(header, rows, c, args.infile), c) for c in x_names]
    )
    return header, rows, y, resp, X, x_names


def _rescale_unit(X: np.ndarray) -> np.ndarray:
    lo = X.min(axis=0)
    span = X.max(axis=0) - lo
    safe = np.where(span > 0, span, 1.0)
    return np.where(span > 0, (X - lo) / safe, 0.0)


def _cmd_simulate(args) -> int:
    config = load_config(args.config)
    config = config.with_overrides(
        seed=args.seed, threads=args.threads, output_dir=args.out
    )
    errors = validate_config(config)
    if errors:
        raise ConfigError(errors)
    result = run_experiment(config)
    print(
        f"population {result.population_label} design {config.design.kind}: "
        f"{result.result.n_replicates} replicates in {result.seconds:.1f}s "
        f"({result.n_failures} failures)"
    )
    for method, m in result.measures.items():
        print(
            f"  {method:<10} MRPE={m.mrpe:.5f} RB={m.rb:+.5f} "
            f"RRVAR={m.rrvar:.5f} RRMSE={m.rrmse:.5f}"
        )
    if result.bootstrap is not None:
        b = result.bootstrap
        print(
            f"  bootstrap  VAR={b.variance:.2f} VAR_boot={b.variance_boot:.2f} "
            f"CR={b.coverage:.3f}"
        )
    print(f"outputs in {result.output_dir}")
    return 0


def _cmd_generate(args) -> int:
    pop = generate_synthetic(args.pop, args.n, args.noise_sd, args.seed)
    save_csv(pop, args.out)
    print(f"wrote population {args.pop} (N={args.n}) to {args.out}")
    return 0


def _cmd_impute(args) -> int:
    header, rows, y, resp, X, x_names = _load_sample_table(args, require_pi=False)
    if not args.no_rescale:
        X = _rescale_unit(X)
    weights = None
    if args.weight_column:
        weights = _parse_floats(
            _column_values(header, rows, args.weight_column, args.infile),
            args.weight_column,
        )
    method = canonical_method(args.method)
    settings = SmootherSettings(basis_size=args.basis_size)
    imputed = impute_arrays(method, y, X, resp, weights, settings=settings)

    y_idx = header.index(args.y_column)
    out_path = Path(args.out)
    with open(out_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for i, row in enumerate(rows):
            row = list(row) + [""] * (len(header) - len(row))
            if not resp[i]:
                row[y_idx] = repr(float(imputed.tilde_y[i]))
            writer.writerow(row)

    n_missing = int((~resp).sum())
    print(f"imputed {n_missing} missing value(s) with method {method}")
    if imputed.fallback_used:
        print(f"fallback used: {imputed.fallback_used}")
    lambdas = imputed.detail.get("lambdas")
    if lambdas:
        printable = ", ".join(
            f"{name}={lam:.4g}" if lam is not None else f"{name}=dropped"
            for name, lam in zip(x_names, lambdas)
        )
        print(f"smoothing parameters: {printable}")
    print(f"wrote completed data to {out_path}")
    return 0


def _cmd_bootstrap(args) -> int:
    header, rows, y, resp, X, x_names = _load_sample_table(args, require_pi=True)
    pi = _parse_floats(
        _column_values(header, rows, args.pi_column, args.infile), args.pi_column
    )
    stratum = None
    if args.design == "ss":
        stratum = _parse_floats(
            _column_values(header, rows, args.stratum_column, args.infile),
            args.stratum_column,
        ).astype(np.int64)
    sample = Sample(unit_ids=np.arange(len(y)), pi=pi, stratum=stratum)
    response = ResponseSet(indicators=resp.astype(np.int64))
    method = canonical_method(args.method)
    weighted = not args.unweighted
    weights = sample.design_weights if weighted else None
    imputed = impute_arrays(
        method, y, X, resp, weights, settings=SmootherSettings(), ids=sample.unit_ids
    )
    total = float(np.sum(imputed.tilde_y / sample.pi))
    impute_fn = make_impute_fn(method, weighted, SmootherSettings())
    rng = make_rng(args.seed)
    if args.design == "ss":
        boot = bs.mmb_variance(
            sample, response, y, X, impute_fn, args.n_prime_rule, args.n_boot, rng
        )
    else:
        boot = bs.bwo_variance(sample, response, y, X, impute_fn, args.n_boot, rng)
    lo, hi = bs.confidence_interval(total, boot.variance)
    print(f"imputed total: {total:.6g}")
    print(f"bootstrap variance (B={boot.n_replicates}): {boot.variance:.6g}")
    print(f"95% confidence interval: [{lo:.6g}, {hi:.6g}]")
    if boot.fallback_count:
        print(f"replicates with imputation fallback: {boot.fallback_count}")
    if args.out:
        with open(args.out, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["total", "variance", "B", "ci_lo", "ci_hi", "fallbacks"])
            writer.writerow(
                [
                    repr(total),
                    repr(boot.variance),
                    boot.n_replicates,
                    repr(lo),
                    repr(hi),
                    boot.fallback_count,
                ]
            )
        print(f"wrote summary to {args.out}")
    return 0


_COMMANDS = {
    "simulate": _cmd_simulate,
    "generate": _cmd_generate,
    "impute": _cmd_impute,
    "bootstrap-variance": _cmd_bootstrap,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except ConfigError as exc:
        for message in exc.errors:
            print(f"config error: {message}", file=sys.stderr)
        return 2
    except (AmimputeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

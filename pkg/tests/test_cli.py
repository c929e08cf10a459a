import csv
import subprocess
import sys

import numpy as np
import pytest

from amimpute.cli import main
from amimpute.population import load_csv


def run_cli(*args):
    return main([str(a) for a in args])


# generate ---------------------------------------------------------------


def test_generate_writes_population(tmp_path, capsys):
    out = tmp_path / "pop.csv"
    assert run_cli("generate", "--pop", 2, "--n", 60, "--seed", 9, "--out", out) == 0
    pop = load_csv(out, "y", ["x1", "x2", "x3", "x4"], rescale=False)
    assert pop.size == 60
    assert "wrote population 2" in capsys.readouterr().out


def test_generate_deterministic(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    run_cli("generate", "--pop", 1, "--n", 40, "--seed", 3, "--out", a)
    run_cli("generate", "--pop", 1, "--n", 40, "--seed", 3, "--out", b)
    assert a.read_bytes() == b.read_bytes()


# impute -----------------------------------------------------------------


@pytest.fixture
def missing_csv(tmp_path):
    rng = np.random.default_rng(12)
    path = tmp_path / "data.csv"
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["y", "x1", "x2"])
        for i in range(80):
            x1, x2 = rng.random(), rng.random()
            y = 1 + 2 * x1 + x2 + rng.normal(0, 0.05)
            writer.writerow(["" if i % 4 == 0 else repr(y), repr(x1), repr(x2)])
    return path


def test_impute_fills_missing_cells(missing_csv, tmp_path, capsys):
    out = tmp_path / "filled.csv"
    code = run_cli("impute", "--in", missing_csv, "--method", "reg", "--out", out)
    assert code == 0
    with open(out, newline="") as fh:
        rows = list(csv.DictReader(fh))
    values = [row["y"] for row in rows]
    assert all(v != "" for v in values)
    stdout = capsys.readouterr().out
    assert "imputed 20 missing value(s)" in stdout


def test_impute_preserves_observed_cells(missing_csv, tmp_path):
    out = tmp_path / "filled.csv"
    run_cli("impute", "--in", missing_csv, "--method", "mean", "--out", out)
    with open(missing_csv, newline="") as fh:
        before = list(csv.DictReader(fh))
    with open(out, newline="") as fh:
        after = list(csv.DictReader(fh))
    for row_before, row_after in zip(before, after):
        if row_before["y"]:
            assert row_before["y"] == row_after["y"]


def test_impute_am_reports_lambdas(missing_csv, tmp_path, capsys):
    out = tmp_path / "filled.csv"
    run_cli("impute", "--in", missing_csv, "--method", "am", "--out", out)
    stdout = capsys.readouterr().out
    assert "smoothing parameters" in stdout


def test_impute_unknown_column_fails(missing_csv, tmp_path, capsys):
    code = run_cli(
        "impute", "--in", missing_csv, "--method", "mean",
        "--out", tmp_path / "x.csv", "--y-column", "nope",
    )
    assert code == 1
    assert "nope" in capsys.readouterr().err


# bootstrap-variance -------------------------------------------------------


@pytest.fixture
def sample_csv(tmp_path):
    rng = np.random.default_rng(13)
    path = tmp_path / "sample.csv"
    n = 120
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["y", "x1", "pi", "stratum"])
        for i in range(n):
            x = rng.random()
            y = 2 + x + rng.normal(0, 0.1)
            missing = rng.random() < 0.25
            writer.writerow(
                ["" if missing else repr(y), repr(x), "0.2", 1 + i % 2]
            )
    return path


def test_bootstrap_variance_srswor(sample_csv, capsys):
    code = run_cli(
        "bootstrap-variance", "--in", sample_csv, "--design", "srswor",
        "--B", 20, "--seed", 4, "--method", "mean",
    )
    assert code == 0
    stdout = capsys.readouterr().out
    assert "bootstrap variance" in stdout
    assert "confidence interval" in stdout


def test_bootstrap_variance_ss_with_summary_file(sample_csv, tmp_path, capsys):
    out = tmp_path / "summary.csv"
    code = run_cli(
        "bootstrap-variance", "--in", sample_csv, "--design", "ss",
        "--B", 15, "--seed", 4, "--method", "mean", "--out", out,
    )
    assert code == 0
    with open(out, newline="") as fh:
        row = list(csv.DictReader(fh))[0]
    assert float(row["variance"]) >= 0
    assert int(row["B"]) == 15


def test_bootstrap_variance_bad_rule(sample_csv, capsys):
    code = run_cli(
        "bootstrap-variance", "--in", sample_csv, "--design", "ss",
        "--B", 10, "--n-prime-rule", "bogus", "--method", "mean",
    )
    assert code == 2
    assert "n_prime_rule" in capsys.readouterr().err


# simulate -----------------------------------------------------------------


CONFIG_TEXT = """
[population]
kind = synthetic
pop_id = 1
size = 300
noise_sd = 0.1

[design]
kind = srswor
rate = 0.2

[response]
covariate = 0
b1 = 1.0
target_rate = 0.75

[imputation]
methods = mean, reg, nn, am
weighted = true

[spline]
basis_size = 8

[simulation]
replicates = 3
bootstrap_replicates = 0
seed = 21
threads = 1

[output]
directory = {out}
"""


def test_simulate_end_to_end(tmp_path, capsys):
    cfg_path = tmp_path / "exp.ini"
    cfg_path.write_text(CONFIG_TEXT.format(out=tmp_path / "results"))
    assert run_cli("simulate", "--config", cfg_path) == 0
    assert (tmp_path / "results" / "measures.csv").exists()
    stdout = capsys.readouterr().out
    assert "replicates" in stdout


def test_simulate_invalid_config_exit_code(tmp_path, capsys):
    cfg_path = tmp_path / "exp.ini"
    cfg_path.write_text(
        CONFIG_TEXT.format(out=tmp_path / "r").replace("rate = 0.2", "rate = 0")
    )
    assert run_cli("simulate", "--config", cfg_path) == 2
    assert "design.rate" in capsys.readouterr().err


def test_simulate_seed_override_changes_outputs(tmp_path):
    cfg_path = tmp_path / "exp.ini"
    cfg_path.write_text(CONFIG_TEXT.format(out=tmp_path / "r1"))
    run_cli("simulate", "--config", cfg_path)
    cfg_path2 = tmp_path / "exp2.ini"
    cfg_path2.write_text(CONFIG_TEXT.format(out=tmp_path / "r2"))
    run_cli("simulate", "--config", cfg_path2, "--seed", 99)
    a = (tmp_path / "r1" / "measures.csv").read_bytes()
    b = (tmp_path / "r2" / "measures.csv").read_bytes()
    assert a != b


def test_module_invocation_smoke(tmp_path):
    out = tmp_path / "pop.csv"
    proc = subprocess.run(
        [sys.executable, "-m", "amimpute", "generate", "--pop", "5",
         "--n", "20", "--seed", "1", "--out", str(out)],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 0, proc.stderr
    assert out.exists()

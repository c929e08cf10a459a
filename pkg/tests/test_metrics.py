import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from amimpute.exceptions import DataError
from amimpute.metrics import (
    Measures,
    MethodResults,
    SimulationResult,
    bootstrap_summary,
    compute_measures,
    mrpe,
    rank_methods,
    rb,
    rrmse,
    rrvar,
    summarize_relative_errors,
    write_csv,
)


def make_result(true_total, totals_by_method, mrpe_by_method=None, v_boot=None):
    methods = {}
    for name, totals in totals_by_method.items():
        totals = np.asarray(totals, dtype=float)
        terms = (
            np.asarray(mrpe_by_method[name], dtype=float)
            if mrpe_by_method
            else np.zeros(len(totals))
        )
        methods[name] = MethodResults(
            method=name,
            totals=totals,
            mrpe_terms=terms,
            v_boot=None if v_boot is None else np.asarray(v_boot[name], dtype=float),
        )
    return SimulationResult(
        true_total=true_total, n_replicates=len(next(iter(methods.values())).totals), methods=methods
    )


# MRPE ---------------------------------------------------------------------


def test_mrpe_perfect_imputation_is_zero():
    result = make_result(10.0, {"mean": [10, 10, 10]})
    assert mrpe(result, "mean") == 0.0


def test_mrpe_single_unit_by_hand():
    # one replicate, one nonrespondent: y=2 imputed as 3 -> |3-2|/2 = 0.5
    term, excluded = summarize_relative_errors(np.array([3.0]), np.array([2.0]))
    assert term == 0.5
    assert excluded == 0


def test_mrpe_two_replicates_hand_computed():
    # replicate 1: errors |1-2|/2, |6-4|/4 -> mean 0.5
    # replicate 2: error |3-2|/2 -> 0.5 ; MRPE = 0.5
    t1, _ = summarize_relative_errors(np.array([1.0, 6.0]), np.array([2.0, 4.0]))
    t2, _ = summarize_relative_errors(np.array([3.0]), np.array([2.0]))
    result = make_result(1.0, {"m": [1, 1]}, {"m": [t1, t2]})
    assert mrpe(result, "m") == pytest.approx((t1 + t2) / 2, rel=1e-15)
    assert t1 == pytest.approx(0.5)


def test_mrpe_zero_truth_excluded_with_warning():
    term, excluded = summarize_relative_errors(
        np.array([1.0, 2.0]), np.array([0.0, 4.0])
    )
    assert excluded == 1
    assert term == pytest.approx(0.5)
    result = make_result(1.0, {"m": [1.0]}, {"m": [term]})
    result.methods["m"].zero_y_excluded = 1
    with pytest.warns(UserWarning, match="excluded"):
        mrpe(result, "m")


# RB / RRVAR / RRMSE ---------------------------------------------------------


def test_all_totals_equal_truth():
    result = make_result(100.0, {"m": [100.0, 100.0, 100.0]})
    assert rb(result, "m") == 0.0
    assert rrvar(result, "m") == 0.0
    assert rrmse(result, "m") == 0.0


def test_two_point_formulas():
    # totals (90, 110), Y=100: RB=0, RRVAR=sqrt(200)/100, RRMSE=RRVAR
    result = make_result(100.0, {"m": [90.0, 110.0]})
    assert rb(result, "m") == 0.0
    assert rrvar(result, "m") == pytest.approx(np.sqrt(200.0) / 100.0, rel=1e-12)
    assert rrmse(result, "m") == pytest.approx(rrvar(result, "m"), rel=1e-12)


def test_zero_truth_rejected():
    result = make_result(0.0, {"m": [1.0, 2.0]})
    with pytest.raises(DataError):
        rb(result, "m")


def test_single_replicate_variance_rejected():
    result = make_result(5.0, {"m": [1.0]})
    with pytest.raises(DataError):
        rrvar(result, "m")


@given(
    st.lists(st.floats(-1e6, 1e6), min_size=2, max_size=40),
    st.floats(1.0, 1e6),
)
@settings(max_examples=60, deadline=None)
def test_rrmse_identity(totals, truth):
    result = make_result(truth, {"m": totals})
    lhs = rrmse(result, "m") ** 2
    rhs = rb(result, "m") ** 2 + rrvar(result, "m") ** 2
    assert lhs == pytest.approx(rhs, rel=1e-12, abs=1e-300)


# Bootstrap summary ------------------------------------------------------------


def test_bootstrap_summary_all_covered():
    result = make_result(
        100.0,
        {"am": [99.0, 101.0, 100.5]},
        v_boot={"am": [4.0, 4.0, 4.0]},
    )
    acc = bootstrap_summary(result, "am")
    assert acc.coverage == 1.0
    assert acc.variance_boot == pytest.approx(4.0)
    assert acc.variance == pytest.approx(np.var([99, 101, 100.5], ddof=1), rel=1e-12)


def test_bootstrap_summary_hand_built_coverage():
    # intervals: 100 +/- 1.96*1 covers; 90 +/- 1.96*1 misses; 100.5 covers
    result = make_result(
        100.0,
        {"am": [100.0, 90.0, 100.5]},
        v_boot={"am": [1.0, 1.0, 1.0]},
    )
    acc = bootstrap_summary(result, "am")
    assert acc.coverage == pytest.approx(2 / 3)


def test_bootstrap_summary_requires_v_boot():
    result = make_result(100.0, {"am": [99.0, 101.0]})
    with pytest.raises(DataError):
        bootstrap_summary(result, "am")


# Ranks --------------------------------------------------------------------


def _measures(mrpe_v, rb_v, rrvar_v, rrmse_v):
    return Measures(mrpe=mrpe_v, rb=rb_v, rrvar=rrvar_v, rrmse=rrmse_v)


def test_rank_strictly_better_method():
    per_pop = {
        p: {
            "a": _measures(0.1, 0.01, 0.1, 0.1),
            "b": _measures(0.2, 0.02, 0.2, 0.2),
        }
        for p in range(1, 6)
    }
    ranks = rank_methods(per_pop)
    assert all(ranks["a"][m] == 1.0 for m in ("mrpe", "rb", "rrvar", "rrmse"))
    assert all(ranks["b"][m] == 2.0 for m in ("mrpe", "rb", "rrvar", "rrmse"))


def test_rank_ties_average():
    per_pop = {
        1: {"a": _measures(0.1, 0.1, 0.1, 0.1), "b": _measures(0.1, 0.1, 0.1, 0.1)}
    }
    ranks = rank_methods(per_pop)
    assert ranks["a"]["mrpe"] == 1.5
    assert ranks["b"]["mrpe"] == 1.5


def test_rank_uses_absolute_bias():
    per_pop = {
        1: {"a": _measures(0.1, -0.5, 0.1, 0.1), "b": _measures(0.1, 0.2, 0.1, 0.1)}
    }
    ranks = rank_methods(per_pop)
    assert ranks["b"]["rb"] == 1.0
    assert ranks["a"]["rb"] == 2.0


@given(st.integers(2, 6), st.integers(1, 4), st.integers(0, 1000))
@settings(max_examples=40, deadline=None)
def test_rank_sums(n_methods, n_pops, seed):
    rng = np.random.default_rng(seed)
    methods = [f"m{i}" for i in range(n_methods)]
    per_pop = {
        p: {
            m: _measures(*rng.choice([0.1, 0.2, 0.3], size=4))
            for m in methods
        }
        for p in range(n_pops)
    }
    ranks = rank_methods(per_pop)
    expected = n_methods * (n_methods + 1) / 2
    for measure in ("mrpe", "rb", "rrvar", "rrmse"):
        assert sum(ranks[m][measure] for m in methods) == pytest.approx(expected)


def test_rank_order_invariance_to_replicate_order():
    rng = np.random.default_rng(3)
    totals = rng.normal(100, 5, 30)
    shuffled = rng.permutation(totals)
    a = compute_measures(make_result(100.0, {"m": totals}), "m")
    b = compute_measures(make_result(100.0, {"m": shuffled}), "m")
    assert a.rb == pytest.approx(b.rb, rel=1e-12)
    assert a.rrvar == pytest.approx(b.rrvar, rel=1e-12)
    assert a.rrmse == pytest.approx(b.rrmse, rel=1e-12)


# CSV ----------------------------------------------------------------------


def test_write_csv_round_trips_floats(tmp_path):
    path = tmp_path / "out.csv"
    rows = [{"a": 1 / 3, "b": "x"}, {"a": 2.0, "b": "y"}]
    write_csv(path, ("a", "b"), rows)
    lines = path.read_text().splitlines()
    assert lines[0] == "a,b"
    assert float(lines[1].split(",")[0]) == 1 / 3

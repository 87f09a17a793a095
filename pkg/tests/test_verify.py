import csv
import json

import numpy as np
import pytest

from sketch_sfa import (
    InvalidInput,
    SpectralSummary,
    VectorHandle,
    WeightTree,
    exact_sfa,
    normalize,
    pairwise_differentiate,
    select_parameters,
)
from sketch_sfa.datagen import timescale_mix
from sketch_sfa.verify import (
    TrialReport,
    chi_square_test,
    davis_kahan_check,
    error_budget_audit,
    sublinearity_audit,
    write_reports,
)


# ---------------------------------------------------------------------------
# chi_square_test
# ---------------------------------------------------------------------------


def test_chi_square_fair_passes():
    h = VectorHandle(WeightTree([1.0, 1.0]))
    rep = chi_square_test(h, np.array([0.5, 0.5]), 20000, np.random.default_rng(0))
    assert rep.passed
    assert rep.observed > 1e-3


def test_chi_square_point_mass():
    h = VectorHandle(WeightTree([1.0, 0.0]))
    rep = chi_square_test(h, np.array([1.0, 0.0]), 5000, np.random.default_rng(1))
    assert rep.passed
    assert rep.extra["statistic"] == 0.0


def test_chi_square_biased_fails():
    # handle draws from (0.36, 0.64) but the claimed distribution is swapped
    h = VectorHandle(WeightTree([3.0, 4.0]))
    rep = chi_square_test(h, np.array([0.64, 0.36]), 20000, np.random.default_rng(2))
    assert not rep.passed


def test_chi_square_forbidden_support_fails():
    h = VectorHandle(WeightTree([1.0, 1.0]))
    rep = chi_square_test(h, np.array([1.0, 0.0]), 1000, np.random.default_rng(3))
    assert not rep.passed
    assert rep.extra["forbidden_hits"] > 0


def test_chi_square_validation():
    h = VectorHandle(WeightTree([1.0, 1.0]))
    rng = np.random.default_rng(4)
    with pytest.raises(InvalidInput):
        chi_square_test(h, np.array([0.5, 0.5, 0.0]), 100, rng)
    with pytest.raises(InvalidInput):
        chi_square_test(h, np.array([0.7, 0.7]), 100, rng)


# ---------------------------------------------------------------------------
# davis_kahan_check
# ---------------------------------------------------------------------------


def test_davis_kahan_identical():
    rng = np.random.default_rng(5)
    m = rng.standard_normal((6, 6))
    a = m @ m.T + 6 * np.diag(np.arange(6.0))
    rep = davis_kahan_check(a, a.copy())
    assert rep.passed
    assert rep.observed == 0.0


def test_davis_kahan_small_perturbation():
    rng = np.random.default_rng(6)
    a = np.diag([2.0, 1.0])
    noise = rng.standard_normal((2, 2))
    rep = davis_kahan_check(a, a + 0.01 * (noise + noise.T))
    assert rep.passed
    assert all(m is None or m >= -1e-9 for m in rep.extra["margins"])


def test_davis_kahan_degenerate_flagged():
    a = np.diag([1.0, 1.0])
    rep = davis_kahan_check(a, a.copy())
    assert rep.passed
    assert rep.extra["flagged_indices"]  # zero gap: skipped, never failed


def test_davis_kahan_near_degenerate_not_failed():
    rng = np.random.default_rng(7)
    a = np.diag([1.0, 1.0 + 1e-6])
    noise = rng.standard_normal((2, 2))
    rep = davis_kahan_check(a, a + 1e-3 * (noise + noise.T))
    # the bound is vacuous here: flagged, never reported as a violation
    assert rep.passed
    assert rep.extra["flagged_indices"]


def test_davis_kahan_validation():
    with pytest.raises(InvalidInput):
        davis_kahan_check(np.eye(2), np.eye(3))
    with pytest.raises(InvalidInput):
        davis_kahan_check(np.array([[0.0, 1.0], [0.0, 0.0]]), np.eye(2))


# ---------------------------------------------------------------------------
# error budget / sublinearity
# ---------------------------------------------------------------------------


def _instance(n=800, seed=0):
    ds = normalize(timescale_mix(n, [0.25, 1.0, 1.3], seed=seed))
    diff = pairwise_differentiate(ds)
    res = exact_sfa(ds.X, diff, 1)
    summ = SpectralSummary.from_oracle(res, diff.Xdot)
    params = select_parameters(0.2, summ, ds.d, 1, seed=seed)
    return ds.X, diff, params


def test_error_budget_audit_structure():
    X, diff, params = _instance()
    reports = error_budget_audit(X, diff, params, seeds=range(3))
    ids = {r.test_id for r in reports}
    assert ids == {f"error-budget-{k}" for k in ("e2", "e3", "e4", "e5", "final")}
    for rep in reports:
        assert rep.seeds == [0, 1, 2]
        assert len(rep.extra["per_seed_observed"]) == 3
        assert rep.extra["pass_count"] <= 3
        assert rep.extra["slack"] > 0


def test_error_budget_final_holds():
    X, diff, params = _instance(n=1500)
    reports = error_budget_audit(X, diff, params, seeds=range(5))
    final = next(r for r in reports if r.test_id == "error-budget-final")
    assert final.passed


def test_sublinearity_degenerate_grid():
    def make(n, seed):
        ds = timescale_mix(4096, [0.25, 1.0, 1.3], seed=seed)
        diff = pairwise_differentiate(ds)
        return ds.X, diff

    rep = sublinearity_audit(make, [4096, 4096], J=1, eps_target=0.2)
    assert rep.passed
    assert rep.observed == pytest.approx(1.0)


def test_sublinearity_requires_grid():
    with pytest.raises(InvalidInput):
        sublinearity_audit(lambda n, s: None, [100])


# ---------------------------------------------------------------------------
# reports
# ---------------------------------------------------------------------------


def test_write_reports(tmp_path):
    reports = [
        TrialReport(test_id="a", passed=True, observed=0.1, bound=0.5, seeds=[0, 1]),
        TrialReport(test_id="b", passed=False, observed=2.0, bound=1.0),
    ]
    jsonl = tmp_path / "reports.jsonl"
    summary = tmp_path / "summary.csv"
    write_reports(reports, jsonl, summary)
    lines = jsonl.read_text().strip().split("\n")
    assert len(lines) == 2
    first = json.loads(lines[0])
    assert first["test_id"] == "a" and first["passed"] is True
    with open(summary) as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["test_id", "passed", "observed", "bound", "runtime"]
    assert rows[2][0] == "b" and rows[2][1] == "0"

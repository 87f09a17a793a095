import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sketch_sfa import CostLedger, DegenerateDistribution, InvalidInput, WeightTree
from sketch_sfa.weight_tree import build_vector, sample_index, update_entry


def test_build_squares():
    t = WeightTree([3.0, 4.0])
    assert t.weights[1] == 25.0
    assert t.weights[t.cap] == 9.0
    assert t.weights[t.cap + 1] == 16.0


def test_build_single_support():
    t = WeightTree([1.0, 0.0, 0.0, 0.0])
    assert t.norm_sq == 1.0


def test_build_matches_naive_sum():
    rng = np.random.default_rng(0)
    v = rng.standard_normal(1024)
    t = build_vector(v)
    naive = sum(x * x for x in v)
    assert abs(t.norm_sq - naive) <= 1e-9 * naive


def test_build_read_count():
    ledger = CostLedger()
    WeightTree(np.ones(100), ledger=ledger)
    assert ledger.snapshot()["entry_reads"] == 100


def test_empty_input_rejected():
    with pytest.raises(InvalidInput):
        WeightTree([])


def test_update_examples():
    t = WeightTree([3.0, 4.0])
    update_entry(t, 1, 0.0)
    assert t.norm_sq == 9.0
    t2 = WeightTree([1.0, 1.0, 1.0, 1.0])
    t2.update(1, 3.0)
    assert t2.norm_sq == 12.0


def test_update_out_of_range():
    t = WeightTree([1.0, 2.0])
    with pytest.raises(IndexError):
        t.update(2, 1.0)
    with pytest.raises(IndexError):
        t.query(5)


def test_many_updates_match_rebuild():
    rng = np.random.default_rng(1)
    v = rng.standard_normal(256)
    t = WeightTree(v)
    for _ in range(500):
        i = int(rng.integers(0, 256))
        x = float(rng.standard_normal())
        t.update(i, x)
        v[i] = x
    fresh = WeightTree(v)
    assert abs(t.norm_sq - fresh.norm_sq) <= 1e-8 * fresh.norm_sq
    assert t.validate()


def test_sample_distribution_3_4():
    t = WeightTree([3.0, 4.0])
    rng = np.random.default_rng(2)
    idx = t.sample_many(40000, rng)
    p1 = np.mean(idx == 1)
    assert abs(p1 - 0.64) < 0.02


def test_sample_point_mass():
    t = WeightTree([1.0, 0.0, 0.0])
    rng = np.random.default_rng(3)
    assert all(sample_index(t, rng) == 0 for _ in range(20))


def test_sample_zero_vector_raises():
    t = WeightTree([0.0, 0.0])
    rng = np.random.default_rng(4)
    with pytest.raises(DegenerateDistribution):
        t.sample(rng)
    with pytest.raises(DegenerateDistribution):
        t.sample_many(5, rng)


def test_sample_many_matches_scalar_distribution():
    rng = np.random.default_rng(5)
    v = rng.standard_normal(37)
    t = WeightTree(v)
    emp = np.bincount(t.sample_many(60000, rng), minlength=37) / 60000
    assert np.abs(emp - t.probabilities()).max() < 0.015


@pytest.mark.parametrize("log_n", [4, 10, 20])
def test_node_touch_bounds(log_n):
    n = 2**log_n
    ledger = CostLedger()
    t = WeightTree(np.ones(n), ledger=ledger)
    rng = np.random.default_rng(6)
    before = ledger.snapshot()["node_touches"]
    t.sample(rng)
    assert ledger.snapshot()["node_touches"] - before <= 2 * log_n + 2
    before = ledger.snapshot()["node_touches"]
    t.update(3, 2.0)
    assert ledger.snapshot()["node_touches"] - before <= log_n + 1


def test_norm_is_exact_constant_time():
    ledger = CostLedger()
    t = WeightTree([1.0, 2.0, 3.0], ledger=ledger)
    before = ledger.snapshot()["node_touches"]
    _ = t.norm_sq
    assert ledger.snapshot()["node_touches"] - before == 1


@settings(max_examples=50, deadline=None)
@given(
    values=st.lists(st.floats(-10, 10, allow_nan=False), min_size=1, max_size=64),
    updates=st.lists(
        st.tuples(st.integers(0, 63), st.floats(-10, 10, allow_nan=False)), max_size=30
    ),
)
def test_parent_sum_invariant_under_updates(values, updates):
    t = WeightTree(values)
    ref = np.zeros(t.n)
    ref[:] = np.asarray(values)
    for i, x in updates:
        i = i % t.n
        t.update(i, x)
        ref[i] = x
    assert t.validate()
    assert abs(t.norm_sq - ref @ ref) <= 1e-9 * max(ref @ ref, 1.0)
    np.testing.assert_allclose(t.to_array(), ref)

import numpy as np
import pytest

from sketch_sfa import CostLedger, DegenerateDistribution, InvalidInput, MatrixSQ, build_matrix
from sketch_sfa import sq_io
from sketch_sfa.weight_tree import WeightTree


def test_row_norms_example():
    m = MatrixSQ([[1.0, 0.0], [0.0, 2.0]])
    assert m.frob_sq == 5.0
    assert m.row_norm_sq(0) == 1.0
    assert m.row_norm_sq(1) == 4.0
    rng = np.random.default_rng(0)
    rows = m.sample_rows(20000, rng)
    assert abs(np.mean(rows == 1) - 0.8) < 0.02


def test_identity_rows_uniform():
    m = MatrixSQ(np.eye(4))
    rng = np.random.default_rng(1)
    freq = np.bincount(m.sample_rows(40000, rng), minlength=4) / 40000
    assert np.abs(freq - 0.25).max() < 0.02


def test_two_stage_entry_frequencies():
    rng = np.random.default_rng(2)
    a = rng.standard_normal((32, 8))
    m = MatrixSQ(a)
    draws = 60000
    counts = np.zeros((32, 8))
    rows = m.sample_rows(draws, rng)
    cols = m.sample_in_rows(rows, rng)
    np.add.at(counts, (rows, cols), 1)
    expected = a**2 / np.sum(a**2)
    assert np.abs(counts / draws - expected).max() < 0.01


def test_update_consistency():
    rng = np.random.default_rng(3)
    a = rng.standard_normal((16, 8))
    m = MatrixSQ(a)
    for _ in range(200):
        i = int(rng.integers(0, 16))
        j = int(rng.integers(0, 8))
        v = float(rng.standard_normal())
        m.update(i, j, v)
        a[i, j] = v
    assert m.validate()
    assert abs(m.frob_sq - np.sum(a**2)) < 1e-8 * np.sum(a**2)
    np.testing.assert_allclose(m.to_array(), a)


def test_query_and_bounds():
    m = MatrixSQ([[1.0, 2.0], [3.0, 4.0]])
    assert m.query(1, 0) == 3.0
    np.testing.assert_allclose(m.query_row(1), [3.0, 4.0])
    np.testing.assert_allclose(m.query_col(1), [2.0, 4.0])
    with pytest.raises(IndexError):
        m.query(2, 0)
    with pytest.raises(IndexError):
        m.query_row(5)
    with pytest.raises(IndexError):
        m.update(0, 2, 1.0)


def test_invalid_and_degenerate():
    with pytest.raises(InvalidInput):
        MatrixSQ(np.zeros((0, 3)))
    with pytest.raises(InvalidInput):
        MatrixSQ(np.ones(4))
    zero = MatrixSQ(np.zeros((3, 3)))
    with pytest.raises(DegenerateDistribution):
        zero.sample_row(np.random.default_rng(0))
    mixed = MatrixSQ([[1.0, 1.0], [0.0, 0.0]])
    with pytest.raises(DegenerateDistribution):
        mixed.sample_in_row(1, np.random.default_rng(0))


def test_build_read_count():
    ledger = CostLedger()
    build_matrix(np.ones((10, 7)), ledger=ledger)
    assert ledger.snapshot()["entry_reads"] == 70


def test_vector_binary_round_trip(tmp_path):
    rng = np.random.default_rng(4)
    t = WeightTree(rng.standard_normal(13))
    path = tmp_path / "v.sqt"
    sq_io.save_vector(t, path)
    loaded = sq_io.load_vector(path)
    np.testing.assert_array_equal(loaded.to_array(), t.to_array())
    assert loaded.norm_sq == pytest.approx(t.norm_sq)


def test_matrix_binary_round_trip(tmp_path):
    rng = np.random.default_rng(5)
    m = MatrixSQ(rng.standard_normal((9, 5)))
    path = tmp_path / "m.sqm"
    sq_io.save_matrix(m, path)
    loaded = sq_io.load_matrix(path)
    np.testing.assert_array_equal(loaded.to_array(), m.to_array())


def test_bad_magic_and_truncation(tmp_path):
    path = tmp_path / "bad.sqt"
    path.write_bytes(b"NOPE" + b"\x00" * 16)
    with pytest.raises(InvalidInput):
        sq_io.load_vector(path)
    good = tmp_path / "trunc.sqm"
    m = MatrixSQ(np.ones((4, 4)))
    sq_io.save_matrix(m, good)
    good.write_bytes(good.read_bytes()[:-8])
    with pytest.raises(InvalidInput):
        sq_io.load_matrix(good)


def test_csv_round_trip(tmp_path):
    rng = np.random.default_rng(6)
    a = rng.standard_normal((7, 3))
    path = tmp_path / "a.csv"
    sq_io.save_csv(a, path, header=["x0", "x1", "x2"])
    back = sq_io.load_csv(path)
    np.testing.assert_array_equal(back, a)
    # headerless files are sniffed too
    sq_io.save_csv(a, path)
    np.testing.assert_array_equal(sq_io.load_csv(path), a)


def test_manifest_round_trip(tmp_path):
    path = tmp_path / "m.json"
    sq_io.write_manifest(path, 10, 3, {"kind": "test", "seed": 7})
    m = sq_io.read_manifest(path)
    assert m["n"] == 10 and m["d"] == 3
    assert m["provenance"]["seed"] == 7

import numpy as np
import pytest

from sketch_sfa import (
    BudgetExceeded,
    Dataset,
    DiffMatrix,
    InvalidInput,
    RankDeficient,
    delta_value,
    exact_sfa,
    normalize,
    pairwise_differentiate,
    quadratic_expand,
)
from sketch_sfa.datagen import blobs, wiskott_signal


# ---------------------------------------------------------------------------
# preprocessing
# ---------------------------------------------------------------------------


def test_normalize_two_points():
    ds = normalize(Dataset(X=np.array([[1.0], [3.0]]), mode="time-series"))
    np.testing.assert_allclose(ds.X[:, 0], [-1.0, 1.0])


def test_normalize_idempotent():
    rng = np.random.default_rng(0)
    ds = normalize(Dataset(X=rng.standard_normal((50, 4)), mode="time-series"))
    again = normalize(ds)
    np.testing.assert_allclose(again.X, ds.X, atol=1e-12)


def test_normalize_moments_and_dropped_columns():
    rng = np.random.default_rng(1)
    x = rng.standard_normal((200, 5)) * 3.0 + 7.0
    x[:, 2] = 4.2  # constant column
    ds = normalize(Dataset(X=x, mode="time-series"))
    assert ds.d == 4
    assert ds.dropped_columns == [2]
    assert np.abs(ds.X.mean(axis=0)).max() <= 1e-12
    assert np.abs(ds.X.std(axis=0) - 1.0).max() <= 1e-9


def test_normalize_needs_two_samples():
    with pytest.raises(InvalidInput):
        normalize(Dataset(X=np.ones((1, 3)), mode="time-series"))


def test_quadratic_expand_examples():
    ds = Dataset(X=np.array([[2.0, 3.0]]), mode="time-series")
    out = quadratic_expand(ds)
    np.testing.assert_allclose(out.X[0], [2.0, 3.0, 4.0, 6.0, 9.0])
    one = quadratic_expand(Dataset(X=np.array([[5.0]]), mode="time-series"))
    np.testing.assert_allclose(one.X[0], [5.0, 25.0])
    three = quadratic_expand(Dataset(X=np.ones((2, 3)), mode="time-series"))
    assert three.d == 9
    with pytest.raises(BudgetExceeded):
        quadratic_expand(Dataset(X=np.ones((2, 3)), mode="time-series"), cap=5)


# ---------------------------------------------------------------------------
# differentiation
# ---------------------------------------------------------------------------


def test_pairwise_single_pair():
    ds = Dataset(
        X=np.array([[0.0, 0.0], [1.0, 1.0]]), labels=np.array([0, 0]), mode="classification"
    )
    diff = pairwise_differentiate(ds, rng=np.random.default_rng(0))
    assert diff.pair_count == 1
    (s, t) = diff.pair_index[0]
    assert s < t
    np.testing.assert_allclose(diff.Xdot[0], ds.X[s] - ds.X[t])
    np.testing.assert_allclose(np.abs(diff.Xdot[0]), [1.0, 1.0])


def test_pairwise_all_pairs_small_class():
    ds = Dataset(X=np.arange(6.0).reshape(3, 2), labels=np.zeros(3), mode="classification")
    diff = pairwise_differentiate(ds, max_pairs_per_class=10, rng=np.random.default_rng(1))
    assert diff.pair_count == 3


def test_pairwise_rows_match_index():
    ds, _ = blobs(100, 4, classes=2, strengths=[3.0], seed=2)
    diff = pairwise_differentiate(ds, max_pairs_per_class=100, rng=np.random.default_rng(2))
    assert diff.pair_count == 200
    for row, (s, t) in zip(diff.Xdot, diff.pair_index):
        np.testing.assert_allclose(row, ds.X[s] - ds.X[t])
    # pairs stay within one class and are distinct
    assert len(set(diff.pair_index)) == 200
    for s, t in diff.pair_index:
        assert ds.labels[s] == ds.labels[t]


def test_pairwise_singleton_class_named():
    ds = Dataset(X=np.ones((3, 2)), labels=np.array([0, 0, 7]), mode="classification")
    with pytest.raises(InvalidInput, match="7"):
        pairwise_differentiate(ds, rng=np.random.default_rng(0))


def test_pairwise_requires_labels_and_rng():
    ds = Dataset(X=np.ones((4, 2)), labels=None, mode="classification")
    with pytest.raises(InvalidInput):
        pairwise_differentiate(ds, rng=np.random.default_rng(0))
    ds2 = Dataset(X=np.ones((4, 2)), labels=np.zeros(4), mode="classification")
    with pytest.raises(InvalidInput):
        pairwise_differentiate(ds2, rng=None)


def test_time_series_consecutive_differences():
    x = np.array([[0.0], [1.0], [4.0]])
    diff = pairwise_differentiate(Dataset(X=x, mode="time-series"))
    np.testing.assert_allclose(diff.Xdot[:, 0], [1.0, 3.0])
    assert diff.pair_index == [(1, 0), (2, 1)]


# ---------------------------------------------------------------------------
# exact_sfa
# ---------------------------------------------------------------------------


def test_decoupled_coordinates():
    rng = np.random.default_rng(3)
    q, _ = np.linalg.qr(rng.standard_normal((12, 3)))
    x = np.sqrt(12.0) * q  # B = X^T X / n = I
    xdot = DiffMatrix(
        Xdot=np.diag([3.0, 1.0, 2.0]), pair_index=[(0, 1), (1, 2), (2, 3)]
    )
    res = exact_sfa(x, xdot, 3)
    # slow directions are the coordinates ordered by ascending diff scale
    perm = np.abs(res.v_slow).argmax(axis=0)
    np.testing.assert_array_equal(perm, [1, 2, 0])
    np.testing.assert_allclose(np.abs(res.v_slow).max(axis=0), 1.0, atol=1e-10)


def _blob_instance(seed=4, n=400, d=6, J=3):
    ds, _ = blobs(n, d, classes=4, seed=seed)
    ds = normalize(ds)
    diff = pairwise_differentiate(ds, max_pairs_per_class=60, rng=np.random.default_rng(seed))
    return ds, diff, exact_sfa(ds.X, diff, J)


def test_output_invariants():
    ds, diff, res = _blob_instance()
    y = res.Y
    assert np.abs(y.mean(axis=0)).max() <= 1e-8
    assert np.abs(y.var(axis=0) - 1.0).max() <= 1e-6
    corr = (y.T @ y) / ds.n
    off = corr - np.diag(np.diag(corr))
    assert np.abs(off).max() <= 1e-6
    wbw = res.W.T @ res.B @ res.W
    assert np.abs(wbw - np.eye(3)).max() <= 1e-6
    assert np.all(np.diff(res.delta_values) >= -1e-12)


def test_delta_matches_result():
    _, diff, res = _blob_instance()
    for j in range(3):
        assert delta_value(res.Y[:, j], diff) == pytest.approx(res.delta_values[j], abs=1e-8)


def test_whitening_identity():
    ds, _, res = _blob_instance()
    lam, vecs = np.linalg.eigh(res.B)
    b_inv_half = (vecs / np.sqrt(lam)) @ vecs.T
    z = ds.X @ b_inv_half
    assert np.abs(z.T @ z / ds.n - np.eye(ds.d)).max() <= 1e-8


def test_interchange_property():
    ds, diff, res = _blob_instance()
    lam, vecs = np.linalg.eigh(res.B)
    b_inv_half = (vecs / np.sqrt(lam)) @ vecs.T
    z = ds.X @ b_inv_half
    zdot_after = np.stack([z[s] - z[t] for s, t in diff.pair_index])
    zdot_before = diff.Xdot @ b_inv_half
    assert np.abs(zdot_after - zdot_before).max() <= 1e-10


def test_optimality_against_random_directions():
    ds, diff, res = _blob_instance()
    rng = np.random.default_rng(5)
    lam, vecs = np.linalg.eigh(res.B)
    b_inv_half = (vecs / np.sqrt(lam)) @ vecs.T
    z = ds.X @ b_inv_half
    for j in range(3):
        basis = res.v_slow[:, :j]
        for _ in range(100):
            u = rng.standard_normal(ds.d)
            u -= basis @ (basis.T @ u)
            u /= np.linalg.norm(u)
            assert delta_value(z @ u, diff) >= res.delta_values[j] - 1e-9


def test_delta_trivial_cases():
    diff = DiffMatrix(Xdot=np.zeros((2, 1)), pair_index=[(0, 1), (2, 3)])
    assert delta_value(np.ones(4), diff) == 0.0
    # feature constant within every class
    y = np.array([2.0, 2.0, -1.0, -1.0])
    assert delta_value(y, DiffMatrix(Xdot=np.zeros((2, 1)), pair_index=[(0, 1), (2, 3)])) == 0.0


def test_delta_hand_computed():
    y = np.array([0.0, 0.0, 1.0, 3.0])
    diff = DiffMatrix(Xdot=np.zeros((2, 2)), pair_index=[(0, 1), (2, 3)])
    assert delta_value(y, diff) == pytest.approx(2.0)


def test_rank_deficiency():
    x = np.ones((10, 2))  # duplicated column
    diff = DiffMatrix(Xdot=np.ones((2, 2)), pair_index=[(0, 1), (1, 2)])
    with pytest.raises(RankDeficient) as exc:
        exact_sfa(x, diff, 1)
    assert exc.value.theta >= 0.0
    res = exact_sfa(x, diff, 1, pseudo_inverse=True)
    assert np.all(np.isfinite(res.W))


def test_j_out_of_range():
    x = np.random.default_rng(6).standard_normal((10, 3))
    diff = DiffMatrix(Xdot=x[1:] - x[:-1], pair_index=[(t + 1, t) for t in range(9)])
    with pytest.raises(InvalidInput):
        exact_sfa(x, diff, 4)
    with pytest.raises(InvalidInput):
        exact_sfa(x, diff, 0)


def test_determinism():
    _, _, res1 = _blob_instance(seed=7)
    _, _, res2 = _blob_instance(seed=7)
    assert res1.to_json() == res2.to_json()


def test_wiskott_slow_feature():
    ds = wiskott_signal(2000)
    t = np.linspace(0.0, 2.0 * np.pi, 2000)
    expanded = normalize(quadratic_expand(normalize(ds)))
    diff = pairwise_differentiate(expanded)
    res = exact_sfa(expanded.X, diff, 1)
    corr = np.corrcoef(res.Y[:, 0], np.sin(t))[0, 1]
    assert abs(corr) >= 0.95

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ispls.data import DataError, Model, MultiStudyData, PenaltySpec, StudyData
from ispls.tuning import (
    MU2_STAR_LEVELS,
    TuningGrid,
    _best_index,
    cross_validate,
    default_grid,
    heldout_mspe,
    init_threshold_scale,
    make_folds,
    split_fold,
)


def _data(seed=0, L=2, n=20, p=6, q=2):
    rng = np.random.default_rng(seed)
    studies = []
    for l in range(L):
        X = rng.normal(size=(n, p))
        beta = np.zeros((p, q))
        beta[:2] = 2.0
        studies.append(StudyData(X, X @ beta + 0.5 * rng.normal(size=(n, q)), f"s{l}"))
    return MultiStudyData(studies)


@settings(max_examples=40, deadline=None)
@given(
    sizes=st.lists(st.integers(min_value=6, max_value=40), min_size=1, max_size=4),
    folds=st.integers(min_value=2, max_value=5),
    seed=st.integers(min_value=0, max_value=2**31),
)
def test_folds_partition_every_study(sizes, folds, seed):
    blocks = make_folds(sizes, folds, seed)
    for n, study_blocks in zip(sizes, blocks):
        assert len(study_blocks) == folds
        joined = np.sort(np.concatenate(study_blocks))
        np.testing.assert_array_equal(joined, np.arange(n))
        lens = [len(b) for b in study_blocks]
        assert max(lens) - min(lens) <= 1 and min(lens) >= 1


def test_folds_are_seeded():
    a = make_folds([10, 12], 3, 5)
    b = make_folds([10, 12], 3, 5)
    c = make_folds([10, 12], 3, 6)
    assert all(np.array_equal(x, y) for sa, sb in zip(a, b) for x, y in zip(sa, sb))
    assert not all(np.array_equal(x, y) for sa, sc in zip(a, c) for x, y in zip(sa, sc))


def test_too_few_rows_rejected():
    with pytest.raises(DataError):
        make_folds([3], 5, 0)
    with pytest.raises(DataError):
        make_folds([3], 2, 0)  # a held-out block of 2 leaves one training row


def test_split_fold_sizes():
    data = _data()
    blocks = make_folds(data.sizes, 4, 0)
    train, test = split_fold(data, blocks, 1)
    for tr, te, full in zip(train, test, data):
        assert tr.n + te.n == full.n and te.n == 5


def test_grid_validation():
    with pytest.raises(ValueError):
        TuningGrid((0.2, 0.1), (0.0,))
    with pytest.raises(ValueError):
        TuningGrid((-0.1,), (0.0,))
    with pytest.raises(ValueError):
        TuningGrid((), (0.0,))
    with pytest.raises(ValueError):
        TuningGrid((0.1,), (0.0,), folds=1)


def test_default_grid_shape():
    data = _data()
    grid = default_grid(data)
    M = init_threshold_scale(data)
    assert len(grid.mu1_values) == 10
    assert grid.mu1_values[0] == pytest.approx(1e-3 * M) and grid.mu1_values[-1] == pytest.approx(M)
    n2 = np.mean(data.sizes.astype(float) ** 2)
    np.testing.assert_allclose(np.array(grid.mu2_values) * n2, MU2_STAR_LEVELS)


def test_heldout_mspe_example():
    X = np.array([[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]])
    Y = np.array([[1.0], [2.0], [4.0]])
    study = StudyData(X, Y)
    # residuals 0, 0, 1
    assert heldout_mspe(study, np.array([[1.0], [2.0]])) == pytest.approx(1 / 3)


def test_tie_break_prefers_larger_values():
    scores = np.array([[1.0, 0.5], [0.5, 0.5], [2.0, 0.7]])
    assert _best_index(scores) == (1, 1)
    assert _best_index(np.ones((2, 3))) == (1, 2)


def test_single_point_grid():
    data = _data()
    res = cross_validate(data, PenaltySpec(), TuningGrid((0.5,), (0.0,), folds=3))
    assert res.best == (0.5, 0.0) and res.scores.shape == (1, 1)
    assert res.per_fold.shape == (1, 1, 3, 2)


def test_null_model_loses():
    data = _data()
    M = init_threshold_scale(data)
    grid = TuningGrid((0.01 * M, 100 * M), (0.0,), folds=4)
    res = cross_validate(data, PenaltySpec(), grid)
    # the larger mu1 removes every variable and predicts zero
    null = np.mean([np.mean(s.Y**2) for s in data])
    assert res.scores[1, 0] == pytest.approx(null, rel=0.5)
    assert res.best[0] == grid.mu1_values[0]


def test_scores_are_deterministic():
    data = _data(3)
    grid = TuningGrid((0.1, 1.0), (0.0, 0.01), folds=3, seed=4)
    a = cross_validate(data, PenaltySpec(), grid)
    b = cross_validate(data, PenaltySpec(), grid)
    np.testing.assert_array_equal(a.scores, b.scores)


def test_unknown_prediction_mode():
    with pytest.raises(ValueError):
        cross_validate(_data(), PenaltySpec(), TuningGrid((0.1,), (0.0,)), prediction="oracle")


def test_duplicated_grid_point_scores_identically():
    data = _data(5)
    res = cross_validate(data, PenaltySpec(), TuningGrid((0.3, 0.3), (0.0,), folds=3))
    assert res.scores[0, 0] == res.scores[1, 0]


def test_threshold_scale_matches_brute_force_and_is_quadratic_in_y():
    data = _data(6)
    want = 0.0
    for s in data:
        Z = s.X.T @ s.Y
        # leading left singular vector by the eigen-decomposition of Z Z'
        vals, vecs = np.linalg.eigh(Z @ Z.T)
        w0 = vecs[:, -1]
        for j in range(s.p):
            want = max(want, abs(sum(Z[j, k] * (Z[:, k] @ w0) for k in range(s.q))))
    assert init_threshold_scale(data) == pytest.approx(want, rel=1e-12)
    doubled = MultiStudyData([StudyData(s.X, 2 * s.Y, s.id) for s in data])
    # Z = X'Y enters Z Z' w twice, so doubling Y quadruples the scale
    assert init_threshold_scale(doubled) == pytest.approx(4 * want, rel=1e-12)
    np.testing.assert_allclose(default_grid(doubled).mu1_values, 4 * np.array(default_grid(data).mu1_values))


def test_heldout_rows_never_trained_on():
    data = _data(7, n=17)
    blocks = make_folds(data.sizes, 4, 1)
    # tag each row by an index column so subsets reveal their origin
    tagged = MultiStudyData([StudyData(np.column_stack([s.X, np.arange(s.n)]), s.Y, s.id) for s in data])
    for k in range(4):
        train, test = split_fold(tagged, blocks, k)
        for tr, te in zip(train, test):
            assert not set(tr.X[:, -1]) & set(te.X[:, -1])
            assert len(set(tr.X[:, -1]) | set(te.X[:, -1])) == 17


def test_fixed_conventions_in_resolved_spec():
    spec = PenaltySpec(model=Model.HETEROGENEITY, mu1=0.4).resolved(3)
    assert spec.a == 6 and spec.tau2 == 0.5
    assert spec.outer_b(3) == pytest.approx(0.5 * 3 * 6 * 0.4**2)

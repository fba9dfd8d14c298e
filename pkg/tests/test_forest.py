import numpy as np
import pytest

from tablenet.forest import ForestParams, RandomForestModel, Tree, rf_predict, rf_predict_proba, train_rf


def _imbalanced(n, seed, prior=0.15):
    rng = np.random.default_rng(seed)
    y = (rng.random(n) < prior).astype(int)
    X = rng.standard_normal((n, 4))
    X[:, 0] += 1.2 * y
    X[:, 1] += 0.8 * y
    return X, y


def _leaf(counts):
    c = np.asarray([counts], dtype=float)
    return Tree(np.array([-1]), np.array([0.0]), np.array([-1]), np.array([-1]), c)


def test_separable_one_feature():
    X = np.arange(20, dtype=float)[:, None]
    y = (X[:, 0] >= 10).astype(int)
    m = train_rf(X, y, ForestParams(num_trees=10, min_samples_split=2, seed=1))
    assert (rf_predict(m, X) == y).all()


def test_min_samples_split_n_gives_single_leaves():
    X, y = _imbalanced(80, 0)
    m = train_rf(X, y, ForestParams(num_trees=8, min_samples_split=len(y), seed=0))
    assert all(len(t.feature) == 1 for t in m.trees)
    # every tree predicts the class distribution of its own bootstrap sample
    for i, t in enumerate(m.trees):
        boot = np.random.default_rng([0, i]).integers(0, len(y), size=len(y))
        assert np.array_equal(t.counts[0], np.bincount(y[boot], minlength=2))


def test_degenerate_prior_model_predicts_prior_exactly():
    prior = np.array([3.0, 1.0])
    m = RandomForestModel([_leaf(prior)] * 3, ForestParams(3), 2, np.zeros(2))
    assert np.array_equal(rf_predict_proba(m, np.zeros((4, 2))), np.tile(prior / 4, (4, 1)))


def test_unanimous_pure_leaves():
    m = RandomForestModel([_leaf([0, 5]), _leaf([0, 2])], ForestParams(2), 2, np.zeros(1))
    assert rf_predict_proba(m, [[0.0]])[0, 1] == 1.0


def test_hand_built_three_trees():
    stump = Tree(np.array([0, -1, -1]), np.array([0.5, 0, 0]), np.array([1, -1, -1]), np.array([2, -1, -1]),
                 np.array([[4.0, 4.0], [3.0, 1.0], [1.0, 3.0]]))
    m = RandomForestModel([stump, _leaf([1, 1]), _leaf([0, 4])], ForestParams(3), 2, np.zeros(1))
    got = rf_predict_proba(m, [[0.0], [1.0]])
    want = np.array([[(0.75 + 0.5 + 0.0) / 3, (0.25 + 0.5 + 1.0) / 3],
                     [(0.25 + 0.5 + 0.0) / 3, (0.75 + 0.5 + 1.0) / 3]])
    assert np.allclose(got, want, atol=1e-15)


def test_determinism_and_workers():
    X, y = _imbalanced(200, 3)
    a = train_rf(X, y, ForestParams(num_trees=12, min_samples_split=4, seed=7))
    b = train_rf(X, y, ForestParams(num_trees=12, min_samples_split=4, seed=7), workers=3)
    assert a.to_json() == b.to_json()


def test_structure_invariants():
    X, y = _imbalanced(300, 4)
    m = train_rf(X, y, ForestParams(num_trees=10, min_samples_split=9, seed=2))
    for t, i in zip(m.trees, range(10)):
        boot = np.random.default_rng([2, i]).integers(0, len(y), size=len(y))
        Xb, yb = X[boot], y[boot]
        members = {0: np.arange(len(yb))}
        for node in range(len(t.feature)):
            idx = members[node]
            assert t.counts[node].sum() == len(idx)
            assert np.array_equal(t.counts[node], np.bincount(yb[idx], minlength=2))
            if t.feature[node] >= 0:
                assert len(np.unique(boot[idx])) >= 9
                mask = Xb[idx, t.feature[node]] <= t.threshold[node]
                members[t.left[node]] = idx[mask]
                members[t.right[node]] = idx[~mask]
                assert mask.any() and (~mask).any()
    p = rf_predict_proba(m, X)
    assert np.allclose(p.sum(axis=1), 1.0)


def test_adjacent_float_split_has_nonempty_children():
    X = np.array([[1.0], [np.nextafter(1.0, 2.0)]] * 3)
    m = train_rf(X, [0, 1] * 3, ForestParams(num_trees=5, seed=0))
    assert all((t.counts.sum(axis=1) > 0).all() for t in m.trees)


def test_nan_imputed_with_training_means():
    X = np.array([[0.0, np.nan], [1.0, 2.0], [2.0, 4.0], [3.0, np.nan]])
    m = train_rf(X, [0, 0, 1, 1], ForestParams(num_trees=3, seed=0))
    assert np.allclose(m.feature_means, [1.5, 3.0])
    assert np.isfinite(rf_predict_proba(m, [[np.nan, np.nan]])).all()


def test_single_class_degenerates(caplog):
    m = train_rf(np.ones((5, 2)), [1] * 5, ForestParams(num_trees=3), n_classes=2)
    assert np.array_equal(rf_predict(m, np.zeros((2, 2))), [1, 1])
    assert "single-class" in caplog.text


def test_json_round_trip(tmp_path):
    X, y = _imbalanced(100, 5)
    m = train_rf(X, y, ForestParams(num_trees=4, seed=1))
    m.save(tmp_path / "rf.json")
    again = RandomForestModel.load(tmp_path / "rf.json")
    assert np.array_equal(rf_predict_proba(m, X), rf_predict_proba(again, X))


@pytest.mark.xfail(strict=True, reason=(
    "at tau=0.5 larger min_samples_split pulls leaf estimates towards the minority prior, "
    "so held-out recall falls"))
def test_recall_non_decreasing_in_min_samples_split():
    X, y = _imbalanced(600, 0)
    Xt, yt = _imbalanced(2000, 1)
    n = len(y)
    recalls = []
    for mss in (2, n // 16, n // 8, n // 4, n // 2):
        m = train_rf(X, y, ForestParams(num_trees=50, min_samples_split=mss, seed=0))
        recalls.append(float((rf_predict_proba(m, Xt)[:, 1] >= 0.5)[yt == 1].mean()))
    assert all(b >= a for a, b in zip(recalls, recalls[1:])), recalls

import numpy as np
import pandas as pd
import pytest
from hypothesis import given, settings, strategies as st

from tlp.learners import (
    ColumnMismatchError, LearnerSpec, predict_scores, select_features_cfs, smote_balance, train,
)
from tlp.evaluation import compute_auc


@pytest.fixture(scope="module")
def toy():
    rng = np.random.default_rng(0)
    n = 400
    x1 = rng.normal(size=n)
    cat = rng.choice(["a", "b", "c"], size=n)
    noise = rng.normal(size=n)
    y = (x1 + (cat == "a") + rng.normal(scale=0.5, size=n)) > 0.5
    return pd.DataFrame({"x1": x1, "cat": cat, "noise": noise}), y


@pytest.mark.parametrize("kind", ["RF", "LR", "NN"])
def test_learners_rank_signal(toy, kind):
    X, y = toy
    model = train(LearnerSpec(kind, seed=1), X[:300], y[:300])
    scores = predict_scores(model, X[300:])
    assert scores.shape == (100,) and np.all((scores >= 0) & (scores <= 1))
    assert compute_auc(y[300:], scores) > 0.75
    again = predict_scores(train(LearnerSpec(kind, seed=1), X[:300], y[:300]), X[300:])
    assert np.array_equal(scores, again)


def test_unseen_category_and_column_checks(toy):
    X, y = toy
    model = train(LearnerSpec("LR"), X, y)
    Z = X.head(3).copy()
    Z.loc[:, "cat"] = "zzz"
    assert predict_scores(model, Z).shape == (3,)
    with pytest.raises(ColumnMismatchError):
        predict_scores(model, X[["x1", "noise"]])


def test_single_class_training_gives_constant_scores(toy):
    X, _ = toy
    model = train(LearnerSpec("RF"), X, np.ones(len(X), dtype=bool))
    assert model.degenerate
    assert np.all(predict_scores(model, X) == 1.0)


def test_unknown_kind():
    with pytest.raises(ValueError):
        LearnerSpec("SVM")


def test_cfs_keeps_signal_and_drops_noise(toy):
    X, y = toy
    chosen = select_features_cfs(X, y)
    assert "x1" in chosen and "noise" not in chosen


@settings(max_examples=40)
@given(st.integers(0, 10_000), st.integers(2, 40), st.integers(1, 6))
def test_smote_properties(seed, n_min, dims):
    rng = np.random.default_rng(seed)
    n_maj = n_min + int(rng.integers(0, 60))
    X = rng.normal(size=(n_min + n_maj, dims))
    y = np.r_[np.ones(n_min), np.zeros(n_maj)].astype(int)
    Xb, yb, prov = smote_balance(X, y, seed=seed, return_provenance=True)
    assert (yb == 1).sum() == (yb == 0).sum()
    assert Xb[:len(X)].tobytes() == X.tobytes()
    for row, (a, b) in zip(Xb[len(X):], prov):
        assert y[a] == 1 and y[b] == 1
        assert np.all(row >= np.minimum(X[a], X[b]) - 1e-9) and np.all(row <= np.maximum(X[a], X[b]) + 1e-9)


def test_smote_needs_two_classes():
    with pytest.raises(ValueError):
        smote_balance(np.zeros((3, 2)), np.zeros(3))

from __future__ import annotations

import json

import numpy as np
import pytest

from depsignal.corpus import DP, ND
from depsignal.errors import ConfigError, DataError
from depsignal.features import (
    FEATURE_COLUMNS, StubDemographicsProvider, StubPersonalityProvider, assemble_user_features, load_lexicon,
)
from depsignal.fusion import (
    ALGORITHMS, LOGREG, RANDOM_FOREST, SCORE, SCORE_COLUMN, SVM, FusionDataset, build_fusion_dataset, evaluate,
    parse_algorithm, parse_groups, permutation_importance, ranked, read_importance_csv, split_dataset,
    subset_columns, train_fusion, write_importance_csv, write_metrics_json,
)
from depsignal.scorer import UserScore

from conftest import distinct_words, make_user


def toy(n=200, seed=0, cols=("a", "b")):
    rng = np.random.default_rng(seed)
    y = np.arange(n) % 2
    X = rng.normal(0, 0.3, (n, len(cols)))
    X[:, 0] += 3 * y
    return FusionDataset(tuple(f"u{i:04d}" for i in range(n)), X, y, tuple(cols), {})


def test_parse_groups():
    assert parse_groups("V,D,SCORE") == {"V", "D", SCORE}
    assert parse_groups(["xlnet_score"]) == {SCORE}
    with pytest.raises(ConfigError):
        parse_groups("V,Q")
    with pytest.raises(ConfigError):
        parse_groups("")


def test_parse_algorithm():
    assert parse_algorithm("svm") == SVM and parse_algorithm("rf") == RANDOM_FOREST
    with pytest.raises(ConfigError):
        parse_algorithm("knn")


@pytest.fixture(scope="module")
def users_and_features():
    users = [make_user(f"u{i:02d}", [distinct_words(60, i)] * 3, label=DP if i % 2 else ND) for i in range(12)]
    users.append(make_user("short", ["just a few words"], label=DP))
    lex = load_lexicon()
    fvs = {u.user_id: assemble_user_features(u, lex, StubPersonalityProvider(), StubDemographicsProvider())
           for u in users}
    labels = {u.user_id: u.label for u in users}
    scores = [UserScore(u.user_id, 0.5, 3) for u in users]
    return users, fvs, labels, scores


def test_all_groups_drop_incomplete(users_and_features):
    _, fvs, labels, scores = users_and_features
    data = build_fusion_dataset(scores, fvs, labels, "V,D,E,P,L,XLNET_SCORE")
    assert len(data) == 12 and "short" not in data.user_ids
    assert data.column_names == FEATURE_COLUMNS + (SCORE_COLUMN,)
    assert not np.isnan(data.X).any()


def test_score_only_single_column(users_and_features):
    _, fvs, labels, scores = users_and_features
    data = build_fusion_dataset(scores, fvs, labels, {SCORE})
    assert data.column_names == (SCORE_COLUMN,) and len(data) == 13


def test_column_order_is_fixed(users_and_features):
    _, fvs, labels, scores = users_and_features
    a = build_fusion_dataset(scores, fvs, labels, "SCORE,L,V")
    b = build_fusion_dataset(scores, fvs, labels, "V,L,SCORE")
    assert a.column_names == b.column_names and np.array_equal(a.X, b.X)


def test_empty_intersection(users_and_features):
    _, fvs, labels, _ = users_and_features
    with pytest.raises(DataError):
        build_fusion_dataset([UserScore("nobody", 0.5, 1)], fvs, labels, "SCORE")


@pytest.mark.parametrize("algo", ALGORITHMS)
def test_separable_toy_fits_perfectly(algo):
    data = toy()
    model = train_fusion(data, algo, seed=0)
    assert evaluate(model, data).accuracy == 1.0


@pytest.mark.parametrize("algo", ALGORITHMS)
def test_deterministic(algo):
    data = toy(seed=1)
    data = FusionDataset(data.user_ids, data.X + np.random.default_rng(5).normal(0, 1.5, data.X.shape), data.y,
                         data.column_names, {})
    a = train_fusion(data, algo, seed=4).predict_proba(data.X)
    b = train_fusion(data, algo, seed=4).predict_proba(data.X)
    assert np.array_equal(a, b)


def test_rbf_kernel_and_tiny_classes():
    data = toy(n=40)
    assert evaluate(train_fusion(data, SVM, kernel="rbf"), data).accuracy == 1.0
    tiny = FusionDataset(("a", "b", "c"), np.array([[0.0], [1.0], [2.0]]), np.array([0, 0, 1]), ("x",), {})
    assert train_fusion(tiny, SVM).predict_proba(tiny.X).shape == (3,)


def test_single_class_rejected():
    data = toy()
    one = FusionDataset(data.user_ids, data.X, np.zeros_like(data.y), data.column_names, {})
    with pytest.raises(DataError):
        train_fusion(one)


def test_standardization_uses_training_statistics():
    data = toy(n=400, seed=2)
    train, test = split_dataset(data, data.user_ids[::4])
    model = train_fusion(train, LOGREG)
    assert np.allclose(model.scaler.mean_, train.X.mean(axis=0))
    z = model.scaler.transform(test.X)
    assert not np.allclose(z.mean(axis=0), 0.0, atol=1e-6)


def test_subset_columns():
    data = toy(cols=("sentiment_pos", "sentiment_neg"))
    data = FusionDataset(data.user_ids, data.X, data.y, data.column_names, {"V": data.column_names})
    assert subset_columns(data, "V").column_names == data.column_names
    with pytest.raises(DataError):
        subset_columns(data, "P")


def planted(n=1000, seed=0):
    rng = np.random.default_rng(seed)
    y = rng.integers(0, 2, n)
    X = np.column_stack([y + rng.normal(0, 0.1, n), rng.normal(0, 1, n), rng.normal(0, 1, n)])
    return FusionDataset(tuple(f"u{i}" for i in range(n)), X, y, ("signal", "noise1", "noise2"), {})


@pytest.mark.parametrize("algo", ALGORITHMS)
def test_planted_feature_ranks_first(algo):
    data = planted()
    model = train_fusion(data, algo, seed=0)
    imps = permutation_importance(model, data, repeats=10, seed=0)
    assert ranked(imps)[0].column == "signal"
    if algo != RANDOM_FOREST:
        assert abs(imps["noise1"].mean_importance) < 0.01


def test_importance_reproducible_and_validated(tmp_path):
    data = planted(300)
    model = train_fusion(data, LOGREG)
    a = permutation_importance(model, data, repeats=10, seed=7)
    assert a == permutation_importance(model, data, repeats=10, seed=7)
    with pytest.raises(ValueError):
        permutation_importance(model, data, repeats=0)
    write_importance_csv(a, tmp_path / "imp.csv")
    assert read_importance_csv(tmp_path / "imp.csv") == a
    assert (tmp_path / "imp.csv").read_text().splitlines()[0] == "column,mean_importance,sd"


def test_metrics_json(tmp_path):
    data = toy()
    rep = evaluate(train_fusion(data, LOGREG), data)
    write_metrics_json(rep, tmp_path / "m.json", algorithm=LOGREG)
    obj = json.loads((tmp_path / "m.json").read_text())
    assert obj["accuracy"] == 1.0 and obj["threshold"] == 0.5 and obj["algorithm"] == LOGREG


def test_mismatched_columns_rejected():
    model = train_fusion(toy(), LOGREG)
    with pytest.raises(DataError):
        evaluate(model, toy(cols=("x", "y")))

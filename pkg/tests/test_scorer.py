from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from depsignal.corpus import DP, SynthSpec, generate_synthetic
from depsignal.errors import DataError
from depsignal.metrics import roc_auc
from depsignal.resources import signal_vocabulary
from depsignal.scorer import (
    BaselineModel, ChunkScore, aggregate_user, cross_fit_scores, import_external_scores, learning_curve, load_model,
    save_model, score_chunks, split_users, train_baseline,
)
from depsignal.textprep import Chunk, chunk_users


@pytest.fixture(scope="module")
def corpus_chunks():
    users = generate_synthetic(SynthSpec(n_dp=150, n_nd=150, seed=11, plant_diagnosis=False))
    rng = np.random.default_rng(0)
    kept, held = split_users([u.user_id for u in users], [u.label for u in users], 0.3, rng)
    train = chunk_users([u for u in users if u.user_id in kept])
    test = chunk_users([u for u in users if u.user_id in held])
    return train, test


def _lr_oracle(chunk, rd=0.08, rn=0.01):
    """Log likelihood ratio from planted-token counts alone."""
    signal = set(signal_vocabulary())
    words = [t for t in chunk.tokens if t.isalpha()]
    k = sum(t in signal for t in words)
    return k * math.log(rd / rn) + (len(words) - k) * math.log((1 - rd) / (1 - rn))


def test_baseline_separates_and_tracks_oracle(corpus_chunks):
    train, test = corpus_chunks
    model = train_baseline(train, seed=0)
    y = [c.label == DP for c in test]
    auc = roc_auc([s.confidence for s in score_chunks(model, test)], y)
    oracle = roc_auc([_lr_oracle(c) for c in test], y)
    assert auc >= 0.90
    assert auc >= oracle - 0.05


def test_training_is_deterministic(corpus_chunks):
    train, _ = corpus_chunks
    a = train_baseline(train[:300], seed=3, epochs=3)
    b = train_baseline(train[:300], seed=3, epochs=3)
    assert np.array_equal(a.weights, b.weights) and a.bias == b.bias


def test_best_epoch_is_argmax_of_validation(corpus_chunks):
    train, _ = corpus_chunks
    m = train_baseline(train[:300], seed=1, epochs=5)
    crit = [(h["val_accuracy"] + h["val_f1"]) / 2 for h in m.history]
    best = max(crit)
    assert m.best_epoch == max(i for i, c in enumerate(crit) if c == best)


def test_single_class_rejected(corpus_chunks):
    train, _ = corpus_chunks
    with pytest.raises(DataError):
        train_baseline([c for c in train if c.label == DP], seed=0)


def test_zero_model_scores_half():
    chunks = [Chunk("u", None, ("a", "b"), 2), Chunk("v", None, ("c",), 1)]
    assert [s.confidence for s in score_chunks(BaselineModel.zeros(), chunks)] == [0.5, 0.5]


def test_pure_signal_chunk_scores_high(corpus_chunks):
    train, _ = corpus_chunks
    model = train_baseline(train, seed=0)
    sig = tuple(signal_vocabulary())[:40]
    (s,) = score_chunks(model, [Chunk("u", None, sig * 7, 280)])
    assert s.confidence > 0.5


def test_empty_chunk_list():
    assert score_chunks(BaselineModel.zeros(), []) == []


def test_scoring_is_pointwise(corpus_chunks):
    _, test = corpus_chunks
    model = train_baseline(corpus_chunks[0][:200], seed=0, epochs=2)
    sub = test[:30]
    fwd = {c.source_tweet_ids: s.confidence for c, s in zip(sub, score_chunks(model, sub))}
    rev = {c.source_tweet_ids: s.confidence for c, s in zip(sub[::-1], score_chunks(model, sub[::-1]))}
    assert fwd == rev


def test_model_round_trip_bit_exact(tmp_path, corpus_chunks):
    train, test = corpus_chunks
    model = train_baseline(train[:200], seed=2, epochs=2)
    save_model(model, tmp_path / "m.bin")
    back = load_model(tmp_path / "m.bin")
    assert np.array_equal(back.weights, model.weights) and back.bias == model.bias
    assert score_chunks(back, test) == score_chunks(model, test)
    assert back.meta() == model.meta()


def test_load_rejects_foreign_file(tmp_path):
    (tmp_path / "x.bin").write_bytes(b"nope" * 10)
    with pytest.raises(DataError):
        load_model(tmp_path / "x.bin")


def test_cross_fit_scores_cover_every_chunk(corpus_chunks):
    train, _ = corpus_chunks
    sub = train[:400]
    scores = cross_fit_scores(sub, folds=3, seed=0, epochs=2)
    assert [s.user_id for s in scores] == [c.user_id for c in sub]
    with pytest.raises(ValueError):
        cross_fit_scores(sub, folds=1)


def _write(tmp_path, text):
    p = tmp_path / "s.csv"
    p.write_text(text)
    return p


def test_import_valid(tmp_path):
    p = _write(tmp_path, "user_id,chunk_index,confidence\nu1,0,0.2\nu1,1,0.4\nu2,0,0.9\n")
    assert import_external_scores(p) == [ChunkScore("u1", 0, 0.2), ChunkScore("u1", 1, 0.4), ChunkScore("u2", 0, 0.9)]


def test_import_with_dates(tmp_path):
    p = _write(tmp_path, "user_id,chunk_index,confidence,mid_date\nu1,0,0.2,2020-02-01\n")
    assert import_external_scores(p)[0].mid_date.isoformat() == "2020-02-01"


def test_import_out_of_range(tmp_path):
    p = _write(tmp_path, "user_id,chunk_index,confidence\nu1,0,0.2\nu1,1,1.5\n")
    with pytest.raises(DataError, match="row 3"):
        import_external_scores(p)


def test_import_duplicate(tmp_path):
    p = _write(tmp_path, "user_id,chunk_index,confidence\nu1,0,0.2\nu1,0,0.3\n")
    with pytest.raises(DataError, match="duplicate"):
        import_external_scores(p)


def test_import_malformed(tmp_path):
    p = _write(tmp_path, "user_id,chunk_index,confidence\nu1,zero,0.2\n")
    with pytest.raises(DataError, match="row 2"):
        import_external_scores(p)


def test_aggregate_examples():
    (u,) = aggregate_user([ChunkScore("u1", i, c) for i, c in enumerate([0.2, 0.4, 0.9])])
    assert u.mean_confidence == pytest.approx(0.5) and u.n_chunks == 3
    assert aggregate_user([ChunkScore("u", 0, 0.3)])[0].mean_confidence == 0.3
    assert aggregate_user([]) == []


@settings(max_examples=100, deadline=None)
@given(st.lists(st.tuples(st.sampled_from("abc"), st.floats(0, 1)), max_size=30))
def test_aggregate_within_range(rows):
    scores = [ChunkScore(u, i, c) for i, (u, c) in enumerate(rows)]
    for agg in aggregate_user(scores):
        mine = [c for u, c in rows if u == agg.user_id]
        assert min(mine) - 1e-12 <= agg.mean_confidence <= max(mine) + 1e-12
        assert agg.n_chunks == len(mine)


def test_learning_curve_rejects_bad_sizes():
    users = generate_synthetic(SynthSpec(n_dp=30, n_nd=30, seed=0))
    with pytest.raises(ValueError):
        learning_curve(users, [0], test_size=10)
    with pytest.raises(DataError):
        learning_curve(users, [100], test_size=10)


def test_learning_curve_rows():
    users = generate_synthetic(SynthSpec(n_dp=40, n_nd=40, seed=0, plant_diagnosis=False))
    rows = learning_curve(users, [20, None], test_size=20, seed=0, epochs=2)
    assert [r["size"] for r in rows] == [20, 60]
    assert all(0 <= r["auc"] <= 1 for r in rows)

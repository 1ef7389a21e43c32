from __future__ import annotations

import json
import random
from dataclasses import replace
from datetime import date

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from depsignal.corpus import (
    DP, ND, SynthSpec, Tweet, UserProfile, UserRecord, dumps_user, generate_synthetic, load_corpus,
    save_corpus, validate_corpus,
)
from depsignal.errors import DataError
from depsignal.resources import signal_vocabulary
from depsignal.textprep import normalize

from conftest import make_user, ts


def test_two_users_round_trip(tmp_path):
    users = [make_user(u, ["a b", "c d", "e f"]) for u in ("u1", "u2")]
    path = tmp_path / "c.jsonl"
    save_corpus(users, path)
    back = load_corpus(path)
    assert [u.user_id for u in back] == ["u1", "u2"]
    assert all(len(u.tweets) == 3 for u in back)
    assert back == users


def test_empty_file(tmp_path):
    path = tmp_path / "empty.jsonl"
    path.write_text("")
    assert load_corpus(path) == []


def test_out_of_order_tweets_are_sorted(tmp_path):
    user = make_user("u1", [f"t{i}" for i in range(30)])
    shuffled = list(user.tweets)
    random.Random(3).shuffle(shuffled)
    path = tmp_path / "c.jsonl"
    save_corpus([user.with_tweets(shuffled)], path)
    (back,) = load_corpus(path)
    assert [t.timestamp for t in back.tweets] == sorted(t.timestamp for t in shuffled)
    assert back.tweets == user.tweets


def test_malformed_line_names_line_number(tmp_path):
    path = tmp_path / "c.jsonl"
    path.write_text(dumps_user(make_user("u1", ["x"])) + "\n{not json\n")
    with pytest.raises(DataError, match="line 2"):
        load_corpus(path)


def test_missing_field_names_line_number(tmp_path):
    path = tmp_path / "c.jsonl"
    path.write_text(json.dumps({"screen_name": "x"}) + "\n")
    with pytest.raises(DataError, match="line 1"):
        load_corpus(path)


def test_duplicate_tweet_id_names_id(tmp_path):
    a = make_user("u1", ["x"])
    b = make_user("u2", ["y"])
    b = b.with_tweets([replace(b.tweets[0], tweet_id="u1-0")])
    path = tmp_path / "c.jsonl"
    save_corpus([a, b], path)
    with pytest.raises(DataError, match="u1-0"):
        load_corpus(path)


def test_validate_clean_corpus():
    users = generate_synthetic(SynthSpec(n_dp=5, n_nd=5, seed=1))
    report = validate_corpus(users)
    assert report.ok and report.n_users == 10


def test_validate_duplicate_tweet_id():
    a = make_user("u1", ["x"])
    b = make_user("u2", ["y"])
    b = b.with_tweets([replace(b.tweets[0], tweet_id="u1-0")])
    report = validate_corpus([a, b])
    assert len(report.violations) == 1 and "u1-0" in report.violations[0]


def test_validate_dp_without_anchor():
    report = validate_corpus([make_user("u1", ["x"], label=DP)])
    assert len(report.violations) == 1 and "anchor_date" in report.violations[0]


def test_generator_is_deterministic(tmp_path):
    spec = SynthSpec(n_dp=10, n_nd=10, seed=5)
    save_corpus(generate_synthetic(spec), tmp_path / "a.jsonl")
    save_corpus(generate_synthetic(spec), tmp_path / "b.jsonl")
    assert (tmp_path / "a.jsonl").read_bytes() == (tmp_path / "b.jsonl").read_bytes()


def test_generator_counts():
    users = generate_synthetic(SynthSpec(n_dp=100, n_nd=100, seed=7))
    assert len(users) == 200
    assert sum(u.label == DP for u in users) == 100
    assert all(u.anchor_date is not None for u in users if u.label == DP)


def test_generator_empty_spec():
    assert generate_synthetic(SynthSpec(n_dp=0, n_nd=0)) == []


def test_generator_rejects_bad_rates():
    with pytest.raises(ValueError):
        generate_synthetic(SynthSpec(signal_rate_dp=1.5))


def test_generator_caps_history_at_200():
    users = generate_synthetic(SynthSpec(n_dp=20, n_nd=20, seed=2))
    assert max(len(u.tweets) for u in users) <= 200


def _per_tweet_counts(users):
    signal = set(signal_vocabulary())
    hits, sizes = [], []
    for u in users:
        for t in u.tweets:
            toks = [w.strip(".!?,") for w in t.text.split() if not w.startswith("@")]
            hits.append(sum(w in signal for w in toks))
            sizes.append(len(toks))
    return np.array(hits, float), np.array(sizes, float)


@pytest.mark.parametrize("seed", [0, 1])
def test_planted_signal_rate_within_three_standard_errors(seed):
    spec = SynthSpec(n_dp=100, n_nd=100, seed=seed, plant_diagnosis=False)
    users = generate_synthetic(spec)
    for label, rate in ((DP, spec.signal_rate_dp), (ND, spec.signal_rate_nd)):
        hits, sizes = _per_tweet_counts([u for u in users if u.label == label])
        ratio = hits.sum() / sizes.sum()
        # signal arrives in bursts within tweets, so tweets are the sampling clusters
        se = np.sqrt(np.sum((hits - rate * sizes) ** 2)) / sizes.sum()
        assert abs(ratio - rate) < 3 * se, (label, ratio, rate, se)


def test_dp_diagnosis_is_planted():
    users = generate_synthetic(SynthSpec(n_dp=50, n_nd=0, seed=3))
    for u in users:
        text = " ".join(t.text for t in u.tweets) + " " + u.profile.description
        assert "depression" in text.lower()


def test_generated_text_normalizes():
    users = generate_synthetic(SynthSpec(n_dp=2, n_nd=2, seed=4))
    assert all(normalize(t.text) for u in users for t in u.tweets)


_texts = st.text(alphabet=st.characters(blacklist_categories=("Cs",)), max_size=40)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.tuples(_texts, st.integers(0, 10 ** 8), st.booleans(), st.lists(st.sampled_from("abc"), max_size=3)),
                max_size=6),
       _texts, st.sampled_from([None, DP, ND]))
def test_round_trip_property(tmp_path_factory, tweets, description, label):
    anchor = date(2020, 3, 1) if label == DP else None
    recs = sorted(
        (Tweet(f"t{i}", "u", ts("2020-01-01", secs), text, tuple(m), reply, "NY")
         for i, (text, secs, reply, m) in enumerate(tweets)),
        key=lambda t: (t.timestamp, t.tweet_id),
    )
    user = UserRecord(UserProfile("u", "s", "d", description, "loc", "NY"), tuple(recs), label, anchor)
    path = tmp_path_factory.mktemp("rt") / "c.jsonl"
    save_corpus([user], path)
    assert load_corpus(path) == [user]

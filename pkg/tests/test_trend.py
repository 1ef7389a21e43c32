from __future__ import annotations

import math
import warnings
from datetime import date, timedelta

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from depsignal.corpus import DP, ND
from depsignal.errors import ConfigError
from depsignal.scorer import ChunkScore
from depsignal.trend import (
    ALL, PER_BIN, DatedScore, TrendSeries, TrendWarning, assign_bins, build_series, dated_scores, geo_trend,
    group_trend, moving_average, n_bins, read_series_csv, series_from_points, step_contrast, trimmed_collection,
    write_series_csv,
)

from conftest import make_user

JAN1 = date(2020, 1, 1)

# 20 scores over Jan 1-12; hand computation below
FIXTURE = [
    (1, 0.10), (1, 0.20), (2, 0.30), (3, 0.40), (3, 0.95),
    (4, 0.50), (5, 0.60), (5, 0.05), (6, 0.70), (6, 0.45),
    (7, 0.25), (8, 0.35), (8, 0.99), (9, 0.55), (9, 0.65),
    (10, 0.15), (11, 0.75), (11, 0.80), (12, 0.85), (12, 0.02),
]
# global trim drops floor(0.1 * 20) = 2 from each end: 0.02, 0.05 and 0.95, 0.99
#   bin 0 (Jan 1-3):   0.10 0.20 0.30 0.40 -> 0.25
#   bin 1 (Jan 4-6):   0.50 0.60 0.70 0.45 -> 0.5625
#   bin 2 (Jan 7-9):   0.25 0.35 0.55 0.65 -> 0.45
#   bin 3 (Jan 10-12): 0.15 0.75 0.80 0.85 -> 0.6375
# window 5 over 4 bins: radii 0, 1, 1, 0
HAND_RAW = (0.25, 0.5625, 0.45, 0.6375)
HAND_SMOOTHED = (0.25, (0.25 + 0.5625 + 0.45) / 3, (0.5625 + 0.45 + 0.6375) / 3, 0.6375)


def fixture_scores(values=None):
    values = values or [v for _, v in FIXTURE]
    return [DatedScore(f"u{i:02d}", JAN1 + timedelta(days=d - 1), v) for i, ((d, _), v) in enumerate(zip(FIXTURE, values))]


def test_hand_fixture():
    s = build_series(fixture_scores(), JAN1, date(2020, 1, 12), 3, 0.10, 5)
    assert s.bin_start_dates == (JAN1, date(2020, 1, 4), date(2020, 1, 7), date(2020, 1, 10))
    assert s.bin_counts == (4, 4, 4, 4)
    assert np.allclose(s.raw_means, HAND_RAW, rtol=0, atol=1e-12)
    assert np.allclose(s.smoothed, HAND_SMOOTHED, rtol=0, atol=1e-12)


def test_top_decile_replacement_is_invariant():
    ref = build_series(fixture_scores(), JAN1, date(2020, 1, 12))
    pts = [(JAN1 + timedelta(days=d - 1), 1e6 if v in (0.95, 0.99) else v, f"u{i}") for i, (d, v) in enumerate(FIXTURE)]
    got = series_from_points(pts, JAN1, date(2020, 1, 12))
    assert got.raw_means == ref.raw_means and got.smoothed == ref.smoothed
    assert trimmed_collection(list(range(9)) + [1e6]) == list(range(1, 9))


@pytest.mark.parametrize("day,expected", [(date(2020, 1, 5), 1), (JAN1, 0), (date(2020, 1, 22), 7)])
def test_bin_arithmetic(day, expected):
    assert list(assign_bins([DatedScore("u", day, 0.5)], JAN1, 3)) == [expected]


def test_early_scores_warn():
    with pytest.warns(TrendWarning, match="2 scores"):
        bins = assign_bins([DatedScore("u", date(2019, 12, 30), 0.1)] * 2 + [DatedScore("u", JAN1, 0.1)], JAN1)
    assert list(bins) == [0]


def test_trimmed_collection_examples():
    assert trimmed_collection(list(range(10)), 0.10) == list(range(1, 9))
    assert trimmed_collection([5, 1, 3, 2, 4], 0.10) == [1, 2, 3, 4, 5]
    assert trimmed_collection([], 0.10) == []
    with pytest.raises(ValueError):
        trimmed_collection([1], 0.5)


def test_moving_average_examples():
    assert moving_average([1, 2, 3, 4, 5, 6, 7], 5)[2] == 3
    assert moving_average([1, 2, 3, 4, 5, 6, 7], 5)[0] == 1
    assert moving_average([0.4] * 6, 5) == pytest.approx([0.4] * 6, abs=1e-15)
    with pytest.raises(ValueError):
        moving_average([1, 2], 4)


@settings(max_examples=200, deadline=None)
@given(st.lists(st.floats(0, 1), min_size=1, max_size=40), st.sampled_from([1, 3, 5, 7]))
def test_smoothing_is_convex(series, window):
    for i, v in enumerate(moving_average(series, window)):
        r = min(window // 2, i, len(series) - 1 - i)
        part = series[i - r : i + r + 1]
        assert min(part) - 1e-12 <= v <= max(part) + 1e-12


_dated = st.lists(st.tuples(st.integers(-3, 40), st.floats(0, 1)), min_size=1, max_size=60)


@settings(max_examples=150, deadline=None)
@given(_dated, st.integers(1, 7), st.sampled_from([0.0, 0.1, 0.25]), st.sampled_from(["global", "per_bin"]))
def test_series_invariants(rows, bin_days, trim, scope):
    scores = [DatedScore(f"u{i}", JAN1 + timedelta(days=d), v) for i, (d, v) in enumerate(rows)]
    end = JAN1 + timedelta(days=30)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", TrendWarning)
        s = build_series(scores, JAN1, end, bin_days, trim, 5, scope)
        doubled = build_series(scores + scores, JAN1, end, bin_days, trim, 5, scope)
    if s is None:
        return
    assert len(s) == len(s.raw_means) == len(s.smoothed) == len(s.bin_counts) == math.ceil(31 / bin_days)
    assert all(0 <= m <= 1 for m in s.raw_means)
    assert [d for d in s.bin_start_dates] == [JAN1 + timedelta(days=b * bin_days) for b in range(len(s))]
    # replicating every score leaves the means unchanged, provided the trim count
    # scales with n (floor(t * 2n) = 2 floor(t * n))
    n = sum(1 for sc in scores if JAN1 <= sc.date <= end)
    if scope == "global" and math.floor(trim * 2 * n) == 2 * math.floor(trim * n):
        assert np.allclose(doubled.raw_means, s.raw_means, atol=1e-12)
    if trim == 0.0:
        assert np.allclose(doubled.raw_means, s.raw_means, atol=1e-12)


def test_replication_with_integral_trim():
    s = build_series(fixture_scores(), JAN1, date(2020, 1, 12))
    d = build_series(fixture_scores() * 2, JAN1, date(2020, 1, 12))
    assert d.raw_means == s.raw_means and d.bin_counts == tuple(2 * c for c in s.bin_counts)


def test_empty_bins_carry_forward():
    scores = [DatedScore("a", JAN1, 0.2), DatedScore("b", date(2020, 1, 10), 0.6)]
    s = build_series(scores, JAN1, date(2020, 1, 12), 3, 0.0, 1)
    assert s.raw_means == (0.2, 0.2, 0.2, 0.6) and s.bin_counts == (1, 0, 0, 1)
    s = build_series([DatedScore("b", date(2020, 1, 10), 0.6)], JAN1, date(2020, 1, 12), 3, 0.0, 1)
    assert s.raw_means == (0.6,) * 4 and s.bin_counts == (0, 0, 0, 1)


def test_per_bin_scope_recorded():
    s = build_series(fixture_scores(), JAN1, date(2020, 1, 12), trim_scope=PER_BIN)
    assert s.metadata["trim_scope"] == PER_BIN
    assert s.bin_counts == (5, 5, 5, 5)  # floor(0.1 * 5) = 0 per bin


def _cohort_scores(conf_dp=0.8, conf_nd=None):
    out = [DatedScore(f"d{i}", JAN1 + timedelta(days=i), conf_dp, {"cohort": DP}) for i in range(30)]
    if conf_nd is not None:
        out += [DatedScore(f"n{i}", JAN1 + timedelta(days=i), conf_nd, {"cohort": ND}) for i in range(30)]
    return out


def test_constant_group_is_flat():
    series = group_trend(_cohort_scores(0.8, 0.3), "cohort", JAN1, date(2020, 1, 30))
    assert set(series) == {DP, ND}
    assert all(v == pytest.approx(0.8) for v in series[DP].smoothed)
    assert all(v == pytest.approx(0.3) for v in series[ND].smoothed)


def test_empty_group_absent():
    assert set(group_trend(_cohort_scores(), "cohort", JAN1, date(2020, 1, 30))) == {DP}


def test_unknown_group_key():
    with pytest.raises(ConfigError):
        group_trend(_cohort_scores(), "region", JAN1, date(2020, 1, 30))


def _geo(counts):
    users, scores = [], []
    for st_code, n in counts.items():
        for i in range(n):
            uid = f"{st_code}{i}"
            users.append(make_user(uid, [], state=st_code))
            scores.append(DatedScore(uid, JAN1 + timedelta(days=i % 20), (i % 10) / 10))
    return users, scores


def test_geo_excludes_small_states():
    users, scores = _geo({"NY": 600, "CA": 400})
    res = geo_trend(users, scores, {"NY", "CA"}, JAN1, date(2020, 1, 20), min_users=550)
    assert set(res.series) == {"NY", ALL} and res.excluded == {"CA": 400}


def test_geo_three_states():
    users, scores = _geo({"NY": 5, "CA": 6, "TX": 7})
    res = geo_trend(users, scores, {"NY", "CA", "TX"}, JAN1, date(2020, 1, 20), min_users=1)
    assert set(res.series) == {"NY", "CA", "TX", ALL}


def test_geo_all_equals_single_state():
    users, scores = _geo({"FL": 30})
    res = geo_trend(users, scores, {"FL"}, JAN1, date(2020, 1, 20), min_users=1)
    assert res.series[ALL].raw_means == res.series["FL"].raw_means
    assert res.series[ALL].smoothed == res.series["FL"].smoothed


def test_dated_scores_attach_keys():
    users = [make_user("a", [], label=DP, state="NY"), make_user("b", [])]
    got = dated_scores([ChunkScore("a", 0, 0.4, JAN1), ChunkScore("b", 0, 0.5, JAN1), ChunkScore("a", 1, 0.1)], users)
    assert [s.group_keys for s in got] == [{"cohort": DP, "state": "NY"}, {}]


def test_confidence_range_enforced():
    with pytest.raises(ValueError):
        DatedScore("u", JAN1, 1.5)


def test_series_csv_round_trip(tmp_path):
    s = build_series(fixture_scores(), JAN1, date(2020, 1, 12))
    write_series_csv(s, tmp_path / "t.csv")
    back = read_series_csv(tmp_path / "t.csv")
    assert (back.bin_start_dates, back.raw_means, back.smoothed, back.bin_counts) == (
        s.bin_start_dates, s.raw_means, s.smoothed, s.bin_counts)
    assert (tmp_path / "t.csv").read_text().splitlines()[0] == "bin_start,raw_mean,smoothed,count"


def test_step_contrast():
    flat = TrendSeries(tuple(JAN1 + timedelta(days=3 * i) for i in range(10)), (0.5, 0.6) * 5, (0.55,) * 10, (1,) * 10)
    before, after, z = step_contrast(flat, JAN1 + timedelta(days=15))
    assert before == after == 0.55 and z == 0
    raw = (0.2, 0.22, 0.21, 0.2, 0.6, 0.62, 0.61, 0.6)
    step = TrendSeries(tuple(JAN1 + timedelta(days=3 * i) for i in range(8)), raw, tuple(moving_average(raw, 1)), (1,) * 8)
    assert step_contrast(step, JAN1 + timedelta(days=12))[2] > 3
    assert n_bins(JAN1, date(2020, 5, 22), 3) == 48

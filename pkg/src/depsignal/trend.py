"""Binned, trimmed and smoothed depression trend series by cohort and by state."""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field
from datetime import date, timedelta
from typing import Iterable, Mapping, Sequence

import numpy as np

from .corpus import UserRecord
from .errors import ConfigError
from .scorer import ChunkScore

GLOBAL = "global"
PER_BIN = "per_bin"
TRIM_SCOPES = (GLOBAL, PER_BIN)
ALL = "ALL"


class TrendWarning(UserWarning):
    pass


@dataclass(frozen=True)
class DatedScore:
    user_id: str
    date: date
    confidence: float
    group_keys: Mapping[str, str] = field(default_factory=dict)

    def __post_init__(self):
        if not (0.0 <= self.confidence <= 1.0):
            raise ValueError(f"confidence {self.confidence} outside [0, 1]")


@dataclass(frozen=True)
class TrendSeries:
    bin_start_dates: tuple[date, ...]
    raw_means: tuple[float, ...]
    smoothed: tuple[float, ...]
    bin_counts: tuple[int, ...]
    metadata: Mapping[str, object] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.bin_start_dates)


def n_bins(start: date, end: date, bin_days: int) -> int:
    return math.ceil(((end - start).days + 1) / bin_days)


def bin_index(d: date, start: date, bin_days: int) -> int:
    return (d - start).days // bin_days


def assign_bins(scores: Iterable[DatedScore], start: date, bin_days: int = 3) -> dict[int, list[DatedScore]]:
    """Group scores by ``floor((date - start) / bin_days)``.

    Scores dated before ``start`` are dropped and counted in a TrendWarning.
    """
    if bin_days < 1:
        raise ValueError("bin_days must be >= 1")
    bins: dict[int, list[DatedScore]] = {}
    rejected = 0
    for s in scores:
        if s.date < start:
            rejected += 1
            continue
        bins.setdefault(bin_index(s.date, start, bin_days), []).append(s)
    if rejected:
        warnings.warn(f"{rejected} scores dated before {start.isoformat()} were rejected", TrendWarning, stacklevel=2)
    return dict(sorted(bins.items()))


def _trim_count(n: int, trim_fraction: float) -> int:
    if not (0.0 <= trim_fraction < 0.5):
        raise ValueError("trim_fraction must be in [0, 0.5)")
    return math.floor(trim_fraction * n)


def trimmed_collection(scores: Sequence[float], trim_fraction: float = 0.10) -> list[float]:
    """Sort ascending and drop ``floor(trim_fraction * n)`` values from each end."""
    k = _trim_count(len(scores), trim_fraction)
    values = sorted(scores)
    return values[k : len(values) - k]


def trim_scores(scores: Sequence[DatedScore], trim_fraction: float = 0.10) -> list[DatedScore]:
    """Trimmed collection of dated scores; ties ordered by (confidence, date, user_id)."""
    k = _trim_count(len(scores), trim_fraction)
    ordered = sorted(scores, key=lambda s: (s.confidence, s.date, s.user_id))
    return ordered[k : len(ordered) - k]


def moving_average(series: Sequence[float], window: int = 5) -> list[float]:
    """Centered moving average; near the edges the window shrinks symmetrically."""
    if window < 1 or window % 2 == 0:
        raise ValueError("window must be an odd integer >= 1")
    x = np.asarray(series, dtype=float)
    n = len(x)
    half = window // 2
    out = []
    for i in range(n):
        r = min(half, i, n - 1 - i)
        out.append(float(x[i - r : i + r + 1].mean()))
    return out


def _fill_empty(means: list[float | None]) -> list[float]:
    """Carry the previous mean into empty bins; leading empties take the first mean."""
    first = next(m for m in means if m is not None)
    out, prev = [], first
    for m in means:
        prev = m if m is not None else prev
        out.append(prev)
    return out


def series_from_points(
    points: Sequence[tuple[date, float, str]],
    start: date,
    end: date,
    bin_days: int = 3,
    trim_fraction: float = 0.10,
    window: int = 5,
    trim_scope: str = GLOBAL,
) -> TrendSeries | None:
    """Numeric core of :func:`build_series` over ``(date, value, tiebreak)`` points.

    Values need not lie in [0, 1]. Trimming orders ties by (value, date, tiebreak).
    Returns None when no point falls in ``[start, end]``.
    """
    if trim_scope not in TRIM_SCOPES:
        raise ConfigError(f"trim_scope must be one of {TRIM_SCOPES}")
    if end < start:
        raise ConfigError("end date precedes start date")
    if bin_days < 1:
        raise ValueError("bin_days must be >= 1")
    if window < 1 or window % 2 == 0:
        raise ValueError("window must be an odd integer >= 1")
    early = sum(1 for p in points if p[0] < start)
    if early:
        warnings.warn(f"{early} scores dated before {start.isoformat()} were rejected", TrendWarning, stacklevel=2)
    in_range = [p for p in points if start <= p[0] <= end]
    if trim_scope == GLOBAL:
        k = _trim_count(len(in_range), trim_fraction)
        in_range = sorted(in_range, key=lambda p: (p[1], p[0], p[2]))[k : len(in_range) - k]
    nb = n_bins(start, end, bin_days)
    bins: list[list[float]] = [[] for _ in range(nb)]
    for d, v, _ in in_range:
        bins[bin_index(d, start, bin_days)].append(v)
    means: list[float | None] = []
    counts = []
    for vals in bins:
        if trim_scope == PER_BIN:
            vals = trimmed_collection(vals, trim_fraction)
        counts.append(len(vals))
        means.append(math.fsum(vals) / len(vals) if vals else None)
    if all(m is None for m in means):
        return None
    raw = _fill_empty(means)
    return TrendSeries(
        bin_start_dates=tuple(start + timedelta(days=b * bin_days) for b in range(nb)),
        raw_means=tuple(raw),
        smoothed=tuple(moving_average(raw, window)),
        bin_counts=tuple(counts),
        metadata={
            "start": start.isoformat(), "end": end.isoformat(), "bin_days": bin_days,
            "trim_fraction": trim_fraction, "trim_scope": trim_scope, "window": window,
            "empty_bins": "carry previous mean forward, count 0",
        },
    )


def build_series(
    scores: Sequence[DatedScore],
    start: date,
    end: date,
    bin_days: int = 3,
    trim_fraction: float = 0.10,
    window: int = 5,
    trim_scope: str = GLOBAL,
) -> TrendSeries | None:
    """Trim, bin, average and smooth one collection of scores; None when nothing is in range.

    With the global scope the trim runs over every in-range score before
    binning; with ``per_bin`` each bin is trimmed on its own.
    """
    points = [(s.date, s.confidence, s.user_id) for s in scores]
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", TrendWarning)
        series = series_from_points(points, start, end, bin_days, trim_fraction, window, trim_scope)
    for w in caught:
        warnings.warn(w.message, w.category, stacklevel=2)
    return series


def group_trend(
    scores: Sequence[DatedScore],
    group_key: str,
    start: date,
    end: date,
    bin_days: int = 3,
    trim_fraction: float = 0.10,
    window: int = 5,
    trim_scope: str = GLOBAL,
) -> dict[str, TrendSeries]:
    """One series per value of ``group_key``; groups with no in-range scores are omitted."""
    if scores and not any(group_key in s.group_keys for s in scores):
        raise ConfigError(f"unknown group key {group_key!r}")
    groups: dict[str, list[DatedScore]] = {}
    for s in scores:
        if group_key in s.group_keys:
            groups.setdefault(s.group_keys[group_key], []).append(s)
    out = {}
    for value in sorted(groups):
        series = build_series(groups[value], start, end, bin_days, trim_fraction, window, trim_scope)
        if series is not None:
            out[value] = series
    return out


@dataclass
class GeoTrendResult:
    series: dict[str, TrendSeries]
    excluded: dict[str, int]  # state -> user count, below min_users
    user_counts: dict[str, int]


def geo_trend(
    users: Sequence[UserRecord],
    scores: Sequence[DatedScore],
    states: Iterable[str],
    start: date,
    end: date,
    min_users: int = 550,
    bin_days: int = 3,
    trim_fraction: float = 0.10,
    window: int = 5,
    trim_scope: str = GLOBAL,
) -> GeoTrendResult:
    """Per-state series for states with at least ``min_users`` users, plus ALL.

    ALL aggregates every user with a state code, selected or not.
    """
    state_of = {u.user_id: u.state_code for u in users if u.state_code}
    counts: dict[str, int] = {}
    for st in state_of.values():
        counts[st] = counts.get(st, 0) + 1
    wanted = sorted({s.upper() for s in states})
    kept = [s for s in wanted if counts.get(s, 0) >= min_users]
    excluded = {s: counts.get(s, 0) for s in wanted if s not in kept}
    by_state: dict[str, list[DatedScore]] = {}
    geo = []
    for sc in scores:
        st = state_of.get(sc.user_id)
        if st is None:
            continue
        geo.append(sc)
        by_state.setdefault(st, []).append(sc)
    series = {}
    for st in kept:
        s = build_series(by_state.get(st, []), start, end, bin_days, trim_fraction, window, trim_scope)
        if s is not None:
            series[st] = s
    all_series = build_series(geo, start, end, bin_days, trim_fraction, window, trim_scope)
    if all_series is not None:
        series[ALL] = all_series
    return GeoTrendResult(series, excluded, {s: counts.get(s, 0) for s in wanted})


def dated_scores(
    chunk_scores: Iterable[ChunkScore],
    users: Sequence[UserRecord],
    cohort_key: str = "cohort",
    state_key: str = "state",
) -> list[DatedScore]:
    """Attach each chunk score's mid date and its user's cohort and state."""
    info = {u.user_id: u for u in users}
    out = []
    for s in chunk_scores:
        if s.mid_date is None:
            continue
        keys = {}
        u = info.get(s.user_id)
        if u is not None:
            if u.label:
                keys[cohort_key] = u.label
            if u.state_code:
                keys[state_key] = u.state_code
        out.append(DatedScore(s.user_id, s.mid_date, s.confidence, keys))
    return out


def write_series_csv(series: TrendSeries, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["bin_start", "raw_mean", "smoothed", "count"])
        for d, r, s, c in zip(series.bin_start_dates, series.raw_means, series.smoothed, series.bin_counts):
            w.writerow([d.isoformat(), repr(r), repr(s), c])


def read_series_csv(path) -> TrendSeries:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    return TrendSeries(
        tuple(date.fromisoformat(r["bin_start"]) for r in rows),
        tuple(float(r["raw_mean"]) for r in rows),
        tuple(float(r["smoothed"]) for r in rows),
        tuple(int(r["count"]) for r in rows),
    )


def step_contrast(series: TrendSeries, split: date) -> tuple[float, float, float]:
    """(before mean, after mean, z) of the smoothed series either side of ``split``.

    Smoothed neighbours share raw bins, so the standard error of the
    difference is the Welch error computed from the raw bin means, which
    are independent across bins. z is inf when both sides are constant.
    """
    after = np.array([d >= split for d in series.bin_start_dates])
    if after.sum() < 2 or (~after).sum() < 2:
        raise ValueError("need at least two bins on each side of the split")
    sm = np.asarray(series.smoothed)
    raw = np.asarray(series.raw_means)
    ra, rb = raw[~after], raw[after]
    se = math.sqrt(ra.var(ddof=1) / len(ra) + rb.var(ddof=1) / len(rb))
    before_mean, after_mean = float(sm[~after].mean()), float(sm[after].mean())
    diff = after_mean - before_mean
    z = diff / se if se > 0 else (math.inf if diff > 0 else -math.inf if diff < 0 else 0.0)
    return before_mean, after_mean, float(z)

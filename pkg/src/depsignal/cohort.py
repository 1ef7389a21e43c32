"""Self-reported depression cohort identification and matched control sampling."""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field, replace
from datetime import date, timedelta
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np

from .corpus import DP, ND, UserRecord
from .errors import ConfigError, DataError
from .resources import data_path

TWEET = "TWEET"
DESCRIPTION = "DESCRIPTION"
NONE = "NONE"

_APOSTROPHES = str.maketrans({"’": "'", "‘": "'", "ʼ": "'"})


@dataclass(frozen=True)
class PatternSet:
    """Diagnosis phrase templates; ``{X}`` marks the optional descriptor slot."""

    tweet_templates: tuple[str, ...]
    description_templates: tuple[str, ...] = ()
    descriptor_words: tuple[str, ...] = ("",)
    exclusion_description_terms: tuple[str, ...] = ("practitioner", "counselor")
    false_positive_phrases: tuple[str, ...] = ("economic depression", "great depression")

    def __post_init__(self):
        if not self.false_positive_phrases:
            raise ConfigError("false_positive_phrases must not be empty")
        missing = {"economic depression", "great depression"} - {p.lower() for p in self.false_positive_phrases}
        if missing:
            raise ConfigError(f"false_positive_phrases must include {sorted(missing)}")
        try:
            self.tweet_regexes
            self.description_regexes
        except re.error as exc:
            raise ConfigError(f"pattern does not compile: {exc}") from exc

    @cached_property
    def _descriptor_group(self) -> str:
        words = sorted({w.strip() for w in self.descriptor_words if w.strip()}, key=len, reverse=True)
        if not words:
            return ""
        alt = "|".join(re.escape(w).replace(r"\ ", r"\s+") for w in words)
        return rf"(?:(?:{alt})\s+)?"

    def _compile(self, template: str) -> re.Pattern:
        pattern = template.replace(" ", r"\s+").replace("{X}", self._descriptor_group)
        return re.compile(pattern, re.IGNORECASE)

    @cached_property
    def tweet_regexes(self) -> tuple[re.Pattern, ...]:
        return tuple(self._compile(t) for t in self.tweet_templates)

    @cached_property
    def description_regexes(self) -> tuple[re.Pattern, ...]:
        return self.tweet_regexes + tuple(self._compile(t) for t in self.description_templates)

    @cached_property
    def false_positive_regex(self) -> re.Pattern:
        alt = "|".join(re.escape(p).replace(r"\ ", r"\s+") for p in self.false_positive_phrases)
        return re.compile(rf"\b(?:{alt})\b", re.IGNORECASE)

    def to_json(self) -> dict:
        return {
            "tweet_templates": list(self.tweet_templates),
            "description_templates": list(self.description_templates),
            "descriptor_words": list(self.descriptor_words),
            "exclusion_description_terms": list(self.exclusion_description_terms),
            "false_positive_phrases": list(self.false_positive_phrases),
        }


def load_patterns(path=None) -> PatternSet:
    """Read a pattern file; the packaged default when ``path`` is None."""
    path = path or data_path("patterns.json")
    try:
        with open(path, encoding="utf-8") as fh:
            obj = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read pattern file {path}: {exc}") from exc
    fields = (
        "tweet_templates", "description_templates", "descriptor_words",
        "exclusion_description_terms", "false_positive_phrases",
    )
    unknown = set(obj) - set(fields)
    if unknown:
        raise ConfigError(f"unknown pattern fields: {sorted(unknown)}")
    return PatternSet(**{k: tuple(obj[k]) for k in fields if k in obj})


@dataclass(frozen=True)
class MatchResult:
    matched: bool
    source: str = NONE
    matched_text: str | None = None
    matched_tweet_id: str | None = None
    matched_date: date | None = None


NO_MATCH = MatchResult(False)


def redact_false_positives(text: str, patterns: PatternSet) -> str:
    """Blank out false-positive phrase spans with underscores (length preserving)."""
    return patterns.false_positive_regex.sub(lambda m: "_" * len(m.group()), text)


def match_depression_signal(text: str, patterns: PatternSet, context: str = TWEET) -> MatchResult:
    """Find the first diagnosis phrase in ``text`` in reading order.

    False-positive phrases such as "great depression" are redacted before
    matching. In DESCRIPTION context the description-only templates are
    tried as well.
    """
    if context not in (TWEET, DESCRIPTION):
        raise ValueError(f"unknown context {context!r}")
    if not text:
        return NO_MATCH
    clean = redact_false_positives(text.translate(_APOSTROPHES), patterns)
    regexes = patterns.tweet_regexes if context == TWEET else patterns.description_regexes
    best = None
    for rx in regexes:
        m = rx.search(clean)
        if m and (best is None or m.start() < best.start() or (m.start() == best.start() and m.end() > best.end())):
            best = m
    if best is None:
        return NO_MATCH
    return MatchResult(True, context, text[best.start() : best.end()])


def has_exclusion_term(description: str, patterns: PatternSet) -> bool:
    low = description.lower()
    return any(term.lower() in low for term in patterns.exclusion_description_terms)


def mentions_depression(text: str, patterns: PatternSet, context: str = TWEET) -> bool:
    """The control-exclusion test: the bare word "depression" in any casing, or any phrase match."""
    if "depression" in text.lower():
        return True
    return match_depression_signal(text, patterns, context).matched


@dataclass
class CohortReport:
    n_candidates: int = 0
    n_matched_tweet: int = 0
    n_matched_description: int = 0
    n_excluded_practitioner: int = 0
    n_dp: int = 0
    n_nd: int = 0
    reference_date: date | None = None
    excluded_user_ids: list[str] = field(default_factory=list)

    def to_json(self) -> dict:
        d = dict(self.__dict__)
        d["reference_date"] = self.reference_date.isoformat() if self.reference_date else None
        return d


def build_dp_cohort(
    users: Sequence[UserRecord],
    patterns: PatternSet,
    window_days: int = 90,
    tweet_cap: int = 200,
    reference_date: date | None = None,
    strip_diagnosis: bool = True,
    report: CohortReport | None = None,
) -> list[UserRecord]:
    """Select self-reported DP users and window their histories.

    A tweet match anchors the window at the earliest matching tweet's date;
    a description-only match anchors it at ``reference_date`` (default: the
    newest tweet date in ``users``). History is cut to
    ``[anchor - window_days, anchor]``, diagnosis tweets are removed when
    ``strip_diagnosis``, and the newest ``tweet_cap`` tweets are kept.
    Output is ordered by user_id.
    """
    if reference_date is None:
        dates = [t.timestamp.date() for u in users for t in u.tweets]
        reference_date = max(dates) if dates else None
    report = report if report is not None else CohortReport()
    report.n_candidates = len(users)
    report.reference_date = reference_date

    cohort = []
    for user in sorted(users, key=lambda u: u.user_id):
        diag_ids = set()
        first: MatchResult = NO_MATCH
        for t in user.tweets:
            r = match_depression_signal(t.text, patterns, TWEET)
            if r.matched:
                diag_ids.add(t.tweet_id)
                if not first.matched:
                    first = replace(r, matched_tweet_id=t.tweet_id, matched_date=t.timestamp.date())
        if first.matched:
            anchor = first.matched_date
        elif match_depression_signal(user.profile.description, patterns, DESCRIPTION).matched:
            anchor = reference_date
        else:
            continue
        if has_exclusion_term(user.profile.description, patterns):
            report.n_excluded_practitioner += 1
            report.excluded_user_ids.append(user.user_id)
            continue
        if anchor is None:
            continue
        if first.matched:
            report.n_matched_tweet += 1
        else:
            report.n_matched_description += 1
        lo = anchor - timedelta(days=window_days)
        kept = [
            t for t in user.tweets
            if lo <= t.timestamp.date() <= anchor and not (strip_diagnosis and t.tweet_id in diag_ids)
        ]
        kept = kept[-tweet_cap:] if tweet_cap is not None else kept
        cohort.append(replace(user, tweets=tuple(kept), label=DP, anchor_date=anchor))
    report.n_dp = len(cohort)
    return cohort


def is_clean_control(user: UserRecord, patterns: PatternSet, history: int = 200) -> bool:
    if mentions_depression(user.profile.description, patterns, DESCRIPTION):
        return False
    recent = user.tweets[-history:] if history else user.tweets
    return not any(mentions_depression(t.text, patterns, TWEET) for t in recent)


def sample_control(
    users: Sequence[UserRecord],
    dp_ids: Iterable[str],
    n: int,
    patterns: PatternSet,
    seed: int,
    tweet_cap: int = 200,
) -> list[UserRecord]:
    """Uniformly sample ``n`` clean ND users not in ``dp_ids``, deterministic per seed."""
    dp_ids = set(dp_ids)
    pool = sorted(
        (u for u in users if u.user_id not in dp_ids and is_clean_control(u, patterns, tweet_cap)),
        key=lambda u: u.user_id,
    )
    if n < 0:
        raise ValueError("n must be >= 0")
    if len(pool) < n:
        raise DataError(f"control pool has only {len(pool)} eligible users, {n} requested")
    rng = np.random.default_rng(seed)
    picked = sorted(rng.choice(len(pool), size=n, replace=False).tolist())
    out = []
    for i in picked:
        u = pool[i]
        tweets = u.tweets[-tweet_cap:] if tweet_cap else u.tweets
        out.append(replace(u, tweets=tuple(tweets), label=ND, anchor_date=None))
    return out

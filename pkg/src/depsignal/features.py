"""User-level feature families: sentiment, lexicon categories, engagement,
personality and demographics, plus the rank-sum group comparison."""

from __future__ import annotations

import csv
import hashlib
import json
import math
from dataclasses import dataclass, field
from typing import Mapping, Protocol, Sequence

import numpy as np

from .corpus import PERSONALITY_CALIBRATION, TRAITS, Tweet, UserRecord
from .errors import ConfigError
from .resources import data_path
from .textprep import ALLCAPS, ELONGATED, SPECIAL_TOKENS, is_word, normalize

FEATURE_CATEGORIES = (
    "analytic", "clout", "authentic", "tone", "i", "posemo", "negemo", "anx",
    "anger", "sad", "swear", "death", "bio", "power", "work",
)
COMPOSITE_CATEGORIES = ("analytic", "clout", "authentic", "tone")
AGE_BINS = ("<=18", "19-29", "30-39", ">=40")

NEGATION_WINDOW = 3
EMPHASIS_BOOST = 0.25
MAX_VALENCE = 4.0
MIN_PERSONALITY_WORDS = 100


@dataclass(frozen=True)
class Composite:
    intercept: float
    weights: Mapping[str, float]


@dataclass
class Lexicon:
    categories: dict[str, tuple[str, ...]]
    valence: dict[str, float] = field(default_factory=dict)
    boosters: dict[str, float] = field(default_factory=dict)
    negators: frozenset[str] = frozenset()
    composites: dict[str, Composite] = field(default_factory=dict)

    def __post_init__(self):
        for name, comp in self.composites.items():
            if name in self.categories:
                raise ConfigError(f"composite {name!r} shadows a base category")
            for base in comp.weights:
                if base not in self.categories:
                    raise ConfigError(f"composite {name!r} references unknown category {base!r}")
        for w, v in self.valence.items():
            if not math.isfinite(v):
                raise ConfigError(f"non-finite valence for {w!r}")
        self._exact: dict[str, list[str]] = {}
        self._prefix: list[tuple[str, str]] = []
        for cat, entries in self.categories.items():
            for e in entries:
                if e.endswith("*"):
                    self._prefix.append((e[:-1], cat))
                else:
                    self._exact.setdefault(e, []).append(cat)
        self._cache: dict[str, frozenset[str]] = {}

    def categories_of(self, word: str) -> frozenset[str]:
        hit = self._cache.get(word)
        if hit is None:
            cats = set(self._exact.get(word, ()))
            cats.update(cat for prefix, cat in self._prefix if word.startswith(prefix))
            hit = self._cache[word] = frozenset(cats)
        return hit

    def missing_feature_categories(self) -> list[str]:
        have = set(self.categories) | set(self.composites)
        return [c for c in FEATURE_CATEGORIES if c not in have]


def lexicon_from_json(obj: Mapping) -> Lexicon:
    try:
        comps = {
            name: Composite(float(spec.get("intercept", 0.0)), {k: float(v) for k, v in spec["weights"].items()})
            for name, spec in obj.get("composites", {}).items()
        }
        return Lexicon(
            categories={k: tuple(v) for k, v in obj["categories"].items()},
            valence={k: float(v) for k, v in obj.get("valence", {}).items()},
            boosters={k: float(v) for k, v in obj.get("boosters", {}).items()},
            negators=frozenset(obj.get("negators", ())),
            composites=comps,
        )
    except (KeyError, TypeError, AttributeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"malformed lexicon: {exc!r}") from exc


def load_lexicon(path=None) -> Lexicon:
    """Load a lexicon file; the packaged starter lexicon when ``path`` is None."""
    path = path or data_path("lexicon.json")
    try:
        with open(path, encoding="utf-8") as fh:
            obj = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read lexicon {path}: {exc}") from exc
    return lexicon_from_json(obj)


# ---------------------------------------------------------------------------
# sentiment


def score_sentiment(tokens: Sequence[str], lexicon: Lexicon) -> tuple[float, float]:
    """Rule-based positive/negative scores in [0, 1].

    Each valence word contributes ``|valence| / 4`` to the side given by its
    sign. A negator among the three preceding words flips the side, a booster
    directly before the word shifts ``|valence|``, and an ``<allcaps>`` or
    ``<elongated>`` marker right after it adds 0.25; the magnitude is clamped
    to [0, 4]. Sums are divided by the number of words.
    """
    pos = neg = 0.0
    words: list[str] = []
    n = len(tokens)
    for i, tok in enumerate(tokens):
        if not is_word(tok):
            continue
        v = lexicon.valence.get(tok)
        if v is not None and v != 0.0:
            mag = abs(v)
            if words and words[-1] in lexicon.boosters:
                mag += lexicon.boosters[words[-1]]
            j = i + 1
            while j < n and tokens[j] in SPECIAL_TOKENS:
                if tokens[j] in (ALLCAPS, ELONGATED):
                    mag += EMPHASIS_BOOST
                    break
                j += 1
            mag = min(max(mag, 0.0), MAX_VALENCE)
            sign = 1.0 if v > 0 else -1.0
            if any(w in lexicon.negators for w in words[-NEGATION_WINDOW:]):
                sign = -sign
            if sign > 0:
                pos += mag / MAX_VALENCE
            else:
                neg += mag / MAX_VALENCE
        words.append(tok)
    if not words:
        return 0.0, 0.0
    return pos / len(words), neg / len(words)


# ---------------------------------------------------------------------------
# lexicon categories


def count_categories(tokens: Sequence[str], lexicon: Lexicon) -> dict[str, float]:
    """Category rates per 100 words, with composites evaluated on the base rates.

    Composite values are clipped to [0, 100].
    """
    counts = dict.fromkeys(lexicon.categories, 0)
    n_words = 0
    for tok in tokens:
        if not is_word(tok):
            continue
        n_words += 1
        for cat in lexicon.categories_of(tok):
            counts[cat] += 1
    if n_words == 0:
        rates = dict.fromkeys(counts, 0.0)
        rates.update(dict.fromkeys(lexicon.composites, 0.0))
        return rates
    rates = {c: 100.0 * k / n_words for c, k in counts.items()}
    for name, comp in lexicon.composites.items():
        value = comp.intercept + sum(w * rates[b] for b, w in comp.weights.items())
        rates[name] = min(max(value, 0.0), 100.0)
    return rates


# ---------------------------------------------------------------------------
# engagement


@dataclass(frozen=True)
class Engagement:
    prop_tweets_with_mentions: float
    log_responses: float
    log_unique_mentions: float
    log_mentions: float
    log_tweets: float

    def as_tuple(self):
        return (
            self.prop_tweets_with_mentions, self.log_responses, self.log_unique_mentions,
            self.log_mentions, self.log_tweets,
        )


ENGAGEMENT_FIELDS = (
    "prop_tweets_with_mentions", "log_responses", "log_unique_mentions", "log_mentions", "log_tweets",
)


def _log_count(n: int) -> float:
    return math.log10(n + 0.1)


def engagement_features(tweets: Sequence[Tweet]) -> Engagement:
    n = len(tweets)
    with_mentions = sum(1 for t in tweets if t.mentioned_user_ids)
    responses = sum(1 for t in tweets if t.is_reply)
    unique = len({m for t in tweets for m in t.mentioned_user_ids})
    total = sum(len(t.mentioned_user_ids) for t in tweets)
    return Engagement(
        prop_tweets_with_mentions=with_mentions / n if n else 0.0,
        log_responses=_log_count(responses),
        log_unique_mentions=_log_count(unique),
        log_mentions=_log_count(total),
        log_tweets=_log_count(n),
    )


# ---------------------------------------------------------------------------
# providers


class PersonalityProvider(Protocol):
    def personality(self, user: UserRecord, text: str) -> dict[str, float] | None: ...


class DemographicsProvider(Protocol):
    def demographics(self, user: UserRecord) -> tuple[int, str] | None: ...


def _user_rng(user_id: str, seed: int, salt: str) -> np.random.Generator:
    digest = hashlib.sha256(f"{salt}:{seed}:{user_id}".encode()).digest()
    return np.random.default_rng(int.from_bytes(digest[:8], "little"))


def _beta_params(mean: float, sd: float) -> tuple[float, float]:
    var = sd * sd
    common = mean * (1.0 - mean) / var - 1.0
    if common <= 0:
        raise ConfigError(f"no beta distribution has mean {mean} and sd {sd}")
    return mean * common, (1.0 - mean) * common


class StubPersonalityProvider:
    """Deterministic stand-in for a text-based personality service.

    Scores are Beta draws seeded by a hash of ``user_id`` whose means and
    standard deviations match ``calibration``.
    """

    def __init__(self, seed: int = 0, calibration: Mapping[str, tuple[float, float]] | None = None):
        self.seed = seed
        self.calibration = dict(calibration or PERSONALITY_CALIBRATION)
        self._params = {t: _beta_params(*self.calibration[t]) for t in TRAITS}

    def personality(self, user: UserRecord, text: str = "") -> dict[str, float] | None:
        rng = _user_rng(user.user_id, self.seed, "personality")
        return {t: float(rng.beta(*self._params[t])) for t in TRAITS}


class StubDemographicsProvider:
    """Deterministic gender/age-bin stand-in; ``unavailable_rate`` mimics lookup failures."""

    age_probs = (0.2, 0.45, 0.2, 0.15)

    def __init__(self, seed: int = 0, unavailable_rate: float = 0.0):
        self.seed = seed
        self.unavailable_rate = unavailable_rate

    def demographics(self, user: UserRecord) -> tuple[int, str] | None:
        rng = _user_rng(user.user_id, self.seed, "demographics")
        if rng.random() < self.unavailable_rate:
            return None
        gender = int(rng.random() < 0.5)
        age = AGE_BINS[int(rng.choice(len(AGE_BINS), p=self.age_probs))]
        return gender, age


# ---------------------------------------------------------------------------
# assembly


@dataclass(frozen=True)
class FeatureVector:
    user_id: str
    sentiment_pos: float
    sentiment_neg: float
    category_rates: Mapping[str, float]
    engagement: Engagement
    personality: Mapping[str, float] | None
    gender: int | None
    age_onehot: tuple[int, int, int, int] | None
    word_count: int
    complete: bool

    def as_row(self) -> dict[str, float | None]:
        row: dict[str, float | None] = {
            "sentiment_pos": self.sentiment_pos,
            "sentiment_neg": self.sentiment_neg,
        }
        row["gender"] = self.gender
        for name, flag in zip(AGE_COLUMNS, self.age_onehot or (None,) * 4):
            row[name] = flag
        row.update(zip(ENGAGEMENT_FIELDS, self.engagement.as_tuple()))
        for t in TRAITS:
            row[t] = self.personality[t] if self.personality else None
        for c in FEATURE_CATEGORIES:
            row[f"liwc_{c}"] = self.category_rates.get(c, 0.0)
        return row


AGE_COLUMNS = ("age_le18", "age_19_29", "age_30_39", "age_ge40")

FEATURE_GROUPS: dict[str, tuple[str, ...]] = {
    "V": ("sentiment_pos", "sentiment_neg"),
    "D": ("gender",) + AGE_COLUMNS,
    "E": ENGAGEMENT_FIELDS,
    "P": TRAITS,
    "L": tuple(f"liwc_{c}" for c in FEATURE_CATEGORIES),
}
FEATURE_COLUMNS = tuple(c for g in ("V", "D", "E", "P", "L") for c in FEATURE_GROUPS[g])


def assemble_user_features(
    user: UserRecord,
    lexicon: Lexicon,
    personality_provider: PersonalityProvider,
    demographics_provider: DemographicsProvider,
) -> FeatureVector:
    tokens: list[str] = []
    for t in user.tweets:
        tokens.extend(normalize(t.text))
    n_words = sum(1 for t in tokens if is_word(t))
    pos, neg = score_sentiment(tokens, lexicon)
    rates = count_categories(tokens, lexicon)
    personality = None
    if n_words >= MIN_PERSONALITY_WORDS:
        personality = personality_provider.personality(user, " ".join(t.text for t in user.tweets))
    demo = demographics_provider.demographics(user)
    gender = age = None
    if demo is not None:
        gender, age_bin = demo
        age = tuple(int(b == age_bin) for b in AGE_BINS)
    return FeatureVector(
        user_id=user.user_id,
        sentiment_pos=pos,
        sentiment_neg=neg,
        category_rates={c: rates.get(c, 0.0) for c in FEATURE_CATEGORIES},
        engagement=engagement_features(user.tweets),
        personality=personality,
        gender=gender,
        age_onehot=age,  # type: ignore[arg-type]
        word_count=n_words,
        complete=personality is not None and demo is not None,
    )


def write_features_csv(vectors: Sequence[FeatureVector], path, labels: Mapping[str, str] | None = None) -> None:
    cols = ("user_id", "label", "complete", "word_count") + FEATURE_COLUMNS
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(cols)
        for v in vectors:
            row = v.as_row()
            w.writerow(
                [v.user_id, (labels or {}).get(v.user_id, ""), int(v.complete), v.word_count]
                + ["" if row[c] is None else repr(float(row[c])) for c in FEATURE_COLUMNS]
            )


def read_features_csv(path) -> tuple[dict[str, dict[str, float]], dict[str, str]]:
    """Return complete users' feature rows and the labels column."""
    rows, labels = {}, {}
    with open(path, newline="", encoding="utf-8") as fh:
        for rec in csv.DictReader(fh):
            if rec.get("label"):
                labels[rec["user_id"]] = rec["label"]
            if rec["complete"] != "1":
                continue
            rows[rec["user_id"]] = {c: float(rec[c]) for c in FEATURE_COLUMNS}
    return rows, labels


# ---------------------------------------------------------------------------
# Mann-Whitney


def _midranks(values: np.ndarray) -> np.ndarray:
    order = np.argsort(values, kind="mergesort")
    sorted_vals = values[order]
    ranks = np.empty(len(values))
    i = 0
    while i < len(values):
        j = i
        while j + 1 < len(values) and sorted_vals[j + 1] == sorted_vals[i]:
            j += 1
        ranks[order[i : j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


def _exact_rank_sum_distribution(doubled_ranks: np.ndarray, n1: int) -> dict[int, int]:
    """Count subsets of size n1 by sum of doubled midranks (integer valued)."""
    # ways[k] maps sum -> count for subsets of size k drawn from the prefix
    ways: list[dict[int, int]] = [dict() for _ in range(n1 + 1)]
    ways[0][0] = 1
    for r in doubled_ranks:
        r = int(r)
        for k in range(min(n1, len(ways) - 1), 0, -1):
            src = ways[k - 1]
            if not src:
                continue
            dst = ways[k]
            for s, c in src.items():
                dst[s + r] = dst.get(s + r, 0) + c
    return ways[n1]


EXACT_LIMIT = 20


def group_difference_test(sample_a: Sequence[float], sample_b: Sequence[float]) -> tuple[float, float]:
    """Mann-Whitney U of ``sample_a`` against ``sample_b`` with a two-sided p-value.

    Ties get midranks. When both samples have fewer than 20 values the
    p-value comes from the exact permutation distribution of the rank sum;
    otherwise from the normal approximation with tie-corrected variance and
    no continuity correction.
    """
    a = np.asarray(sample_a, dtype=float)
    b = np.asarray(sample_b, dtype=float)
    if a.size == 0 or b.size == 0:
        raise ValueError("both samples must be nonempty")
    n1, n2 = a.size, b.size
    ranks = _midranks(np.concatenate([a, b]))
    r1 = ranks[:n1].sum()
    u = r1 - n1 * (n1 + 1) / 2.0
    mean_u = n1 * n2 / 2.0
    if n1 < EXACT_LIMIT and n2 < EXACT_LIMIT:
        doubled = np.rint(2 * ranks).astype(int)
        dist = _exact_rank_sum_distribution(doubled, n1)
        total = sum(dist.values())
        obs = int(round(2 * r1))
        centre = n1 * (n1 + n2 + 1)  # doubled expected rank sum
        dev = abs(obs - centre)
        extreme = sum(c for s, c in dist.items() if abs(s - centre) >= dev)
        return float(u), min(1.0, extreme / total)
    _, counts = np.unique(ranks, return_counts=True)
    n = n1 + n2
    tie = float(((counts ** 3) - counts).sum())
    var_u = n1 * n2 / 12.0 * ((n + 1) - tie / (n * (n - 1)))
    if var_u <= 0:
        return float(u), 1.0
    z = (u - mean_u) / math.sqrt(var_u)
    return float(u), math.erfc(abs(z) / math.sqrt(2.0))

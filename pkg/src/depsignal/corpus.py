"""Corpus data model, JSONL ingestion/validation and the seeded synthetic generator."""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from datetime import date, datetime, time, timedelta, timezone
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import DataError
from .resources import signal_vocabulary, vocabulary

DP = "DP"
ND = "ND"
LABELS = (DP, ND)

TRAITS = ("openness", "conscientiousness", "extraversion", "agreeableness", "neuroticism")

# (mean, sd) of provider personality estimates over 4,697 users
PERSONALITY_CALIBRATION = {
    "openness": (0.61, 0.28),
    "conscientiousness": (0.28, 0.26),
    "extraversion": (0.32, 0.24),
    "agreeableness": (0.30, 0.26),
    "neuroticism": (0.56, 0.28),
}

TIMESTAMP_FORMAT = "%Y-%m-%dT%H:%M:%SZ"


@dataclass(frozen=True)
class Tweet:
    tweet_id: str
    user_id: str
    timestamp: datetime
    text: str
    mentioned_user_ids: tuple[str, ...] = ()
    is_reply: bool = False
    state_code: str | None = None

    @property
    def date(self) -> date:
        return self.timestamp.date()


@dataclass(frozen=True)
class UserProfile:
    user_id: str
    screen_name: str = ""
    display_name: str = ""
    description: str = ""
    location: str = ""
    state_code: str | None = None


@dataclass(frozen=True)
class UserRecord:
    profile: UserProfile
    tweets: tuple[Tweet, ...] = ()
    label: str | None = None
    anchor_date: date | None = None

    @property
    def user_id(self) -> str:
        return self.profile.user_id

    @property
    def state_code(self) -> str | None:
        return self.profile.state_code

    def with_tweets(self, tweets: Iterable[Tweet]) -> "UserRecord":
        return replace(self, tweets=tuple(tweets))


@dataclass
class ValidationReport:
    n_users: int = 0
    n_tweets: int = 0
    violations: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations


def parse_timestamp(value: str) -> datetime:
    try:
        ts = datetime.strptime(value, TIMESTAMP_FORMAT)
    except (TypeError, ValueError):
        # tolerate offsets like +00:00 that fromisoformat understands
        try:
            ts = datetime.fromisoformat(value)
        except (TypeError, ValueError) as exc:
            raise DataError(f"unparseable timestamp {value!r}") from exc
        if ts.tzinfo is None:
            raise DataError(f"timestamp {value!r} has no timezone")
        return ts.astimezone(timezone.utc)
    return ts.replace(tzinfo=timezone.utc)


def format_timestamp(ts: datetime) -> str:
    return ts.astimezone(timezone.utc).strftime(TIMESTAMP_FORMAT)


def _user_to_json(user: UserRecord) -> dict:
    p = user.profile
    return {
        "user_id": p.user_id,
        "screen_name": p.screen_name,
        "display_name": p.display_name,
        "description": p.description,
        "location": p.location,
        "state_code": p.state_code,
        "label": user.label,
        "anchor_date": user.anchor_date.isoformat() if user.anchor_date else None,
        "tweets": [
            {
                "tweet_id": t.tweet_id,
                "timestamp": format_timestamp(t.timestamp),
                "text": t.text,
                "mentioned_user_ids": list(t.mentioned_user_ids),
                "is_reply": t.is_reply,
            }
            for t in user.tweets
        ],
    }


def dumps_user(user: UserRecord) -> str:
    return json.dumps(_user_to_json(user), ensure_ascii=False)


def save_corpus(users: Iterable[UserRecord], path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for user in users:
            fh.write(dumps_user(user))
            fh.write("\n")


def _user_from_json(obj: Mapping, lineno: int) -> UserRecord:
    try:
        user_id = str(obj["user_id"])
        state = obj.get("state_code")
        profile = UserProfile(
            user_id=user_id,
            screen_name=obj.get("screen_name", "") or "",
            display_name=obj.get("display_name", "") or "",
            description=obj.get("description", "") or "",
            location=obj.get("location", "") or "",
            state_code=state,
        )
        label = obj.get("label")
        if label not in (None, DP, ND):
            raise DataError(f"line {lineno}: unknown label {label!r}")
        anchor = obj.get("anchor_date")
        anchor = date.fromisoformat(anchor) if anchor else None
        tweets = []
        for t in obj.get("tweets", []):
            tweets.append(
                Tweet(
                    tweet_id=str(t["tweet_id"]),
                    user_id=user_id,
                    timestamp=parse_timestamp(t["timestamp"]),
                    text=t.get("text", ""),
                    mentioned_user_ids=tuple(t.get("mentioned_user_ids", [])),
                    is_reply=bool(t.get("is_reply", False)),
                    state_code=state,
                )
            )
    except DataError as exc:
        if str(exc).startswith("line "):
            raise
        raise DataError(f"line {lineno}: {exc}") from exc
    except (KeyError, TypeError, ValueError, AttributeError) as exc:
        raise DataError(f"line {lineno}: malformed user record ({exc!r})") from exc
    return UserRecord(profile=profile, tweets=tuple(tweets), label=label, anchor_date=anchor)


def load_corpus(path) -> list[UserRecord]:
    """Read a JSONL corpus, one user per line.

    Tweets come back sorted ascending by timestamp. Lines sharing a user_id
    are merged (profile from the first line). Raises DataError naming the
    offending line for malformed JSON and naming the id for a duplicate
    tweet_id.
    """
    path = Path(path)
    if not path.exists():
        raise DataError(f"corpus not found: {path}")
    users: dict[str, UserRecord] = {}
    seen_ids: set[str] = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataError(f"line {lineno}: invalid JSON ({exc.msg})") from exc
            if not isinstance(obj, dict):
                raise DataError(f"line {lineno}: expected a JSON object")
            user = _user_from_json(obj, lineno)
            for t in user.tweets:
                if t.tweet_id in seen_ids:
                    raise DataError(f"duplicate tweet_id {t.tweet_id!r} (line {lineno})")
                seen_ids.add(t.tweet_id)
            if user.user_id in users:
                prev = users[user.user_id]
                user = prev.with_tweets(prev.tweets + user.tweets)
            users[user.user_id] = user
    return [
        u.with_tweets(sorted(u.tweets, key=lambda t: (t.timestamp, t.tweet_id)))
        for u in users.values()
    ]


def validate_corpus(users: Sequence[UserRecord]) -> ValidationReport:
    report = ValidationReport(n_users=len(users))
    seen_tweets: set[str] = set()
    seen_users: set[str] = set()
    for user in users:
        uid = user.user_id
        if not uid:
            report.violations.append("user with empty user_id")
        elif uid in seen_users:
            report.violations.append(f"duplicate user_id {uid!r}")
        seen_users.add(uid)
        if user.label not in (None, DP, ND):
            report.violations.append(f"user {uid!r}: unknown label {user.label!r}")
        if user.label == DP and user.anchor_date is None:
            report.violations.append(f"user {uid!r}: DP label without anchor_date")
        prev = None
        for t in user.tweets:
            report.n_tweets += 1
            if not t.tweet_id:
                report.violations.append(f"user {uid!r}: tweet with empty tweet_id")
            elif t.tweet_id in seen_tweets:
                report.violations.append(f"duplicate tweet_id {t.tweet_id!r}")
            seen_tweets.add(t.tweet_id)
            if t.user_id != uid:
                report.violations.append(f"tweet {t.tweet_id!r} carries user_id {t.user_id!r}, expected {uid!r}")
            if prev is not None and t.timestamp < prev:
                report.violations.append(f"user {uid!r}: tweets not sorted at {t.tweet_id!r}")
            prev = t.timestamp
    return report


# ---------------------------------------------------------------------------
# synthetic corpora


@dataclass(frozen=True)
class SynthSpec:
    n_dp: int = 100
    n_nd: int = 100
    tweets_per_user: tuple[int, int] = (80, 120)
    words_per_tweet: tuple[int, int] = (8, 25)
    signal_rate_dp: float = 0.08
    signal_rate_nd: float = 0.01
    seed: int = 0
    personality_calibration: Mapping[str, tuple[float, float]] = field(
        default_factory=lambda: dict(PERSONALITY_CALIBRATION)
    )
    # Fraction of a signal-bearing tweet's tokens drawn from the signal
    # vocabulary; a tweet bears signal with probability rate / burst_fraction.
    burst_fraction: float = 0.5
    start_date: date = date(2020, 1, 1)
    end_date: date = date(2020, 5, 22)
    # DP signal rate switches to signal_rate_dp_after from step_date on
    step_date: date | None = None
    signal_rate_dp_after: float | None = None
    # covid-era nouns get up-weighted from this date on
    topic_shift_date: date | None = date(2020, 3, 13)
    affect_boost_dp: float = 1.25
    plant_diagnosis: bool = True
    description_match_fraction: float = 0.2
    states: tuple[str, ...] = ("NY", "CA", "FL", "TX", "IL")

    def validate(self) -> None:
        if self.n_dp < 0 or self.n_nd < 0:
            raise ValueError("n_dp and n_nd must be >= 0")
        rates = [self.signal_rate_dp, self.signal_rate_nd]
        if self.signal_rate_dp_after is not None:
            rates.append(self.signal_rate_dp_after)
        for r in rates:
            if not 0.0 <= r <= 1.0:
                raise ValueError(f"signal rate {r} outside [0, 1]")
            if r > self.burst_fraction:
                raise ValueError(f"signal rate {r} exceeds burst_fraction {self.burst_fraction}")
        if not 0.0 < self.burst_fraction <= 1.0:
            raise ValueError("burst_fraction must be in (0, 1]")
        lo, hi = self.tweets_per_user
        if not 1 <= lo <= hi:
            raise ValueError("tweets_per_user must be a range with 1 <= lo <= hi")
        lo, hi = self.words_per_tweet
        if not 1 <= lo <= hi:
            raise ValueError("words_per_tweet must be a range with 1 <= lo <= hi")
        if self.end_date < self.start_date:
            raise ValueError("end_date before start_date")


COVID_NOUNS = ("covid", "quarantine", "lockdown", "mask", "vaccine", "virus", "testing", "hospital", "news", "home")
AFFECT_WORDS = ("i", "me", "my", "myself", "sad", "lonely", "tired", "cry", "miss", "hate", "bad", "never", "nothing")
_BLAND_DESCRIPTIONS = (
    "coffee first", "dog mom", "sports fan", "music and memes", "living my best life", "student",
    "runner, reader, dreamer", "opinions are my own", "gamer", "foodie", "", "just vibing", "dad of two",
    "artist", "aspiring writer", "nurse", "teacher", "football and family",
)
_DIAGNOSIS_TWEETS = (
    "i was diagnosed with {d}depression last year",
    "my {d}depression is back again",
    "i suffer from {d}depression and today is hard",
    "i'm healing from {d}depression one day at a time",
    "i developed {d}depression after that winter",
)
_DESCRIPTORS = ("", "severe ", "major ", "clinical ", "chronic ")
_DIAGNOSIS_DESCRIPTIONS = ("depression fighter", "mom, gamer, depression survivor", "depression sufferer | coffee")


def _filler_weights():
    words = list(vocabulary())
    perm = np.random.default_rng(20200313).permutation(len(words))
    ranks = np.empty(len(words))
    ranks[perm] = np.arange(len(words))
    base = 1.0 / (ranks + 10.0)
    return words, base


def _user_tokens(rng, n_words, lengths, rates, burst, words, weights, signal_words):
    """Draw the token stream of one user; returns a list of token lists per tweet."""
    n_tweets = len(lengths)
    signal_tweet = rng.random(n_tweets) < rates / burst
    per_token_signal = np.repeat(signal_tweet, lengths) & (rng.random(n_words) < burst)
    filler = rng.choice(len(words), size=n_words, p=weights)
    sig = rng.integers(0, len(signal_words), size=n_words)
    out = []
    pos = 0
    for n in lengths:
        toks = [
            signal_words[sig[i]] if per_token_signal[i] else words[filler[i]]
            for i in range(pos, pos + n)
        ]
        out.append(toks)
        pos += n
    return out


def generate_synthetic(spec: SynthSpec) -> list[UserRecord]:
    """Generate a labeled corpus that is a pure function of ``spec``.

    DP users carry planted signal tokens at ``signal_rate_dp`` per token
    (``signal_rate_dp_after`` from ``step_date`` on), ND users at
    ``signal_rate_nd``. With ``plant_diagnosis`` each DP user also gets one
    self-report of diagnosis, either as its newest tweet or in the profile
    description, so the cohort builder can recover the DP set.
    """
    spec.validate()
    rng = np.random.default_rng(spec.seed)
    n = spec.n_dp + spec.n_nd
    if n == 0:
        return []
    is_dp = np.zeros(n, dtype=bool)
    is_dp[rng.permutation(n)[: spec.n_dp]] = True

    words, base = _filler_weights()
    index = {w: i for i, w in enumerate(words)}
    covid_idx = [index[w] for w in COVID_NOUNS if w in index]
    affect_idx = [index[w] for w in AFFECT_WORDS if w in index]

    def weights_for(dp: bool, after_shift: bool):
        w = base.copy()
        if spec.topic_shift_date is not None:
            w[covid_idx] *= 8.0 if after_shift else 0.2
        if dp:
            w[affect_idx] *= spec.affect_boost_dp
        return w / w.sum()

    weight_table = {(dp, a): weights_for(dp, a) for dp in (False, True) for a in (False, True)}
    signal_words = list(signal_vocabulary())

    start = datetime.combine(spec.start_date, time(0, 0), tzinfo=timezone.utc)
    span = int((spec.end_date - spec.start_date).days + 1) * 86400
    shift_ts = (
        datetime.combine(spec.topic_shift_date, time(0, 0), tzinfo=timezone.utc)
        if spec.topic_shift_date else None
    )
    step_ts = (
        datetime.combine(spec.step_date, time(0, 0), tzinfo=timezone.utc)
        if spec.step_date and spec.signal_rate_dp_after is not None else None
    )
    states = spec.states
    state_p = np.linspace(2.0, 1.0, len(states)) if states else None

    users = []
    tweet_counter = 0
    for ui in range(n):
        dp = bool(is_dp[ui])
        uid = f"u{ui:06d}"
        n_tweets = int(rng.integers(spec.tweets_per_user[0], spec.tweets_per_user[1] + 1))
        lengths = rng.integers(spec.words_per_tweet[0], spec.words_per_tweet[1] + 1, size=n_tweets)
        offsets = np.sort(rng.integers(0, span, size=n_tweets))
        stamps = [start + timedelta(seconds=int(s)) for s in offsets]

        if dp:
            rates = np.full(n_tweets, spec.signal_rate_dp)
            if step_ts is not None:
                rates = np.where([s < step_ts for s in stamps], spec.signal_rate_dp, spec.signal_rate_dp_after)
        else:
            rates = np.full(n_tweets, spec.signal_rate_nd)

        after = np.array([shift_ts is not None and s >= shift_ts for s in stamps])
        token_lists: list[list[str]] = [None] * n_tweets  # type: ignore[list-item]
        for flag in (False, True):
            sel = np.flatnonzero(after == flag)
            if sel.size == 0:
                continue
            drawn = _user_tokens(
                rng, int(lengths[sel].sum()), lengths[sel], rates[sel], spec.burst_fraction,
                words, weight_table[(dp, flag)], signal_words,
            )
            for j, toks in zip(sel, drawn):
                token_lists[j] = toks

        mention_p, reply_p, max_mentions = (0.25, 0.35, 3) if dp else (0.32, 0.25, 2)
        has_mention = rng.random(n_tweets) < mention_p
        n_mentions = rng.integers(1, max_mentions + 1, size=n_tweets)
        handles = rng.integers(0, 400, size=(n_tweets, max_mentions))
        replies = rng.random(n_tweets) < reply_p
        endings = rng.choice(["", "", ".", "!", "?", "!!!"], size=n_tweets)

        state = str(rng.choice(states, p=state_p / state_p.sum())) if states else None
        desc = _BLAND_DESCRIPTIONS[int(rng.integers(len(_BLAND_DESCRIPTIONS)))]
        anchor = None
        diag_text = None
        if dp:
            anchor = stamps[-1].date() if stamps else spec.end_date
            if spec.plant_diagnosis:
                if rng.random() < spec.description_match_fraction:
                    desc = _DIAGNOSIS_DESCRIPTIONS[int(rng.integers(len(_DIAGNOSIS_DESCRIPTIONS)))]
                    anchor = spec.end_date
                else:
                    d = _DESCRIPTORS[int(rng.integers(len(_DESCRIPTORS)))]
                    diag_text = _DIAGNOSIS_TWEETS[int(rng.integers(len(_DIAGNOSIS_TWEETS)))].format(d=d)

        tweets = []
        for j in range(n_tweets):
            mentioned = ()
            prefix = ""
            if has_mention[j]:
                ids = [f"m{h:04d}" for h in handles[j, : n_mentions[j]]]
                mentioned = tuple(ids)
                prefix = " ".join("@" + h for h in ids) + " "
            text = prefix + " ".join(token_lists[j]) + str(endings[j])
            tweet_counter += 1
            tweets.append(
                Tweet(
                    tweet_id=f"t{tweet_counter:09d}",
                    user_id=uid,
                    timestamp=stamps[j],
                    text=text,
                    mentioned_user_ids=mentioned,
                    is_reply=bool(replies[j]),
                    state_code=state,
                )
            )
        if diag_text is not None:
            tweet_counter += 1
            ts = stamps[-1] if stamps else start
            tweets.append(Tweet(f"t{tweet_counter:09d}", uid, ts, diag_text, (), False, state))
            anchor = ts.date()

        profile = UserProfile(
            user_id=uid,
            screen_name=f"user{ui}",
            display_name=f"User {ui}",
            description=desc,
            location=f"somewhere, {state}" if state else "",
            state_code=state,
        )
        users.append(UserRecord(profile, tuple(tweets), DP if dp else ND, anchor))
    return users


def unlabeled(users: Iterable[UserRecord]) -> list[UserRecord]:
    """Strip labels and anchor dates, e.g. to run cohort building on a labeled corpus."""
    return [replace(u, label=None, anchor_date=None) for u in users]

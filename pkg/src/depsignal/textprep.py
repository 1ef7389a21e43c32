"""Tweet normalization with special tokens, and ~250-word chunk construction."""

from __future__ import annotations

import itertools
import json
import re
from dataclasses import dataclass
from datetime import date
from typing import Iterable, Sequence

from .corpus import UserRecord
from .resources import known_words

ALLCAPS = "<allcaps>"
ELONGATED = "<elongated>"
REPEATED = "<repeated>"
URL = "<url>"
USER = "<user>"
HASHTAG = "<hashtag>"
NUMBER = "<number>"
SPECIAL_TOKENS = frozenset({ALLCAPS, ELONGATED, REPEATED, URL, USER, HASHTAG, NUMBER})

_TOKEN_RE = re.compile(
    r"""
    (?P<special><(?:allcaps|elongated|repeated|url|user|hashtag|number)>)
  | (?P<url>(?:https?://|www\.)\S+)
  | (?P<user>@\w+)
  | (?P<hashtag>\#\w+)
  | (?P<number>[+-]?\d+(?:[.,:]\d+)*(?!\w))
  | (?P<word>\w+(?:'\w+)*)
  | (?P<punctrun>(?P<mark>[!?.])(?P=mark)+)
  | (?P<punct>[^\w\s])
    """,
    re.VERBOSE,
)
_RUN_RE = re.compile(r"([^\W\d_])\1{2,}")
_APOSTROPHES = str.maketrans({"’": "'", "‘": "'", "ʼ": "'"})


def is_word(token: str) -> bool:
    """True for content words: not a special token and not pure punctuation."""
    return token not in SPECIAL_TOKENS and any(c.isalnum() for c in token)


def word_count(tokens: Iterable[str]) -> int:
    return sum(1 for t in tokens if is_word(t))


def _canonical(word: str) -> str:
    """Collapse letter runs of length >= 3, preferring spellings in the known-word list."""
    runs = list(_RUN_RE.finditer(word))
    known = known_words()
    # candidates ordered by number of doubled runs, most doubles first
    options = []
    for keep in itertools.product((2, 1), repeat=len(runs)):
        parts, pos = [], 0
        for m, k in zip(runs, keep):
            parts.append(word[pos : m.start()])
            parts.append(m.group(1) * k)
            pos = m.end()
        parts.append(word[pos:])
        options.append("".join(parts))
    for cand in options:
        if cand in known:
            return cand
    return options[-1]


def normalize(text: str) -> list[str]:
    """Tokenize and annotate one piece of tweet text.

    >>> " ".join(normalize("YESSSSS, I love it so so much!!!"))
    'yes <allcaps> <elongated> , i love it so <repeated> much ! <elongated>'
    """
    out: list[str] = []
    prev_word = None  # last emitted word, reset by any non-word token
    for m in _TOKEN_RE.finditer(text.translate(_APOSTROPHES)):
        kind = m.lastgroup
        if kind in ("word", "hashtag"):
            raw = m.group()
            if kind == "hashtag":
                out.append(HASHTAG)
                prev_word = None
                raw = raw[1:]
                if raw.isdecimal():  # a numeral tag body follows the numeral rule
                    out.append(NUMBER)
                    continue
            tags = []
            letters = sum(c.isalpha() for c in raw)
            if letters >= 2 and len(raw) >= 2 and raw.isupper():
                tags.append(ALLCAPS)
            word = raw.lower()
            if _RUN_RE.search(word):
                word = _canonical(word)
                tags.append(ELONGATED)
            if word == prev_word:
                if out[-1] != REPEATED:
                    out.append(REPEATED)
                continue
            out.append(word)
            out.extend(tags)
            prev_word = word
            continue
        prev_word = None
        if kind == "special":
            out.append(m.group())
            # annotations of a word keep it eligible for repetition checks
            if m.group() in (ALLCAPS, ELONGATED) and len(out) >= 2:
                prev_word = _last_word(out)
        elif kind == "url":
            out.append(URL)
        elif kind == "user":
            out.append(USER)
        elif kind == "number":
            out.append(NUMBER)
        elif kind == "punctrun":
            out.append(m.group()[0])
            out.append(ELONGATED)
        else:
            out.append(m.group())
    return out


def _last_word(tokens):
    for t in reversed(tokens):
        if t in (ALLCAPS, ELONGATED):
            continue
        return t if is_word(t) else None
    return None


@dataclass(frozen=True)
class Chunk:
    user_id: str
    label: str | None
    tokens: tuple[str, ...]
    word_count: int
    mid_date: date | None = None
    source_tweet_ids: tuple[str, ...] = ()
    trailing: bool = False

    def to_json(self) -> dict:
        return {
            "user_id": self.user_id,
            "label": self.label,
            "tokens": list(self.tokens),
            "word_count": self.word_count,
            "mid_date": self.mid_date.isoformat() if self.mid_date else None,
            "source_tweet_ids": list(self.source_tweet_ids),
            "trailing": self.trailing,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "Chunk":
        mid = obj.get("mid_date")
        return cls(
            user_id=obj["user_id"],
            label=obj.get("label"),
            tokens=tuple(obj["tokens"]),
            word_count=int(obj["word_count"]),
            mid_date=date.fromisoformat(mid) if mid else None,
            source_tweet_ids=tuple(obj.get("source_tweet_ids", [])),
            trailing=bool(obj.get("trailing", False)),
        )


def _accumulate(user: UserRecord, tweets, target_words: int):
    """Yield (tweets, tokens, words) groups closing once words >= target_words."""
    buf, toks, words = [], [], 0
    for t in tweets:
        norm = normalize(t.text)
        buf.append(t)
        toks.extend(norm)
        words += word_count(norm)
        if words >= target_words:
            yield buf, toks, words, False
            buf, toks, words = [], [], 0
    if buf:
        yield buf, toks, words, True


def chunk_user(user: UserRecord, target_words: int = 250, min_words: int = 125) -> list[Chunk]:
    """Concatenate consecutive tweets into chunks of at least ``target_words`` words.

    Tweets are never split. A trailing chunk below ``min_words`` is dropped.
    """
    chunks = []
    for buf, toks, words, last in _accumulate(user, user.tweets, target_words):
        if last and words < min_words:
            continue
        chunks.append(
            Chunk(
                user_id=user.user_id,
                label=user.label,
                tokens=tuple(toks),
                word_count=words,
                mid_date=_mid_date(buf),
                source_tweet_ids=tuple(t.tweet_id for t in buf),
                trailing=last and words < target_words,
            )
        )
    return chunks


def _mid_date(tweets) -> date:
    return tweets[len(tweets) // 2].timestamp.date()


def chunk_stream_for_trend(
    user: UserRecord,
    start_date: date,
    target_words: int = 250,
    end_date: date | None = None,
) -> list[Chunk]:
    """Chunk a user's tweets from ``start_date`` on, dating each chunk by its middle tweet.

    The middle tweet is the one at 0-based index ``n // 2``. Trailing chunks
    short of ``target_words`` are kept and flagged ``trailing``.
    """
    tweets = [
        t for t in user.tweets
        if t.timestamp.date() >= start_date and (end_date is None or t.timestamp.date() <= end_date)
    ]
    return [
        Chunk(
            user_id=user.user_id,
            label=user.label,
            tokens=tuple(toks),
            word_count=words,
            mid_date=_mid_date(buf),
            source_tweet_ids=tuple(t.tweet_id for t in buf),
            trailing=last and words < target_words,
        )
        for buf, toks, words, last in _accumulate(user, tweets, target_words)
    ]


def save_chunks(chunks: Iterable[Chunk], path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for c in chunks:
            fh.write(json.dumps(c.to_json(), ensure_ascii=False))
            fh.write("\n")


def load_chunks(path) -> list[Chunk]:
    with open(path, encoding="utf-8") as fh:
        return [Chunk.from_json(json.loads(line)) for line in fh if line.strip()]


def chunk_users(users: Sequence[UserRecord], target_words: int = 250, min_words: int = 125) -> list[Chunk]:
    return [c for u in users for c in chunk_user(u, target_words, min_words)]

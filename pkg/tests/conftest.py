from __future__ import annotations

from datetime import date, datetime, timedelta, timezone

import pytest

from depsignal.corpus import Tweet, UserProfile, UserRecord


def ts(day: date | str, seconds: int = 0) -> datetime:
    if isinstance(day, str):
        day = date.fromisoformat(day)
    return datetime(day.year, day.month, day.day, tzinfo=timezone.utc) + timedelta(seconds=seconds)


def make_user(uid, texts, start="2020-01-01", step_days=1, description="", label=None, anchor=None, state=None,
              mentions=None, replies=None):
    """A user whose i-th tweet is dated ``start + i * step_days`` at noon."""
    d0 = date.fromisoformat(start)
    tweets = []
    for i, text in enumerate(texts):
        tweets.append(Tweet(
            tweet_id=f"{uid}-{i}",
            user_id=uid,
            timestamp=ts(d0 + timedelta(days=i * step_days), 43200),
            text=text,
            mentioned_user_ids=tuple(mentions[i]) if mentions else (),
            is_reply=bool(replies[i]) if replies else False,
            state_code=state,
        ))
    profile = UserProfile(uid, f"sn_{uid}", f"User {uid}", description, "", state)
    return UserRecord(profile, tuple(tweets), label, anchor)


def words(n: int, word: str = "time") -> str:
    return " ".join([word] * n)


def distinct_words(n: int, offset: int = 0) -> str:
    """n words with no immediate repetition (so normalization keeps all of them)."""
    pool = ["time", "day", "home", "work", "dog", "food", "game", "music"]
    return " ".join(pool[(i + offset) % len(pool)] for i in range(n))


@pytest.fixture
def tmp_out(tmp_path):
    return tmp_path / "out"


# one line per acceptance criterion, printed in the terminal summary
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)

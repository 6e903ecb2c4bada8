from __future__ import annotations

from datetime import datetime, timezone

import pytest

from stancelens.corpus import Tweet


def epoch(iso: str) -> int:
    value = iso.replace("Z", "+00:00")
    dt = datetime.fromisoformat(value)
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return int(dt.timestamp())


def make_tweet(
    tweet_id="t1",
    user_id="u1",
    created="2020-03-01T12:00:00Z",
    text="hello world",
    lang="en",
    retweeted_account=None,
    hashtags=None,
    urls=(),
    user_location=None,
) -> Tweet:
    if hashtags is None:
        raw = tuple(part[1:] for part in text.split() if part.startswith("#"))
    else:
        raw = tuple(hashtags)
    return Tweet(
        tweet_id=tweet_id,
        user_id=user_id,
        timestamp_utc=epoch(created),
        text=text,
        lang=lang,
        retweeted_account=retweeted_account,
        hashtags=tuple(h.lower() for h in raw),
        raw_hashtags=raw,
        urls=tuple(urls),
        user_location=user_location,
    )


@pytest.fixture
def tweet_factory():
    return make_tweet

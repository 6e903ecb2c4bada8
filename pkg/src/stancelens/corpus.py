"""Tweet corpus ingestion, filter cascade, and user selection.

Input is line-delimited JSON, one tweet per line, UTF-8. Mandatory fields:
``id``, ``user_id``, ``created_at`` (ISO-8601), ``text``. Optional:
``lang``, ``retweeted_user``, ``user_location``, ``hashtags``, ``urls``.
When ``hashtags``/``urls`` are absent they are derived from the text.
Every filter emits the same format, so stages pipe.
"""

from __future__ import annotations

import json
import re
from collections import Counter
from dataclasses import dataclass
from datetime import date, datetime, timezone
from importlib import resources
from pathlib import Path
from typing import Iterable, Iterator, Sequence

import numpy as np

from .errors import DataError, RecordParseError, SchemaError

_HASHTAG_RE = re.compile(r"#(\w+)")
_URL_RE = re.compile(r"https?://\S+")
_TOKEN_RE = re.compile(r"\w+")

MANDATORY_FIELDS = ("id", "user_id", "created_at", "text")

# Country markers: "USA" must appear capitalized and token-bounded, the
# spelled-out names match anywhere regardless of case ("America" therefore
# also hits "american"; see README).
COUNTRY_RULES = (("United States", False), ("America", False), ("USA", True))


@dataclass(frozen=True)
class Tweet:
    """One parsed tweet record.

    ``hashtags`` are lowercase-folded with the '#' stripped; the original
    surface forms are kept in ``raw_hashtags`` (same order) so reports can
    show the most frequent spelling.
    """

    tweet_id: str
    user_id: str
    timestamp_utc: int
    text: str
    lang: str | None = None
    retweeted_account: str | None = None
    hashtags: tuple[str, ...] = ()
    raw_hashtags: tuple[str, ...] = ()
    urls: tuple[str, ...] = ()
    user_location: str | None = None

    def day(self) -> date:
        """UTC calendar day of the tweet."""
        return datetime.fromtimestamp(self.timestamp_utc, tz=timezone.utc).date()


@dataclass(frozen=True)
class KeywordRule:
    """A search keyword with an optional per-keyword case flag.

    ``case_sensitive=None`` inherits the FilterSpec default.
    """

    text: str
    case_sensitive: bool | None = None


@dataclass(frozen=True)
class LocationRule:
    """One location marker.

    Case-sensitive rules must match a whole token (split on whitespace and
    punctuation); case-insensitive rules match as a substring.
    """

    text: str
    case_sensitive: bool = False


@dataclass(frozen=True)
class FilterSpec:
    """Parameters of one filter pass over a corpus."""

    keywords: tuple[KeywordRule, ...] = ()
    match_mode: str = "substring"  # "substring" | "token"
    case_sensitive: bool = False  # default for keywords without their own flag
    lang: str | None = None
    date_start: date | None = None
    date_end: date | None = None
    location_rules: tuple[LocationRule, ...] = ()

    def __post_init__(self):
        if self.match_mode not in ("substring", "token"):
            raise ValueError(f"unknown match_mode {self.match_mode!r}")
        if self.date_start and self.date_end and self.date_start > self.date_end:
            raise ValueError("date_start must not exceed date_end")


@dataclass(frozen=True)
class CorpusStats:
    """Tweets-per-user statistics (population stddev)."""

    tweet_count: int
    user_count: int
    tweets_per_user_mean: float
    tweets_per_user_stddev: float
    tweets_per_user_min: int
    tweets_per_user_max: int


def make_keywords(items: Iterable) -> tuple[KeywordRule, ...]:
    """Build keyword rules from plain strings or (text, flag) pairs.

    Plain strings keep ``case_sensitive=None`` and inherit the spec default
    at match time.
    """
    rules = []
    for item in items:
        if isinstance(item, KeywordRule):
            rules.append(item)
        elif isinstance(item, str):
            rules.append(KeywordRule(item))
        else:
            text, flag = item
            rules.append(KeywordRule(text, bool(flag)))
    return tuple(rules)


# ---------------------------------------------------------------------------
# parsing / serialization


def _parse_created_at(value: str) -> int:
    value = value.strip()
    if value.endswith("Z"):
        value = value[:-1] + "+00:00"
    dt = datetime.fromisoformat(value)
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return int(dt.timestamp())


def extract_hashtags(text: str) -> tuple[tuple[str, ...], tuple[str, ...]]:
    """Return (folded, raw) hashtags for every '#'-token in the text."""
    raw = tuple(_HASHTAG_RE.findall(text))
    return tuple(h.lower() for h in raw), raw


def extract_urls(text: str) -> tuple[str, ...]:
    return tuple(_URL_RE.findall(text))


def parse_tweet_record(line: str, line_no: int | None = None) -> Tweet:
    """Parse one JSON record into a Tweet.

    Raises RecordParseError for unparseable lines and SchemaError when a
    mandatory field is missing; both carry the line number when given.
    """
    try:
        record = json.loads(line)
    except json.JSONDecodeError as exc:
        raise RecordParseError(f"invalid JSON: {exc.msg}", line_no) from exc
    if not isinstance(record, dict):
        raise RecordParseError("record is not a JSON object", line_no)

    for name in MANDATORY_FIELDS:
        if record.get(name) in (None, ""):
            raise SchemaError(f"missing mandatory field {name!r}", line_no)

    text = str(record["text"])
    try:
        timestamp = _parse_created_at(str(record["created_at"]))
    except ValueError as exc:
        raise SchemaError(f"bad created_at: {exc}", line_no) from exc

    if record.get("hashtags") is not None:
        raw_tags = tuple(str(h).lstrip("#") for h in record["hashtags"])
        tags = tuple(h.lower() for h in raw_tags)
    else:
        tags, raw_tags = extract_hashtags(text)
    if record.get("urls") is not None:
        urls = tuple(str(u) for u in record["urls"])
    else:
        urls = extract_urls(text)

    retweeted = record.get("retweeted_user")
    location = record.get("user_location")
    lang = record.get("lang")
    return Tweet(
        tweet_id=str(record["id"]),
        user_id=str(record["user_id"]),
        timestamp_utc=timestamp,
        text=text,
        lang=str(lang) if lang not in (None, "") else None,
        retweeted_account=str(retweeted) if retweeted not in (None, "") else None,
        hashtags=tags,
        raw_hashtags=raw_tags,
        urls=urls,
        user_location=str(location) if location not in (None, "") else None,
    )


def serialize_tweet(tweet: Tweet) -> str:
    """Serialize back to the input line format (round-trips through parse)."""
    created = datetime.fromtimestamp(tweet.timestamp_utc, tz=timezone.utc)
    record = {
        "id": tweet.tweet_id,
        "user_id": tweet.user_id,
        "created_at": created.strftime("%Y-%m-%dT%H:%M:%SZ"),
        "text": tweet.text,
        "lang": tweet.lang,
        "retweeted_user": tweet.retweeted_account,
        "user_location": tweet.user_location,
        "hashtags": list(tweet.raw_hashtags),
        "urls": list(tweet.urls),
    }
    return json.dumps(record, ensure_ascii=False, separators=(",", ":"))


def read_tweets(path: str | Path) -> Iterator[Tweet]:
    """Yield tweets from a line-delimited file, attaching line numbers to errors."""
    with open(path, encoding="utf-8") as handle:
        for line_no, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            yield parse_tweet_record(line, line_no)


def write_tweets(tweets: Iterable[Tweet], path: str | Path) -> int:
    count = 0
    with open(path, "w", encoding="utf-8") as handle:
        for tweet in tweets:
            handle.write(serialize_tweet(tweet) + "\n")
            count += 1
    return count


# ---------------------------------------------------------------------------
# filter cascade


def _keyword_matches(text: str, rule: KeywordRule, mode: str, default_cs: bool) -> bool:
    sensitive = rule.case_sensitive if rule.case_sensitive is not None else default_cs
    needle, haystack = rule.text, text
    if not sensitive:
        needle, haystack = needle.lower(), haystack.lower()
    if mode == "substring":
        return needle in haystack
    return needle in _TOKEN_RE.findall(haystack)


def filter_by_keywords(tweets: Iterable[Tweet], spec: FilterSpec) -> list[Tweet]:
    """Retain tweets whose text matches at least one keyword rule."""
    if not spec.keywords:
        raise ValueError("filter_by_keywords requires a non-empty keyword list")
    return [
        t
        for t in tweets
        if any(
            _keyword_matches(t.text, rule, spec.match_mode, spec.case_sensitive)
            for rule in spec.keywords
        )
    ]


def filter_by_language(tweets: Iterable[Tweet], tag: str) -> list[Tweet]:
    """Retain tweets whose language tag equals ``tag`` exactly."""
    if not tag:
        raise ValueError("language tag must be non-empty")
    return [t for t in tweets if t.lang == tag]


def filter_by_daterange(tweets: Iterable[Tweet], start: date, end: date) -> list[Tweet]:
    """Retain tweets whose UTC calendar day lies in [start, end] inclusive."""
    if start > end:
        raise ValueError("start day must not exceed end day")
    return [t for t in tweets if start <= t.day() <= end]


def match_location(location: str | None, rules: Sequence[LocationRule]) -> bool:
    """True when the free-text location hits any rule."""
    if not location:
        return False
    lowered = location.lower()
    tokens = None
    for rule in rules:
        if rule.case_sensitive:
            if tokens is None:
                tokens = set(_TOKEN_RE.findall(location))
            if rule.text in tokens:
                return True
        elif rule.text.lower() in lowered:
            return True
    return False


def load_state_table(path: str | Path | None = None) -> list[tuple[str, str]]:
    """Load the "name<TAB>abbrev" state table (bundled file by default)."""
    if path is None:
        source = resources.files("stancelens.data").joinpath("us_states.tsv")
        content = source.read_text(encoding="utf-8")
    else:
        content = Path(path).read_text(encoding="utf-8")
    table = []
    for raw in content.splitlines():
        raw = raw.strip()
        if not raw or raw.startswith("#"):
            continue
        try:
            name, abbrev = raw.split("\t")
        except ValueError as exc:
            raise DataError(f"bad state table line: {raw!r}") from exc
        table.append((name.strip(), abbrev.strip()))
    return table


def us_location_rules(state_table: Sequence[tuple[str, str]]) -> tuple[LocationRule, ...]:
    """Country markers plus state names (loose) and abbreviations (strict)."""
    rules = [LocationRule(text, cs) for text, cs in COUNTRY_RULES]
    for name, abbrev in state_table:
        rules.append(LocationRule(name, case_sensitive=False))
        rules.append(LocationRule(abbrev, case_sensitive=True))
    return tuple(rules)


def match_us_location(location: str | None, state_table: Sequence[tuple[str, str]]) -> bool:
    """US-location heuristic over a profile location string."""
    return match_location(location, us_location_rules(state_table))


def filter_by_location(tweets: Iterable[Tweet], rules: Sequence[LocationRule]) -> list[Tweet]:
    return [t for t in tweets if match_location(t.user_location, rules)]


# ---------------------------------------------------------------------------
# user selection


def select_top_users(tweets: Iterable[Tweet], k: int) -> list[str]:
    """Top-k user ids by tweet count, ties broken by ascending user id."""
    if k < 1:
        raise ValueError("k must be >= 1")
    counts = Counter(t.user_id for t in tweets)
    ordered = sorted(counts.items(), key=lambda item: (-item[1], item[0]))
    return [user for user, _ in ordered[:k]]


def sample_users(users: Sequence[str], n: int, seed: int) -> list[str]:
    """Uniform sample without replacement, deterministic under the seed."""
    if n < 0:
        raise ValueError("n must be >= 0")
    if n > len(users):
        raise DataError(f"cannot sample {n} users from a population of {len(users)}")
    order = np.random.RandomState(seed).permutation(len(users))
    return [users[i] for i in order[:n]]


def filter_by_users(tweets: Iterable[Tweet], users: Iterable[str]) -> list[Tweet]:
    """Retain tweets authored by the given users."""
    keep = set(users)
    return [t for t in tweets if t.user_id in keep]


def corpus_stats(tweets: Iterable[Tweet]) -> CorpusStats:
    """Population statistics of tweets-per-user; all zeros on an empty corpus."""
    counts = Counter(t.user_id for t in tweets)
    if not counts:
        return CorpusStats(0, 0, 0.0, 0.0, 0, 0)
    per_user = np.array(sorted(counts.values()), dtype=np.int64)
    return CorpusStats(
        tweet_count=int(per_user.sum()),
        user_count=len(counts),
        tweets_per_user_mean=float(per_user.mean()),
        tweets_per_user_stddev=float(per_user.std()),
        tweets_per_user_min=int(per_user[0]),
        tweets_per_user_max=int(per_user[-1]),
    )

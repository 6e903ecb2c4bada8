"""Per-term valence scoring between the two camps.

A term's valence contrasts its relative frequency in one camp against the
other: 2 * (f_g / (f_g + f_other)) - 1 with f = count / camp total. +1
means exclusive use by the camp, -1 exclusive use by the other camp, 0
equal relative frequency. Distinctive terms pass an absolute-valence
threshold and are ranked by valence times the natural log of their count.
"""

from __future__ import annotations

import csv
import math
from bisect import bisect_right
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping
from urllib.parse import parse_qsl, urlencode, urlsplit, urlunsplit

from .cluster import StanceAssignment
from .corpus import Tweet

TERM_KINDS = ("hashtag", "account", "url")
BIN_EDGES = (-0.6, -0.2, 0.2, 0.6)
TRACKING_PARAM_PREFIXES = ("utm_",)
TRACKING_PARAMS = {"fbclid", "gclid", "igshid", "ocid"}


@dataclass
class GroupTermCounts:
    """Occurrence counts of one term kind, split by camp."""

    term_kind: str
    camps: tuple[str, str]
    counts: dict[str, Counter]
    totals: dict[str, int]
    display: dict[str, Counter]

    def vocabulary(self) -> list[str]:
        seen = set(self.counts[self.camps[0]]) | set(self.counts[self.camps[1]])
        return sorted(seen)

    def display_form(self, term: str) -> str:
        """Most frequent surface form of the term (ties lexicographic)."""
        forms = self.display.get(term)
        if not forms:
            return term
        return min(forms, key=lambda f: (-forms[f], f))


@dataclass(frozen=True)
class ValenceEntry:
    term: str
    count_g: int
    count_other: int
    valence: float
    bin: int
    rank_score: float


def normalize_url(url: str, expansion_map: Mapping[str, str] | None = None) -> str:
    """Canonical form for counting: no scheme, no trailing slash, no
    tracking query params. Shortened URLs stay as-is unless the optional
    expansion map resolves them first."""
    if expansion_map:
        url = expansion_map.get(url, url)
    parts = urlsplit(url.strip())
    if not parts.netloc:
        return url.strip().rstrip("/")
    host = parts.netloc.lower()
    path = parts.path.rstrip("/")
    query = [
        (key, value)
        for key, value in parse_qsl(parts.query, keep_blank_values=True)
        if key not in TRACKING_PARAMS
        and not any(key.startswith(p) for p in TRACKING_PARAM_PREFIXES)
    ]
    rebuilt = urlunsplit(("", host, path, urlencode(query), ""))
    return rebuilt.lstrip("/") if rebuilt.startswith("//") else rebuilt


def count_terms(
    tweets: Iterable[Tweet],
    assignment: StanceAssignment,
    term_kind: str,
    dedup_per_tweet: bool = False,
    url_expansion: Mapping[str, str] | None = None,
) -> GroupTermCounts:
    """Count term occurrences per camp over tweets of assigned users.

    Unclustered (and unknown) users contribute nothing. Hashtags are
    counted case-folded, accounts verbatim, URLs in normalized form.
    ``dedup_per_tweet`` counts each distinct term at most once per tweet.
    """
    if term_kind not in TERM_KINDS:
        raise ValueError(f"unknown term kind {term_kind!r}")
    camp_of = assignment.user_to_camp()
    camps = tuple(assignment.camp_names)
    counts = {camp: Counter() for camp in camps}
    totals = {camp: 0 for camp in camps}
    display: dict[str, Counter] = {}

    for tweet in tweets:
        camp = camp_of.get(tweet.user_id)
        if camp is None:
            continue
        if term_kind == "hashtag":
            terms = list(tweet.hashtags)
            surfaces = list(tweet.raw_hashtags)
        elif term_kind == "account":
            terms = [tweet.retweeted_account] if tweet.retweeted_account else []
            surfaces = terms
        else:
            terms = [normalize_url(u, url_expansion) for u in tweet.urls]
            surfaces = terms
        for term, surface in zip(terms, surfaces):
            display.setdefault(term, Counter())[surface] += 1
        if dedup_per_tweet:
            terms = sorted(set(terms))
        counts[camp].update(terms)
        totals[camp] += len(terms)
    return GroupTermCounts(
        term_kind=term_kind,
        camps=camps,
        counts=counts,
        totals=totals,
        display=display,
    )


def valence(count_g: int, total_g: int, count_other: int, total_other: int) -> float:
    """Valence of a term for the camp with (count_g, total_g)."""
    if total_g <= 0 or total_other <= 0:
        raise ValueError("camp totals must be positive")
    if not (0 <= count_g <= total_g and 0 <= count_other <= total_other):
        raise ValueError("counts must lie within their totals")
    if count_g + count_other == 0:
        raise ValueError("valence undefined for a term with no occurrences")
    rate_g = count_g / total_g
    rate_other = count_other / total_other
    # same value as 2 * rate_g / (rate_g + rate_other) - 1, but this form is
    # exactly antisymmetric under swapping the camps
    return (rate_g - rate_other) / (rate_g + rate_other)


def bin_valence(v: float) -> int:
    """Bin index 0..4 over five equal intervals of [-1, 1].

    Interior boundaries belong to the upper bin, so v = 0.6 lands in the
    top bin, matching the >= 0.6 distinctiveness rule.
    """
    if not -1.0 <= v <= 1.0:
        raise ValueError(f"valence {v} outside [-1, 1]")
    return bisect_right(BIN_EDGES, v)


def distinctive_terms(
    counts: GroupTermCounts, camp: str, threshold: float = 0.6
) -> list[ValenceEntry]:
    """Terms whose valence for the camp is at least the threshold.

    rank_score = valence * ln(count in the camp); sorted by descending
    rank score, ties by descending count then term order.
    """
    if not 0.0 < threshold <= 1.0:
        raise ValueError("threshold must lie in (0, 1]")
    if camp not in counts.camps:
        raise ValueError(f"unknown camp {camp!r}")
    other = counts.camps[1] if camp == counts.camps[0] else counts.camps[0]
    total_g = counts.totals[camp]
    total_other = counts.totals[other]

    entries = []
    for term in counts.vocabulary():
        count_g = counts.counts[camp][term]
        count_other = counts.counts[other][term]
        score = valence(count_g, total_g, count_other, total_other)
        if score >= threshold:
            entries.append(
                ValenceEntry(
                    term=term,
                    count_g=count_g,
                    count_other=count_other,
                    valence=score,
                    bin=bin_valence(score),
                    rank_score=score * math.log(count_g),
                )
            )
    entries.sort(key=lambda e: (-e.rank_score, -e.count_g, e.term))
    return entries


def write_valence_csv(
    entries: Iterable[ValenceEntry],
    path: str | Path,
    counts: GroupTermCounts | None = None,
) -> None:
    """Emit one camp's valence table; columns are fixed and documented."""
    with open(path, "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["term", "count_g", "count_other", "valence", "bin", "rank_score"])
        for entry in entries:
            term = counts.display_form(entry.term) if counts else entry.term
            writer.writerow(
                [
                    term,
                    entry.count_g,
                    entry.count_other,
                    repr(entry.valence),
                    entry.bin,
                    repr(entry.rank_score),
                ]
            )

"""Presentation artifacts: daily series, top-term tables, category roll-ups,
and a dependency-free SVG time-series plot.

All emitters are pure functions of their inputs, so identical inputs give
byte-identical files.
"""

from __future__ import annotations

import csv
from collections import Counter
from dataclasses import dataclass, field
from datetime import date, timedelta
from pathlib import Path
from typing import Iterable, Sequence

from .cluster import StanceAssignment
from .corpus import Tweet
from .errors import DataError
from .valence import GroupTermCounts

PLOT_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd")


@dataclass
class DailySeries:
    """Per-day per-camp tweet counts, contiguous and zero-filled."""

    camps: tuple[str, ...]
    start: date
    end: date
    rows: list[tuple[date, str, int]]

    def camp_total(self, camp: str) -> int:
        return sum(count for _, c, count in self.rows if c == camp)


@dataclass
class CategoryLexicon:
    """User-supplied term -> category map with an optional excluded set.

    A term may belong to at most one category; excluded terms (e.g. the
    filter keywords themselves) are disjoint from every category.
    """

    categories: dict[str, set[str]]
    excluded: set[str] = field(default_factory=set)

    def __post_init__(self):
        seen: dict[str, str] = {}
        for category, terms in self.categories.items():
            for term in terms:
                if term in seen:
                    raise DataError(
                        f"term {term!r} appears in categories "
                        f"{seen[term]!r} and {category!r}"
                    )
                seen[term] = category
        overlap = self.excluded & set(seen)
        if overlap:
            raise DataError(
                f"excluded terms also categorized: {', '.join(sorted(overlap))}"
            )
        self._category_of = seen

    def category_of(self, term: str) -> str | None:
        return self._category_of.get(term)


@dataclass
class CategoryRow:
    category: str
    count: int
    percent: float
    examples: list[str]


@dataclass
class CategoryBreakdown:
    rows: list[CategoryRow]
    uncategorized: list[tuple[str, int]]
    categorized_total: int


def fold_term(term: str) -> str:
    return term.lstrip("#").lower()


def load_lexicon(path: str | Path) -> CategoryLexicon:
    """Parse "category<TAB>term" lines; "!excluded" is the excluded set."""
    categories: dict[str, set[str]] = {}
    excluded: set[str] = set()
    for raw in Path(path).read_text(encoding="utf-8").splitlines():
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        try:
            category, term = line.split("\t")
        except ValueError as exc:
            raise DataError(f"bad lexicon line: {raw!r}") from exc
        term = fold_term(term.strip())
        category = category.strip()
        if category == "!excluded":
            excluded.add(term)
        else:
            categories.setdefault(category, set()).add(term)
    return CategoryLexicon(categories=categories, excluded=excluded)


def daily_counts(
    tweets: Iterable[Tweet],
    assignment: StanceAssignment,
    start: date,
    end: date,
) -> DailySeries:
    """Per-day per-camp counts over assigned users, zero-filled on [start, end]."""
    if start > end:
        raise ValueError("start day must not exceed end day")
    camp_of = assignment.user_to_camp()
    camps = tuple(assignment.camp_names)
    buckets: Counter = Counter()
    for tweet in tweets:
        camp = camp_of.get(tweet.user_id)
        if camp is None:
            continue
        day = tweet.day()
        if start <= day <= end:
            buckets[(day, camp)] += 1
    rows = []
    day = start
    while day <= end:
        for camp in camps:
            rows.append((day, camp, buckets.get((day, camp), 0)))
        day += timedelta(days=1)
    return DailySeries(camps=camps, start=start, end=end, rows=rows)


def top_terms_table(
    counts: GroupTermCounts, n: int, excluded: set[str] | frozenset = frozenset()
) -> dict[str, list[tuple[str, int]]]:
    """Top-n terms by raw frequency per camp after removing excluded terms."""
    if n < 1:
        raise ValueError("n must be >= 1")
    table = {}
    for camp in counts.camps:
        ranked = sorted(
            (
                (term, count)
                for term, count in counts.counts[camp].items()
                if term not in excluded
            ),
            key=lambda item: (-item[1], item[0]),
        )
        table[camp] = ranked[:n]
    return table


def categorize_terms(
    table: Sequence[tuple[str, int]], lexicon: CategoryLexicon
) -> CategoryBreakdown:
    """Roll one camp's term table up into lexicon categories.

    Percentages are shares of the categorized volume only; terms outside
    the lexicon are reported separately, excluded terms are dropped.
    """
    category_counts: Counter = Counter()
    category_terms: dict[str, list[tuple[str, int]]] = {}
    uncategorized: list[tuple[str, int]] = []
    for term, count in table:
        folded = fold_term(term)
        if folded in lexicon.excluded:
            continue
        category = lexicon.category_of(folded)
        if category is None:
            uncategorized.append((term, count))
        else:
            category_counts[category] += count
            category_terms.setdefault(category, []).append((term, count))
    total = sum(category_counts.values())
    rows = []
    for category in sorted(category_counts, key=lambda c: (-category_counts[c], c)):
        members = sorted(category_terms[category], key=lambda tc: (-tc[1], tc[0]))
        rows.append(
            CategoryRow(
                category=category,
                count=category_counts[category],
                percent=100.0 * category_counts[category] / total if total else 0.0,
                examples=[term for term, _ in members[:3]],
            )
        )
    return CategoryBreakdown(
        rows=rows, uncategorized=uncategorized, categorized_total=total
    )


# ---------------------------------------------------------------------------
# emitters


def write_daily_csv(series: DailySeries, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["day", "camp", "count"])
        for day, camp, count in series.rows:
            writer.writerow([day.isoformat(), camp, count])


def write_top_terms_csv(
    rows: Sequence[tuple[str, int]],
    path: str | Path,
    counts: GroupTermCounts | None = None,
) -> None:
    with open(path, "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["term", "count"])
        for term, count in rows:
            display = counts.display_form(term) if counts else term
            writer.writerow([display, count])


def write_categories_csv(breakdown: CategoryBreakdown, path: str | Path) -> None:
    """Category rows first; a single summary row holds uncategorized terms."""
    with open(path, "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["category", "count", "percent", "examples"])
        for row in breakdown.rows:
            writer.writerow(
                [row.category, row.count, f"{row.percent:.4f}", " ".join(row.examples)]
            )
        if breakdown.uncategorized:
            total = sum(count for _, count in breakdown.uncategorized)
            examples = " ".join(term for term, _ in breakdown.uncategorized[:3])
            writer.writerow(["(uncategorized)", total, "", examples])


def _svg_polyline(points: Sequence[tuple[float, float]], color: str) -> str:
    coords = " ".join(f"{x:.2f},{y:.2f}" for x, y in points)
    return (
        f'<polyline fill="none" stroke="{color}" stroke-width="1.5" '
        f'points="{coords}"/>'
    )


def emit_timeseries_plot(series: DailySeries, path: str | Path) -> None:
    """Write a standalone SVG with one polyline per camp and labeled axes."""
    if not series.rows:
        raise ValueError("cannot plot an empty series")
    width, height = 800.0, 400.0
    left, right, top, bottom = 70.0, 170.0, 30.0, 60.0
    plot_w = width - left - right
    plot_h = height - top - bottom

    days = sorted({day for day, _, _ in series.rows})
    max_count = max(count for _, _, count in series.rows)
    y_max = max(max_count, 1)

    def x_of(i: int) -> float:
        if len(days) == 1:
            return left + plot_w / 2
        return left + plot_w * i / (len(days) - 1)

    def y_of(count: float) -> float:
        return top + plot_h * (1.0 - count / y_max)

    day_index = {day: i for i, day in enumerate(days)}
    parts = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0f}" '
        f'height="{height:.0f}" viewBox="0 0 {width:.0f} {height:.0f}">',
        f'<rect width="{width:.0f}" height="{height:.0f}" fill="white"/>',
        # axes
        f'<line x1="{left:.2f}" y1="{top:.2f}" x2="{left:.2f}" '
        f'y2="{top + plot_h:.2f}" stroke="black"/>',
        f'<line x1="{left:.2f}" y1="{top + plot_h:.2f}" x2="{left + plot_w:.2f}" '
        f'y2="{top + plot_h:.2f}" stroke="black"/>',
        f'<text x="{left + plot_w / 2:.2f}" y="{height - 10:.2f}" '
        f'text-anchor="middle" font-size="13">day (UTC)</text>',
        f'<text x="16" y="{top + plot_h / 2:.2f}" text-anchor="middle" '
        f'font-size="13" transform="rotate(-90 16 {top + plot_h / 2:.2f})">tweets</text>',
    ]
    for tick in range(5):
        value = y_max * tick / 4
        y = y_of(value)
        parts.append(
            f'<line x1="{left - 4:.2f}" y1="{y:.2f}" x2="{left:.2f}" y2="{y:.2f}" '
            'stroke="black"/>'
        )
        parts.append(
            f'<text x="{left - 8:.2f}" y="{y + 4:.2f}" text-anchor="end" '
            f'font-size="11">{value:.0f}</text>'
        )
    tick_step = max(1, (len(days) - 1) // 8) if len(days) > 1 else 1
    for i in range(0, len(days), tick_step):
        x = x_of(i)
        parts.append(
            f'<line x1="{x:.2f}" y1="{top + plot_h:.2f}" x2="{x:.2f}" '
            f'y2="{top + plot_h + 4:.2f}" stroke="black"/>'
        )
        parts.append(
            f'<text x="{x:.2f}" y="{top + plot_h + 18:.2f}" text-anchor="middle" '
            f'font-size="10">{days[i].isoformat()}</text>'
        )
    for idx, camp in enumerate(series.camps):
        color = PLOT_COLORS[idx % len(PLOT_COLORS)]
        points = [
            (x_of(day_index[day]), y_of(count))
            for day, c, count in series.rows
            if c == camp
        ]
        parts.append(_svg_polyline(points, color))
        legend_y = top + 16 * idx
        parts.append(
            f'<line x1="{left + plot_w + 10:.2f}" y1="{legend_y:.2f}" '
            f'x2="{left + plot_w + 34:.2f}" y2="{legend_y:.2f}" '
            f'stroke="{color}" stroke-width="1.5"/>'
        )
        parts.append(
            f'<text x="{left + plot_w + 40:.2f}" y="{legend_y + 4:.2f}" '
            f'font-size="12">{camp}</text>'
        )
    parts.append("</svg>")
    Path(path).write_text("\n".join(parts) + "\n", encoding="utf-8")

from __future__ import annotations

from collections import Counter
from datetime import date

import pytest

from stancelens.cluster import StanceAssignment
from stancelens.errors import DataError
from stancelens.report import (
    CategoryLexicon,
    categorize_terms,
    daily_counts,
    emit_timeseries_plot,
    load_lexicon,
    top_terms_table,
    write_categories_csv,
    write_daily_csv,
)
from stancelens.valence import GroupTermCounts

from conftest import make_tweet


def _assignment(camp_of: dict[str, str]) -> StanceAssignment:
    return StanceAssignment.from_label_map(camp_of, ["left", "right"])


def _counts(left: dict, right: dict) -> GroupTermCounts:
    return GroupTermCounts(
        term_kind="hashtag",
        camps=("left", "right"),
        counts={"left": Counter(left), "right": Counter(right)},
        totals={"left": sum(left.values()), "right": sum(right.values())},
        display={},
    )


# ---------------------------------------------------------------------------
# daily series


def _corpus():
    camp_of = {"a": "left", "b": "right"}
    tweets = [
        make_tweet(tweet_id="1", user_id="a", created="2020-03-01T08:00:00Z"),
        make_tweet(tweet_id="2", user_id="a", created="2020-03-01T21:00:00Z"),
        make_tweet(tweet_id="3", user_id="a", created="2020-03-03T10:00:00Z"),
        make_tweet(tweet_id="4", user_id="b", created="2020-03-03T10:00:00Z"),
        make_tweet(tweet_id="5", user_id="stranger", created="2020-03-02T10:00:00Z"),
    ]
    return tweets, _assignment(camp_of)


def test_daily_counts_zero_fill_and_values():
    tweets, assignment = _corpus()
    series = daily_counts(tweets, assignment, date(2020, 3, 1), date(2020, 3, 4))
    assert len(series.rows) == 4 * 2  # contiguous days x camps
    lookup = {(d, c): n for d, c, n in series.rows}
    assert lookup[(date(2020, 3, 1), "left")] == 2
    assert lookup[(date(2020, 3, 2), "left")] == 0
    assert lookup[(date(2020, 3, 2), "right")] == 0
    assert lookup[(date(2020, 3, 3), "right")] == 1


def test_daily_counts_conservation():
    tweets, assignment = _corpus()
    series = daily_counts(tweets, assignment, date(2020, 3, 1), date(2020, 3, 4))
    camp_of = assignment.user_to_camp()
    for camp in ("left", "right"):
        expected = sum(
            1
            for t in tweets
            if camp_of.get(t.user_id) == camp
            and date(2020, 3, 1) <= t.day() <= date(2020, 3, 4)
        )
        assert series.camp_total(camp) == expected


def test_daily_counts_bad_window():
    tweets, assignment = _corpus()
    with pytest.raises(ValueError):
        daily_counts(tweets, assignment, date(2020, 3, 4), date(2020, 3, 1))


# ---------------------------------------------------------------------------
# top terms


def test_top_terms_basic_and_clamp():
    counts = _counts({"x": 5, "y": 3}, {"z": 1})
    table = top_terms_table(counts, 1)
    assert table["left"] == [("x", 5)]
    assert top_terms_table(counts, 10)["left"] == [("x", 5), ("y", 3)]


def test_top_terms_exclusion():
    counts = _counts({"x": 5, "y": 3}, {})
    assert top_terms_table(counts, 5, excluded={"x"})["left"] == [("y", 3)]


def test_top_terms_tie_by_term_order():
    counts = _counts({"b": 2, "a": 2, "c": 3}, {})
    assert top_terms_table(counts, 3)["left"] == [("c", 3), ("a", 2), ("b", 2)]


# ---------------------------------------------------------------------------
# categories


def test_lexicon_rejects_duplicates_and_overlap():
    with pytest.raises(DataError):
        CategoryLexicon(categories={"one": {"x"}, "two": {"x"}})
    with pytest.raises(DataError):
        CategoryLexicon(categories={"one": {"x"}}, excluded={"x"})


def test_lexicon_file_parse(tmp_path):
    path = tmp_path / "lex.tsv"
    path.write_text(
        "# comment\nnews\t#Breaking\nnews\tupdates\nsupport\tmaga\n!excluded\tcovid19\n",
        encoding="utf-8",
    )
    lexicon = load_lexicon(path)
    assert lexicon.category_of("breaking") == "news"
    assert lexicon.category_of("maga") == "support"
    assert "covid19" in lexicon.excluded


def test_categorize_all_in_one_category():
    lexicon = CategoryLexicon(categories={"only": {"x", "y"}})
    result = categorize_terms([("x", 5), ("y", 5)], lexicon)
    assert len(result.rows) == 1
    assert result.rows[0].percent == 100.0


def test_categorize_uncategorized_outside_base():
    lexicon = CategoryLexicon(categories={"known": {"x"}})
    result = categorize_terms([("x", 30), ("mystery", 99)], lexicon)
    assert result.rows[0].percent == 100.0
    assert result.uncategorized == [("mystery", 99)]


def test_categorize_split_30_70():
    lexicon = CategoryLexicon(categories={"minor": {"a"}, "major": {"b"}})
    result = categorize_terms([("a", 30), ("b", 70)], lexicon)
    by_name = {row.category: row for row in result.rows}
    assert by_name["minor"].percent == pytest.approx(30.0)
    assert by_name["major"].percent == pytest.approx(70.0)
    assert result.rows[0].category == "major"  # ordered by count


def test_categorize_totals_exact_and_percent_sum():
    lexicon = CategoryLexicon(
        categories={"a": {"t1", "t2"}, "b": {"t3"}, "c": {"t4", "t5"}}
    )
    table = [("t1", 11), ("t2", 7), ("t3", 13), ("t4", 3), ("t5", 29)]
    result = categorize_terms(table, lexicon)
    assert result.categorized_total == sum(c for _, c in table)
    by_name = {row.category: row for row in result.rows}
    assert by_name["a"].count == 18
    assert abs(sum(row.percent for row in result.rows) - 100.0) < 0.1


def test_categorize_drops_excluded():
    lexicon = CategoryLexicon(categories={"cat": {"x"}}, excluded={"noise"})
    result = categorize_terms([("x", 5), ("noise", 50)], lexicon)
    assert result.categorized_total == 5
    assert result.uncategorized == []


# ---------------------------------------------------------------------------
# emitters


def test_daily_csv_deterministic(tmp_path):
    tweets, assignment = _corpus()
    series = daily_counts(tweets, assignment, date(2020, 3, 1), date(2020, 3, 4))
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    write_daily_csv(series, a)
    write_daily_csv(series, b)
    assert a.read_bytes() == b.read_bytes()
    header = a.read_text().splitlines()[0]
    assert header == "day,camp,count"


def test_plot_svg_deterministic_and_labeled(tmp_path):
    tweets, assignment = _corpus()
    series = daily_counts(tweets, assignment, date(2020, 3, 1), date(2020, 3, 10))
    first, second = tmp_path / "p1.svg", tmp_path / "p2.svg"
    emit_timeseries_plot(series, first)
    emit_timeseries_plot(series, second)
    assert first.read_bytes() == second.read_bytes()
    svg = first.read_text()
    assert svg.count("<polyline") == 2  # one per camp
    assert "tweets" in svg and "day (UTC)" in svg
    assert "left" in svg and "right" in svg


def test_plot_rejects_empty_series():
    from stancelens.report import DailySeries

    empty = DailySeries(camps=("left", "right"), start=date(2020, 3, 1), end=date(2020, 3, 1), rows=[])
    with pytest.raises(ValueError):
        emit_timeseries_plot(empty, "/tmp/never.svg")


def test_categories_csv_shape(tmp_path):
    lexicon = CategoryLexicon(categories={"cat": {"x"}})
    result = categorize_terms([("x", 5), ("odd", 2)], lexicon)
    path = tmp_path / "categories.csv"
    write_categories_csv(result, path)
    lines = path.read_text().splitlines()
    assert lines[0] == "category,count,percent,examples"
    assert lines[1].startswith("cat,5,100.0000,")
    assert lines[2].startswith("(uncategorized),2,,")

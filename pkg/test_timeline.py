#!/usr/bin/env python3
"""Tests for quarterly bucketing, top-editor selection, derivatives and correlation."""

import random
from datetime import datetime, timedelta, timezone

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import timeline
from conftest import BOSTON_COUNTS, make_timeline, revisions_from_counts
from timeline import CorrelationMode, EmptyInput, TooFewEditors, TooShort
from wikipedia import HIDDEN_EDITOR, QualityClass, RevisionRecord


def _rev(revision_id: int, when: datetime, editor: str, article: str = "Boston") -> RevisionRecord:
    return RevisionRecord(article, revision_id, when, editor)


def _utc(*args) -> datetime:
    return datetime(*args, tzinfo=timezone.utc)


def test_single_revision_makes_one_bucket():
    buckets = timeline.bucket_by_quarter([_rev(1, _utc(2005, 2, 10), "A")])
    assert buckets.start_quarter == timeline.quarter_index(_utc(2005, 1, 1))
    assert timeline.quarter_label(buckets.start_quarter) == "2005Q1"
    assert buckets.series["A"].counts == (1,)
    assert buckets.span == 1


def test_bucketing_across_quarters():
    revisions = [
        _rev(1, _utc(2005, 1, 5), "A"),
        _rev(2, _utc(2005, 4, 2), "A"),
        _rev(3, _utc(2005, 4, 3), "A"),
    ]
    buckets = timeline.bucket_by_quarter(revisions)
    assert buckets.series["A"].counts == (1, 2)
    assert timeline.quarter_label(buckets.start_quarter) == "2005Q1"


def test_quarter_boundary():
    assert timeline.quarter_index(_utc(2005, 3, 31, 23, 59, 59)) == 20
    assert timeline.quarter_index(_utc(2005, 4, 1, 0, 0, 0)) == 21
    assert timeline.quarter_index(_utc(2000, 1, 1)) == 0
    assert timeline.quarter_index(_utc(1999, 12, 31)) == -1


def test_quarter_index_uses_utc():
    eastern = timezone(timedelta(hours=-5))
    # 2005-03-31 20:00 at UTC-5 is already April 1st in UTC
    assert timeline.quarter_index(datetime(2005, 3, 31, 20, 0, tzinfo=eastern)) == 21


def test_quarter_labels_round_trip():
    for q in (-4, 0, 20, 43, 99):
        assert timeline.parse_quarter_label(timeline.quarter_label(q)) == q
    with pytest.raises(ValueError):
        timeline.parse_quarter_label("2005Q5")


def test_empty_input():
    with pytest.raises(EmptyInput):
        timeline.bucket_by_quarter([])


def test_mixed_articles_rejected():
    with pytest.raises(timeline.TimelineError):
        timeline.bucket_by_quarter([
            _rev(1, _utc(2005, 1, 5), "A", "Boston"),
            _rev(2, _utc(2005, 1, 6), "A", "Chicago"),
        ])


def test_bucketing_conserves_revisions():
    rng = random.Random(20110615)
    for _ in range(100):
        n = rng.randint(1, 400)
        editors = [f"E{i}" for i in range(rng.randint(1, 25))]
        start = _utc(2001, 1, 1)
        revisions = [
            _rev(i + 1, start + timedelta(seconds=rng.randint(0, 10 * 365 * 86400)), rng.choice(editors))
            for i in range(n)
        ]
        buckets = timeline.bucket_by_quarter(revisions)

        assert sum(s.total for s in buckets.series.values()) == n
        assert {len(s.counts) for s in buckets.series.values()} == {buckets.span}
        quarters = [timeline.quarter_index(r.timestamp) for r in revisions]
        assert buckets.start_quarter == min(quarters)
        assert buckets.span == max(quarters) - min(quarters) + 1


def test_fewer_editors_than_top_n_are_all_kept():
    revisions = revisions_from_counts("Boston", {"A": [1], "B": [2], "C": [3], "D": [4]})
    selected = timeline.select_top_editors(timeline.bucket_by_quarter(revisions), top_n=10)
    assert selected.editor_keys == ("D", "C", "B", "A")


def test_top_editor_tie_breaks_on_first_edit():
    revisions = revisions_from_counts("Boston", {"B": [0, 10], "A": [5, 5], "C": [3, 0]})
    selected = timeline.select_top_editors(timeline.bucket_by_quarter(revisions), top_n=2)
    assert selected.editor_keys == ("A", "B")


def test_top_editor_tie_breaks_on_name():
    revisions = revisions_from_counts("Boston", {"Zed": [2], "Amy": [2]})
    selected = timeline.select_top_editors(timeline.bucket_by_quarter(revisions), top_n=1)
    assert selected.editor_keys == ("Amy",)


def test_top_one_editor():
    revisions = revisions_from_counts("Boston", {"A": [5], "B": [9]})
    selected = timeline.select_top_editors(timeline.bucket_by_quarter(revisions), top_n=1)
    assert selected.editor_keys == ("B",)
    assert selected.revision_count == 14


def test_hidden_and_bot_editors():
    revisions = revisions_from_counts("Boston", {HIDDEN_EDITOR: [50], "SmackBot": [20], "Ajd": [3]})
    buckets = timeline.bucket_by_quarter(revisions)

    assert timeline.select_top_editors(buckets).editor_keys == ("SmackBot", "Ajd")
    assert timeline.select_top_editors(buckets, exclude_bots=True).editor_keys == ("Ajd",)


def test_no_eligible_editor():
    buckets = timeline.bucket_by_quarter(revisions_from_counts("Boston", {HIDDEN_EDITOR: [4]}))
    with pytest.raises(EmptyInput):
        timeline.select_top_editors(buckets)


def test_top_n_must_be_positive():
    buckets = timeline.bucket_by_quarter(revisions_from_counts("Boston", {"A": [1]}))
    with pytest.raises(ValueError):
        timeline.select_top_editors(buckets, top_n=0)


def test_selected_timeline_carries_quality_class(boston_revisions):
    selected = timeline.select_top_editors(
        timeline.bucket_by_quarter(boston_revisions), quality_class=QualityClass.FEATURED
    )
    assert selected.quality_class is QualityClass.FEATURED
    assert selected.editor_keys == ("Ajd", "67.175.191.237", "Loodog")
    assert selected.span == 8


@pytest.mark.parametrize(
    "counts, expected",
    [([5, 5, 5], [0, 0]), ([0, 4, 1], [4, -3]), ([7], [])],
)
def test_derivative_series(counts, expected):
    assert timeline.derivative_series(counts) == expected


@settings(max_examples=200)
@given(st.lists(st.integers(0, 1000), min_size=1, max_size=40))
def test_derivative_cumulative_sum_recovers_series(counts):
    deltas = timeline.derivative_series(counts)
    assert len(deltas) == len(counts) - 1
    assert [counts[0], *(counts[0] + np.cumsum(deltas)).tolist()] == counts


def test_derivative_timeline():
    derived = timeline.derivative_timeline(make_timeline({"A": [0, 4, 1], "B": [1, 1, 2]}))
    assert derived == {"A": [4, -3], "B": [0, 1]}


def test_activity_rows():
    rows = timeline.activity_rows(make_timeline({"A": [0, 4, 1], "B": [1, 1, 2]}, start_quarter=23))
    assert rows == [("2005Q4", (0, 1)), ("2006Q1", (4, 1)), ("2006Q2", (1, 2))]


def test_pearson_examples():
    assert timeline.pearson([1, 2, 3], [3, 2, 1]) == pytest.approx(-1.0)
    assert timeline.pearson([1, 2, 3], [1, 2, 4]) == pytest.approx(0.98198, abs=1e-5)
    assert timeline.pearson([1, 2, 3], [1, 2, 3]) == pytest.approx(1.0)
    assert timeline.pearson([5, 5, 5], [1, 2, 3]) is None
    with pytest.raises(ValueError):
        timeline.pearson([1, 2], [1, 2, 3])


_series = st.lists(st.integers(0, 60), min_size=2, max_size=30)


@settings(max_examples=1000, deadline=None)
@given(data=st.data())
def test_pearson_properties(data):
    x = data.draw(_series)
    y = data.draw(st.lists(st.integers(0, 60), min_size=len(x), max_size=len(x)))
    r = timeline.pearson(x, y)
    swapped = timeline.pearson(y, x)
    assert (r is None) == (swapped is None)
    if r is not None:
        assert r == pytest.approx(swapped, abs=1e-15)

    if len(set(x)) > 1:
        assert timeline.pearson(x, x) == pytest.approx(1.0, abs=1e-12)
    if r is None:
        assert len(set(x)) == 1 or len(set(y)) == 1
        return

    assert -1.0 - 1e-12 <= r <= 1.0 + 1e-12
    a = data.draw(st.floats(0.01, 100))
    b = data.draw(st.floats(-100, 100))
    scaled = timeline.pearson([a * v + b for v in x], y)
    assert scaled == pytest.approx(r, abs=1e-9)


def test_correlation_matrix_is_symmetric_with_unit_diagonal():
    matrix = timeline.correlation_matrix(make_timeline(BOSTON_COUNTS))
    n = len(matrix.editor_keys)
    for i in range(n):
        assert matrix.entry(i, i) == 1.0
        for j in range(n):
            assert matrix.entry(i, j) == matrix.entry(j, i)
    assert matrix.get("Ajd", "Loodog") > 0
    assert matrix.get("Ajd", "67.175.191.237") < 0


def test_correlation_matrix_undefined_entries():
    matrix = timeline.correlation_matrix(make_timeline({"A": [3, 3, 3], "B": [1, 2, 3]}))
    assert matrix.get("A", "B") is None
    assert matrix.get("A", "A") is None
    assert matrix.get("B", "B") == 1.0
    assert matrix.to_json()["entries"][0] == [None, None]


def test_correlation_matrix_derivatives():
    # Identical changes each quarter, different levels
    matrix = timeline.correlation_matrix(
        make_timeline({"A": [1, 5, 2, 6], "B": [10, 14, 11, 15]}), CorrelationMode.DERIVATIVES
    )
    assert matrix.get("A", "B") == pytest.approx(1.0)


def test_correlation_needs_two_editors():
    with pytest.raises(TooFewEditors):
        timeline.correlation_matrix(make_timeline({"A": [1, 2, 3]}))


def test_derivative_correlation_needs_two_quarters():
    with pytest.raises(TooShort):
        timeline.correlation_matrix(make_timeline({"A": [1], "B": [2]}), CorrelationMode.DERIVATIVES)


def test_timeline_validation():
    with pytest.raises(timeline.TimelineError):
        make_timeline({"A": [1, 2], "B": [1]})
    with pytest.raises(timeline.TimelineError):
        make_timeline({"A": [0, 0]})
    with pytest.raises(EmptyInput):
        make_timeline({})


def test_bot_name():
    assert timeline.is_bot_name("SmackBot")
    assert timeline.is_bot_name("ClueBot NG") is False
    assert not timeline.is_bot_name("Abbott")


def test_quality_class_default_is_other():
    selected = timeline.select_top_editors(timeline.bucket_by_quarter(revisions_from_counts("X", {"A": [1]})))
    assert selected.quality_class is QualityClass.OTHER

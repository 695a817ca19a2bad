#!/usr/bin/env python3
"""Tests for the MediaWiki client, revision cache, sampling and eligibility filter."""

from datetime import datetime, timedelta, timezone

import httpx
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import wikipedia
from conftest import API_URL, revisions_from_counts
from wikipedia import (
    HIDDEN_EDITOR,
    ApiError,
    ArticleMeta,
    NetworkError,
    NotFound,
    QualityClass,
    RevisionRecord,
    WikipediaClient,
)

FETCHED_AT = datetime(2011, 6, 1, tzinfo=timezone.utc)


def _meta(revision_count: int, editors: int, is_stub: bool = False) -> ArticleMeta:
    return ArticleMeta("Example", QualityClass.NON_ASSESSED, revision_count, editors, is_stub, FETCHED_AT)


def _stream(article_key: str, n: int) -> list[RevisionRecord]:
    start = datetime(2004, 1, 1, tzinfo=timezone.utc)
    return [
        RevisionRecord(article_key, 10 + i, start + timedelta(hours=7 * i), f"Editor{i % 37}")
        for i in range(n)
    ]


def test_cached_history_loads_without_network(tmp_path, fake_api):
    """A cached article of 1237 revisions is served from disk, unchanged."""
    records = _stream("Cached article", 1237)
    path = wikipedia.cache_path(tmp_path, "Cached article")
    wikipedia.write_cache(path, records)
    original = path.read_bytes()

    loaded = fake_api.client().fetch_revisions("Cached article", tmp_path)

    assert len(loaded) == 1237
    assert loaded[0].timestamp <= loaded[-1].timestamp
    assert loaded == records
    assert fake_api.requests == []

    wikipedia.write_cache(path, loaded)
    assert path.read_bytes() == original


def test_continuation_is_followed(tmp_path, fake_api):
    fake_api.add_article("Long article", _stream("Long article", 1300))
    client = fake_api.client(page_size=500)

    records = client.fetch_revisions("Long article", tmp_path)

    assert len(records) == 1300
    assert len(fake_api.requests) == 3
    assert fake_api.requests[1]["rvcontinue"] == "500"
    assert [r.revision_id for r in records] == sorted(r.revision_id for r in records)
    assert wikipedia.cache_path(tmp_path, "Long article").exists()


def test_refresh_refetches_cached_article(tmp_path, fake_api):
    fake_api.add_article("Boston", revisions_from_counts("Boston", {"A": [1, 2]}))
    client = fake_api.client()
    client.fetch_revisions("Boston", tmp_path)
    client.fetch_revisions("Boston", tmp_path)
    assert len(fake_api.requests) == 1

    client.fetch_revisions("Boston", tmp_path, refresh=True)
    assert len(fake_api.requests) == 2


def test_corrupt_cache_is_refetched(tmp_path, fake_api):
    fake_api.add_article("Boston", revisions_from_counts("Boston", {"A": [1, 2]}))
    path = wikipedia.cache_path(tmp_path, "Boston")
    path.write_text("not json\n", encoding="utf-8")

    records = fake_api.client().fetch_revisions("Boston", tmp_path)

    assert len(records) == 3
    assert len(wikipedia.read_cache(path)) == 3


def test_missing_page_raises_not_found(tmp_path, fake_api):
    with pytest.raises(NotFound):
        fake_api.client().fetch_revisions("Zzqx_no_such_page", tmp_path)
    assert not wikipedia.cache_path(tmp_path, "Zzqx no such page").exists()


def test_missingtitle_error_object_raises_not_found(tmp_path):
    def handler(request: httpx.Request) -> httpx.Response:
        return httpx.Response(200, json={"error": {"code": "missingtitle", "info": "The page doesn't exist."}})

    client = WikipediaClient(API_URL, transport=httpx.MockTransport(handler), sleep=lambda s: None)
    with pytest.raises(NotFound):
        client.fetch_revisions("Nothing", tmp_path)


def test_other_api_error_raises_api_error(tmp_path):
    def handler(request: httpx.Request) -> httpx.Response:
        return httpx.Response(200, json={"error": {"code": "badvalue", "info": "Unrecognized value"}})

    client = WikipediaClient(API_URL, transport=httpx.MockTransport(handler), sleep=lambda s: None)
    with pytest.raises(ApiError, match="badvalue"):
        client.fetch_revisions("Anything", tmp_path)


def test_malformed_json_raises_api_error(tmp_path):
    client = WikipediaClient(
        API_URL,
        transport=httpx.MockTransport(lambda request: httpx.Response(200, text="<html>")),
        sleep=lambda s: None,
    )
    with pytest.raises(ApiError):
        client.fetch_revisions("Anything", tmp_path)


def test_server_errors_are_retried_with_backoff(tmp_path, fake_api):
    fake_api.add_article("Boston", revisions_from_counts("Boston", {"A": [1]}))
    fake_api.failures = [503, 429]
    sleeps: list[float] = []

    records = fake_api.client(sleeps=sleeps).fetch_revisions("Boston", tmp_path)

    assert len(records) == 1
    assert sleeps == [1.0, 2.0]


def test_persistent_failure_raises_network_error(tmp_path, fake_api):
    fake_api.add_article("Boston", revisions_from_counts("Boston", {"A": [1]}))
    fake_api.failures = [503] * 10
    sleeps: list[float] = []

    with pytest.raises(NetworkError):
        fake_api.client(sleeps=sleeps).fetch_revisions("Boston", tmp_path)

    assert sleeps == [1.0, 2.0, 4.0]
    assert len(fake_api.requests) == 4


def test_transport_errors_are_retried(tmp_path):
    def handler(request: httpx.Request) -> httpx.Response:
        raise httpx.ConnectError("connection refused", request=request)

    sleeps: list[float] = []
    client = WikipediaClient(API_URL, transport=httpx.MockTransport(handler), sleep=sleeps.append)
    with pytest.raises(NetworkError) as excinfo:
        client.fetch_revisions("Boston", tmp_path)
    assert isinstance(excinfo.value.__cause__, httpx.ConnectError)
    assert len(sleeps) == 3


def test_client_error_is_not_retried(tmp_path, fake_api):
    fake_api.failures = [403]
    with pytest.raises(ApiError):
        fake_api.client().fetch_revisions("Boston", tmp_path)
    assert len(fake_api.requests) == 1


def test_hidden_user_maps_to_placeholder(tmp_path):
    def handler(request: httpx.Request) -> httpx.Response:
        revisions = [
            {"revid": 1, "timestamp": "2005-02-10T12:00:00Z", "user": "Alice"},
            {"revid": 2, "timestamp": "2005-02-11T12:00:00Z", "userhidden": True},
        ]
        return httpx.Response(200, json={"query": {"pages": [{"title": "Secret", "revisions": revisions}]}})

    client = WikipediaClient(API_URL, transport=httpx.MockTransport(handler), sleep=lambda s: None)
    records = client.fetch_revisions("Secret", tmp_path)

    assert [r.editor_key for r in records] == ["Alice", HIDDEN_EDITOR]
    assert wikipedia.count_distinct_editors(records) == 1


def test_fetch_many_records_failures(tmp_path, fake_api):
    fake_api.add_article("Boston", revisions_from_counts("Boston", {"A": [1, 1]}))

    results = fake_api.client().fetch_many(["Boston", "Missing page", "boston"], tmp_path, max_workers=2)

    assert list(results) == ["Boston", "Missing page"]
    assert len(results["Boston"]) == 2
    assert isinstance(results["Missing page"], NotFound)


def test_random_sampling_returns_distinct_titles(fake_api):
    first = [f"Article {i}" for i in range(100)] + [f"Article {i}" for i in range(10)]
    second = [f"Article {i}" for i in range(95, 130)]
    fake_api.random_batches = [first, second]

    titles = fake_api.client().sample_random_candidates(115)

    assert len(titles) == 115
    assert len(set(titles)) == 115
    assert fake_api.requests[0]["rnnamespace"] == "0"
    assert fake_api.requests[0]["rnlimit"] == "115"
    assert fake_api.requests[1]["rnlimit"] == "15"


def test_random_sampling_single_title(fake_api):
    fake_api.random_batches = [["Only one"]]
    assert fake_api.client().sample_random_candidates(1) == ["Only one"]


def test_random_sampling_rejects_zero(fake_api):
    with pytest.raises(ValueError):
        fake_api.client().sample_random_candidates(0)
    assert fake_api.requests == []


def test_random_sampling_gives_up_when_exhausted(fake_api):
    fake_api.random_batches = [["Same"]] * 20
    with pytest.raises(ApiError):
        fake_api.client().sample_random_candidates(3)


@pytest.mark.parametrize(
    "revision_count, editors, is_stub, expected",
    [
        (49, 12, False, False),
        (50, 10, False, True),
        (500, 40, True, False),
        (50, 9, False, False),
    ],
)
def test_eligibility(revision_count, editors, is_stub, expected):
    assert wikipedia.passes_eligibility(_meta(revision_count, editors, is_stub)) is expected


@settings(max_examples=300)
@given(
    revision_count=st.integers(0, 200),
    editors=st.integers(0, 200),
    more_revisions=st.integers(0, 50),
    more_editors=st.integers(0, 50),
    is_stub=st.booleans(),
)
def test_eligibility_is_monotone(revision_count, editors, more_revisions, more_editors, is_stub):
    editors = min(editors, revision_count)
    bigger_editors = min(editors + more_editors, revision_count + more_revisions)
    before = wikipedia.passes_eligibility(_meta(revision_count, editors, is_stub))
    after = wikipedia.passes_eligibility(_meta(revision_count + more_revisions, bigger_editors, is_stub))
    assert not (before and not after)


def test_meta_rejects_more_editors_than_revisions():
    with pytest.raises(ValueError):
        _meta(3, 4)


@pytest.mark.parametrize(
    "wikitext, expected",
    [
        ("x" * 3000 + "\n{{US-geo-stub}}", True),
        ("{{Stub|date=May 2010}}\n" + "x" * 3000, True),
        ("{{Infobox city|name=Boston}}\n" + "x" * 3000, False),
        ("{{Stubborn facts}}\n" + "x" * 3000, False),
        ("A short page.", True),
    ],
)
def test_stub_detection(wikitext, expected):
    assert wikipedia.is_stub_text(wikitext) is expected


def test_stub_threshold_is_configurable():
    text = "x" * 1000
    assert wikipedia.is_stub_text(text)
    assert not wikipedia.is_stub_text(text, stub_max_bytes=500)


def test_fetch_article_meta(tmp_path, fake_api):
    revisions = revisions_from_counts("Boston", {f"E{i}": [5, 1] for i in range(12)})
    fake_api.add_article("Boston", revisions, content="{{Boston-stub}}" + "x" * 4000)
    client = fake_api.client()

    meta = client.fetch_article_meta("Boston", QualityClass.FEATURED,
                                     client.fetch_revisions("Boston", tmp_path))

    assert meta.revision_count == 72
    assert meta.distinct_editor_count == 12
    assert meta.is_stub
    assert not wikipedia.passes_eligibility(meta)


def test_revision_record_json_line_keeps_key_order():
    record = RevisionRecord("Boston", 7, datetime(2005, 2, 10, tzinfo=timezone.utc), "Ajd")
    line = record.to_json_line()
    assert line == '{"article_key": "Boston", "revision_id": 7, "timestamp": "2005-02-10T00:00:00Z", "editor_key": "Ajd"}'
    assert RevisionRecord.from_json_line(line) == record


def test_revision_record_validation():
    with pytest.raises(ValueError):
        RevisionRecord("Boston", 0, datetime(2005, 2, 10, tzinfo=timezone.utc), "Ajd")
    with pytest.raises(ValueError):
        RevisionRecord("Boston", 1, datetime(2005, 2, 10), "Ajd")


def test_normalize_title():
    assert wikipedia.normalize_title("boston_red  sox ") == "Boston red sox"
    with pytest.raises(ValueError):
        wikipedia.normalize_title("  _ ")


def test_read_title_list(tmp_path):
    path = tmp_path / "titles.txt"
    path.write_text("# Featured sample\nBoston\n\nAC/DC\nboston\nZürich\n", encoding="utf-8")
    assert wikipedia.read_title_list(path) == ["Boston", "AC/DC", "Zürich"]


def test_cache_path_encodes_title(tmp_path):
    assert wikipedia.cache_path(tmp_path, "AC/DC").name == "AC%2FDC.jsonl"


def test_quality_class_parse():
    assert QualityClass.parse("FA") is QualityClass.FEATURED
    assert QualityClass.parse("Non-Assessed") is QualityClass.NON_ASSESSED
    assert QualityClass.NON_ASSESSED.label == "Non-Assessed"
    with pytest.raises(ValueError):
        QualityClass.parse("B-class")

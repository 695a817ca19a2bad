"""Shared builders for the persona analysis tests: synthetic revision streams and a fake MediaWiki API."""

from datetime import datetime, timedelta, timezone
from typing import Optional

import httpx
import pytest

from timeline import ArticleTimeline, EditorSeries
from wikipedia import QualityClass, RevisionRecord, WikipediaClient, format_timestamp

API_URL = "https://wiki.test/w/api.php"

# Long-lived dominant editor, steady tracking editor, and one-quarter burster
BOSTON_COUNTS = {
    "Ajd": [10, 12, 9, 11, 8, 7, 0, 0],
    "Loodog": [2, 3, 2, 3, 2, 1, 1, 1],
    "67.175.191.237": [0, 0, 0, 0, 0, 0, 20, 0],
}


def quarter_start(year: int, quarter: int) -> datetime:
    return datetime(year, 3 * (quarter - 1) + 1, 1, tzinfo=timezone.utc)


def revisions_from_counts(article_key: str, counts_by_editor: dict[str, list[int]],
                          start_year: int = 2005, start_quarter: int = 1,
                          first_revision_id: int = 1000) -> list[RevisionRecord]:
    """Revisions reproducing the given per-quarter counts, sorted by (timestamp, revision_id)."""
    span = max(len(c) for c in counts_by_editor.values())
    events = []
    for k in range(span):
        year = start_year + (start_quarter - 1 + k) // 4
        quarter = (start_quarter - 1 + k) % 4 + 1
        base = quarter_start(year, quarter) + timedelta(days=3)
        minute = 0
        for editor, counts in counts_by_editor.items():
            for _ in range(counts[k] if k < len(counts) else 0):
                events.append((base + timedelta(minutes=minute), editor))
                minute += 1
    return [
        RevisionRecord(article_key, first_revision_id + i, ts, editor)
        for i, (ts, editor) in enumerate(sorted(events, key=lambda e: e[0]))
    ]


def make_timeline(counts_by_editor: dict[str, list[int]], article_key: str = "Fixture",
                  quality_class: QualityClass = QualityClass.OTHER,
                  start_quarter: int = 20) -> ArticleTimeline:
    """Timeline with the editors in the given order."""
    series = tuple(EditorSeries(k, tuple(v)) for k, v in counts_by_editor.items())
    return ArticleTimeline(
        article_key=article_key,
        quality_class=quality_class,
        start_quarter=start_quarter,
        series=series,
        revision_count=sum(s.total for s in series),
    )


class FakeWikiApi:
    """In-memory MediaWiki Action API answering revision, content and random queries."""

    def __init__(self, max_page_size: int = 500):
        self.max_page_size = max_page_size
        self.pages: dict[str, list[dict]] = {}
        self.contents: dict[str, str] = {}
        self.random_batches: list[list[str]] = []
        self.failures: list[int] = []
        self.requests: list[dict[str, str]] = []

    def add_article(self, title: str, revisions: list[RevisionRecord], content: str = "x" * 4000) -> None:
        self.pages[title] = [
            {"revid": r.revision_id, "timestamp": format_timestamp(r.timestamp), "user": r.editor_key}
            for r in revisions
        ]
        self.contents[title] = content

    def handler(self, request: httpx.Request) -> httpx.Response:
        params = dict(request.url.params)
        self.requests.append(params)
        if self.failures:
            return httpx.Response(self.failures.pop(0), text="unavailable")

        if params.get("list") == "random":
            batch = self.random_batches.pop(0) if self.random_batches else []
            return httpx.Response(200, json={"query": {"random": [{"ns": 0, "title": t} for t in batch]}})

        title = params["titles"]
        if title not in self.pages:
            return httpx.Response(200, json={"query": {"pages": [{"ns": 0, "title": title, "missing": True}]}})

        if params.get("rvprop") == "content|size":
            content = self.contents[title]
            revision = {"size": len(content.encode("utf-8")), "slots": {"main": {"content": content}}}
            return httpx.Response(200, json={"query": {"pages": [{"title": title, "revisions": [revision]}]}})

        limit = params.get("rvlimit", "max")
        size = self.max_page_size if limit == "max" else min(int(limit), self.max_page_size)
        offset = int(params.get("rvcontinue", "0"))
        chunk = self.pages[title][offset:offset + size]
        body: dict = {"query": {"pages": [{"title": title, "revisions": chunk}]}}
        if offset + size < len(self.pages[title]):
            body["continue"] = {"rvcontinue": str(offset + size), "continue": "||"}
        return httpx.Response(200, json=body)

    def client(self, page_size: int | str = "max", sleeps: Optional[list[float]] = None) -> WikipediaClient:
        return WikipediaClient(
            api_url=API_URL,
            user_agent="wikipersona-tests/0.1",
            transport=httpx.MockTransport(self.handler),
            page_size=page_size,
            sleep=(sleeps.append if sleeps is not None else (lambda seconds: None)),
        )


@pytest.fixture
def fake_api() -> FakeWikiApi:
    return FakeWikiApi()


@pytest.fixture
def boston_revisions() -> list[RevisionRecord]:
    return revisions_from_counts("Boston", BOSTON_COUNTS)

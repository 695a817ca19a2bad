"""MediaWiki Action API client: revision histories, random sampling, and eligibility checks.

Revision histories are cached as one JSON Lines file per article so repeated
runs never touch the network. See https://www.mediawiki.org/wiki/API:Revisions
"""

from __future__ import annotations

import json
import logging
import re
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from datetime import datetime, timezone
from enum import Enum
from pathlib import Path
from typing import Callable, Iterable, Optional

import httpx
from dotenv import load_dotenv

import utils

# Load environment variables
load_dotenv()

# Configure logging
logger = logging.getLogger(__name__)

HIDDEN_EDITOR = "<hidden>"
TIMESTAMP_FORMAT = "%Y-%m-%dT%H:%M:%SZ"
DEFAULT_RETRIES = 3
DEFAULT_BACKOFF_SECONDS = 1.0
DEFAULT_MIN_EDITS = 50
DEFAULT_MIN_AUTHORS = 10
STUB_MAX_BYTES = 1500
RANDOM_BATCH_LIMIT = 500

# Template names up to the first pipe or closing braces, e.g. {{US-geo-stub}} or {{Stub|date=...}}
_TEMPLATE_NAME_RE = re.compile(r"\{\{\s*([^{}|]+?)\s*(?=\||\}\})")


class WikiError(Exception):
    """Base class for ingestion failures reported to the CLI."""


class NotFound(WikiError):
    """The requested title does not exist on the wiki."""


class NetworkError(WikiError):
    """Transport failure or HTTP 429/5xx that persisted through all retries."""


class ApiError(WikiError):
    """The API answered, but with an error object or a malformed payload."""


class QualityClass(str, Enum):
    """Quality rating of an article, assigned from the title list it came from."""

    FEATURED = "Featured"
    NON_ASSESSED = "NonAssessed"
    OTHER = "Other"

    @property
    def label(self) -> str:
        """Human-readable label used in report tables."""
        return {"NonAssessed": "Non-Assessed"}.get(self.value, self.value)

    @classmethod
    def parse(cls, value: str) -> "QualityClass":
        """Parse a quality class from its value, label, or a common abbreviation."""
        key = value.strip().lower().replace("-", "").replace("_", "").replace(" ", "")
        aliases = {
            "featured": cls.FEATURED,
            "fa": cls.FEATURED,
            "nonassessed": cls.NON_ASSESSED,
            "na": cls.NON_ASSESSED,
            "other": cls.OTHER,
        }
        if key not in aliases:
            raise ValueError(f"Unknown quality class: '{value}'")
        return aliases[key]


def parse_timestamp(value: str) -> datetime:
    """Parse an ISO-8601 Zulu timestamp (seconds precision) into an aware UTC datetime."""
    try:
        return datetime.strptime(value, TIMESTAMP_FORMAT).replace(tzinfo=timezone.utc)
    except (TypeError, ValueError) as e:
        raise ValueError(f"Invalid revision timestamp: {value!r}") from e


def format_timestamp(value: datetime) -> str:
    """Format an aware datetime as ISO-8601 Zulu with seconds precision."""
    return value.astimezone(timezone.utc).strftime(TIMESTAMP_FORMAT)


@dataclass(frozen=True)
class RevisionRecord:
    """One edit event: who edited which article, when, in which revision."""

    article_key: str
    revision_id: int
    timestamp: datetime
    editor_key: str

    def __post_init__(self):
        if self.revision_id <= 0:
            raise ValueError(f"revision_id must be positive, got {self.revision_id}")
        if not self.editor_key:
            raise ValueError(f"Revision {self.revision_id} has an empty editor_key")
        if self.timestamp.tzinfo is None or self.timestamp.utcoffset().total_seconds() != 0:
            raise ValueError(f"Revision {self.revision_id} timestamp must be UTC")

    @property
    def sort_key(self) -> tuple[datetime, int]:
        return self.timestamp, self.revision_id

    def to_json_line(self) -> str:
        """Serialize with a fixed key order so cache files are bit-stable."""
        return json.dumps(
            {
                "article_key": self.article_key,
                "revision_id": self.revision_id,
                "timestamp": format_timestamp(self.timestamp),
                "editor_key": self.editor_key,
            },
            ensure_ascii=False,
        )

    @classmethod
    def from_json_line(cls, line: str) -> "RevisionRecord":
        data = json.loads(line)
        return cls(
            article_key=data["article_key"],
            revision_id=int(data["revision_id"]),
            timestamp=parse_timestamp(data["timestamp"]),
            editor_key=data["editor_key"],
        )


@dataclass(frozen=True)
class ArticleMeta:
    """Summary facts about an article used by the sampling filter."""

    article_key: str
    quality_class: QualityClass
    revision_count: int
    distinct_editor_count: int
    is_stub: bool
    fetched_at: datetime

    def __post_init__(self):
        if self.revision_count < 0 or self.distinct_editor_count < 0:
            raise ValueError("Revision and editor counts must be non-negative")
        if self.distinct_editor_count > self.revision_count:
            raise ValueError(
                f"{self.article_key}: {self.distinct_editor_count} editors "
                f"cannot exceed {self.revision_count} revisions"
            )


def passes_eligibility(meta: ArticleMeta, min_edits: int = DEFAULT_MIN_EDITS,
                       min_authors: int = DEFAULT_MIN_AUTHORS) -> bool:
    """Sampling filter: drop stubs and articles with too few edits or authors.

    Args:
        meta: Article summary
        min_edits: Minimum number of revisions (default 50)
        min_authors: Minimum number of distinct editors (default 10)

    Returns:
        bool: True if the article is kept for analysis
    """
    return (
        not meta.is_stub
        and meta.revision_count >= min_edits
        and meta.distinct_editor_count >= min_authors
    )


def is_stub_text(wikitext: str, size_bytes: Optional[int] = None,
                 stub_max_bytes: int = STUB_MAX_BYTES) -> bool:
    """Decide whether the latest revision of an article is a stub.

    A stub carries a template whose name ends in "stub" (which covers the
    "-stub" family), or is shorter than stub_max_bytes.
    """
    if size_bytes is None:
        size_bytes = len(wikitext.encode("utf-8"))
    if size_bytes < stub_max_bytes:
        return True
    return any(
        match.group(1).strip().lower().endswith("stub")
        for match in _TEMPLATE_NAME_RE.finditer(wikitext)
    )


def count_distinct_editors(revisions: Iterable[RevisionRecord]) -> int:
    """Count distinct editors, ignoring hidden usernames."""
    return len({r.editor_key for r in revisions if r.editor_key != HIDDEN_EDITOR})


def normalize_title(title: str) -> str:
    """Normalize a title the way MediaWiki does for the main namespace.

    Underscores become spaces, runs of whitespace collapse, and the first
    letter is upper-cased.

    Raises:
        ValueError: If the title is empty
    """
    cleaned = " ".join(title.replace("_", " ").split())
    if not cleaned:
        raise ValueError("Article title must be non-empty")
    return cleaned[0].upper() + cleaned[1:]


def read_title_list(path: str | Path) -> list[str]:
    """Read a UTF-8 title list: one title per line, '#' comment lines ignored.

    Order is preserved and repeated titles are kept once.
    """
    titles: list[str] = []
    seen: set[str] = set()
    with open(path, "r", encoding="utf-8") as f:
        for line in f:
            stripped = line.strip()
            if not stripped or stripped.startswith("#"):
                continue
            title = normalize_title(stripped)
            if title not in seen:
                seen.add(title)
                titles.append(title)
    return titles


def cache_path(cache_dir: str | Path, article_key: str) -> Path:
    """Path of the JSON Lines cache file for an article."""
    return Path(cache_dir) / f"{utils.encode_title(article_key)}.jsonl"


def write_cache(path: str | Path, records: Iterable[RevisionRecord]) -> None:
    """Write records to a cache file atomically, sorted by (timestamp, revision_id)."""
    ordered = sorted(records, key=lambda r: r.sort_key)
    utils.atomic_write_text(path, "".join(f"{r.to_json_line()}\n" for r in ordered))


def read_cache(path: str | Path) -> list[RevisionRecord]:
    """Read a cache file written by write_cache.

    Raises:
        ValueError: If a line cannot be parsed
    """
    records = []
    with open(path, "r", encoding="utf-8") as f:
        for line_number, line in enumerate(f, 1):
            if not line.strip():
                continue
            try:
                records.append(RevisionRecord.from_json_line(line))
            except (KeyError, ValueError) as e:
                raise ValueError(f"Corrupt cache line {line_number} in {path}: {e}") from e
    return records


class WikipediaClient:
    """MediaWiki Action API client with retry, continuation, and a disk cache."""

    def __init__(self, api_url: Optional[str] = None, user_agent: Optional[str] = None, *,
                 transport: Optional[httpx.BaseTransport] = None,
                 retries: int = DEFAULT_RETRIES,
                 backoff: float = DEFAULT_BACKOFF_SECONDS,
                 page_size: int | str = "max",
                 timeout: float = 30.0,
                 sleep: Callable[[float], None] = time.sleep):
        """Initialize the client.

        Args:
            api_url: API endpoint (optional, uses WIKI_API_URL env var)
            user_agent: User-Agent header (optional, uses WIKI_USER_AGENT env var)
            transport: Optional httpx transport, e.g. httpx.MockTransport in tests
            retries: Retries after the first attempt on transport errors and HTTP 429/5xx
            backoff: Initial backoff in seconds, doubled on each retry
            page_size: rvlimit value for revision queries
            timeout: Per-request timeout in seconds
            sleep: Sleep function used between retries
        """
        self.api_url = api_url or utils.get_api_url()
        self.retries = retries
        self.backoff = backoff
        self.page_size = page_size
        self._sleep = sleep
        self._client = httpx.Client(
            headers={"User-Agent": user_agent or utils.get_user_agent()},
            timeout=timeout,
            transport=transport,
            follow_redirects=True,
        )
        logger.debug(f"WikipediaClient using {self.api_url}")

    def close(self) -> None:
        self._client.close()

    def __enter__(self) -> "WikipediaClient":
        return self

    def __exit__(self, *exc_info) -> None:
        self.close()

    def _request(self, params: dict[str, str]) -> dict:
        """Issue one GET to the API, retrying transient failures.

        Raises:
            NotFound: If the API reports a missing or invalid title
            NetworkError: If transport errors or HTTP 429/5xx persist through all retries
            ApiError: On other HTTP errors, API error objects, or malformed JSON
        """
        query = {"format": "json", "formatversion": "2", **params}
        last_error = ""
        last_exception: Optional[Exception] = None

        for attempt in range(self.retries + 1):
            try:
                response = self._client.get(self.api_url, params=query)
            except httpx.RequestError as e:
                last_error = f"transport error: {e}"
                last_exception = e
            else:
                status = response.status_code
                if status == 429 or status >= 500:
                    last_error = f"HTTP {status}"
                    last_exception = None
                elif status >= 400:
                    raise ApiError(f"HTTP {status} from {self.api_url}: {response.text[:200]}")
                else:
                    return self._decode(response)

            if attempt < self.retries:
                delay = self.backoff * (2 ** attempt)
                logger.warning(
                    f"Request failed ({last_error}), retrying in {delay:g}s "
                    f"(retry {attempt + 1}/{self.retries})"
                )
                self._sleep(delay)

        raise NetworkError(
            f"Request to {self.api_url} failed after {self.retries} retries: {last_error}"
        ) from last_exception

    @staticmethod
    def _decode(response: httpx.Response) -> dict:
        try:
            data = response.json()
        except ValueError as e:
            raise ApiError(f"Malformed JSON from API: {e}") from e
        if not isinstance(data, dict):
            raise ApiError(f"Expected a JSON object from API, got {type(data).__name__}")

        error = data.get("error")
        if error:
            code = error.get("code", "") if isinstance(error, dict) else ""
            info = error.get("info", error) if isinstance(error, dict) else error
            if code in ("missingtitle", "invalidtitle"):
                raise NotFound(f"API error {code}: {info}")
            raise ApiError(f"API error {code or 'unknown'}: {info}")
        return data

    @staticmethod
    def _first_page(data: dict, article_key: str) -> dict:
        pages = (data.get("query") or {}).get("pages")
        if not isinstance(pages, list) or not pages or not isinstance(pages[0], dict):
            raise ApiError(f"No page object in API response for '{article_key}'")
        page = pages[0]
        if page.get("missing") or page.get("invalid"):
            raise NotFound(f"Article '{article_key}' does not exist")
        return page

    @staticmethod
    def _parse_revision(article_key: str, revision: dict) -> RevisionRecord:
        if not isinstance(revision, dict):
            raise ApiError(f"Malformed revision entry for '{article_key}': {revision!r}")
        try:
            revision_id = int(revision["revid"])
            timestamp = parse_timestamp(revision["timestamp"])
        except (KeyError, TypeError, ValueError) as e:
            raise ApiError(f"Malformed revision entry for '{article_key}': {revision!r}") from e

        user = revision.get("user")
        if revision.get("userhidden") or not user:
            user = HIDDEN_EDITOR
        try:
            return RevisionRecord(article_key, revision_id, timestamp, user)
        except ValueError as e:
            raise ApiError(str(e)) from e

    def fetch_revision_pages(self, article_key: str) -> list[RevisionRecord]:
        """Download the complete revision history, following continuation tokens.

        Continuation requests for one article are strictly sequential.

        Returns:
            list: Records sorted by (timestamp, revision_id)
        """
        params = {
            "action": "query",
            "prop": "revisions",
            "titles": article_key,
            "rvprop": "ids|timestamp|user",
            "rvlimit": str(self.page_size),
            "rvdir": "newer",
        }
        continuation: dict[str, str] = {}
        by_id: dict[int, RevisionRecord] = {}
        requests_made = 0

        while True:
            data = self._request({**params, **continuation})
            requests_made += 1
            page = self._first_page(data, article_key)

            for revision in page.get("revisions") or []:
                record = self._parse_revision(article_key, revision)
                if record.revision_id in by_id:
                    logger.warning(f"Duplicate revision {record.revision_id} for '{article_key}' ignored")
                    continue
                by_id[record.revision_id] = record

            next_continuation = data.get("continue")
            if not next_continuation:
                break
            if not isinstance(next_continuation, dict):
                raise ApiError(f"Malformed continuation for '{article_key}': {next_continuation!r}")
            next_continuation = {k: str(v) for k, v in next_continuation.items()}
            if next_continuation == continuation:
                raise ApiError(f"API repeated continuation token for '{article_key}'")
            continuation = next_continuation

        logger.info(f"Fetched {len(by_id)} revisions of '{article_key}' in {requests_made} requests")
        return sorted(by_id.values(), key=lambda r: r.sort_key)

    def fetch_revisions(self, article_key: str, cache_dir: str | Path,
                        refresh: bool = False) -> list[RevisionRecord]:
        """Return an article's full revision history, from cache when available.

        Args:
            article_key: Article title (normalized before use)
            cache_dir: Directory holding one JSON Lines file per article
            refresh: Ignore an existing cache entry and re-download

        Returns:
            list: Records sorted by (timestamp, revision_id)

        Raises:
            NotFound, NetworkError, ApiError: As raised by the API layer
        """
        key = normalize_title(article_key)
        path = cache_path(cache_dir, key)

        if path.exists() and not refresh:
            try:
                records = read_cache(path)
                logger.info(f"Loaded {len(records)} cached revisions for '{key}'")
                return records
            except ValueError as e:
                logger.warning(f"Ignoring unreadable cache for '{key}': {e}")

        records = self.fetch_revision_pages(key)
        write_cache(path, records)
        logger.info(f"Cached {len(records)} revisions for '{key}' at {path}")
        return records

    def fetch_many(self, titles: Iterable[str], cache_dir: str | Path,
                   max_workers: Optional[int] = None) -> dict[str, list[RevisionRecord] | WikiError]:
        """Fetch several articles on a bounded thread pool.

        Returns:
            dict: Normalized title -> records, or the WikiError that stopped it; input order kept
        """
        keys = list(dict.fromkeys(normalize_title(t) for t in titles))
        workers = max(1, max_workers or utils.get_max_concurrency())

        def _fetch(key: str) -> list[RevisionRecord] | WikiError:
            try:
                return self.fetch_revisions(key, cache_dir)
            except WikiError as e:
                logger.warning(f"Skipping '{key}': {e}")
                return e

        with ThreadPoolExecutor(max_workers=workers) as executor:
            results = list(executor.map(_fetch, keys))
        return dict(zip(keys, results))

    def sample_random_candidates(self, n: int) -> list[str]:
        """Draw n distinct main-namespace titles from the random-article facility.

        Raises:
            ValueError: If n < 1
            ApiError: If the API cannot supply n distinct titles in a reasonable number of requests
        """
        if n < 1:
            raise ValueError(f"Number of random articles must be at least 1, got {n}")

        titles: list[str] = []
        seen: set[str] = set()
        max_requests = 10 + n
        requests_made = 0

        while len(titles) < n:
            if requests_made >= max_requests:
                raise ApiError(f"Random sampling produced only {len(titles)} of {n} distinct titles")
            data = self._request({
                "action": "query",
                "list": "random",
                "rnnamespace": "0",
                "rnlimit": str(min(n - len(titles), RANDOM_BATCH_LIMIT)),
            })
            requests_made += 1
            items = (data.get("query") or {}).get("random")
            if not isinstance(items, list):
                raise ApiError("Malformed random-article response")
            for item in items:
                title = item.get("title") if isinstance(item, dict) else None
                if not title or item.get("ns", 0) != 0 or title in seen:
                    continue
                seen.add(title)
                titles.append(title)
                if len(titles) == n:
                    break

        logger.info(f"Sampled {n} random titles in {requests_made} requests")
        return titles

    def fetch_latest_content(self, article_key: str) -> tuple[str, int]:
        """Fetch the wikitext and byte size of the latest revision."""
        data = self._request({
            "action": "query",
            "prop": "revisions",
            "titles": article_key,
            "rvprop": "content|size",
            "rvslots": "main",
            "rvlimit": "1",
        })
        page = self._first_page(data, article_key)
        revisions = page.get("revisions") or []
        if not revisions:
            raise ApiError(f"No revisions returned for '{article_key}'")
        latest = revisions[0]
        slot = (latest.get("slots") or {}).get("main") or {}
        content = slot.get("content", latest.get("content", ""))
        if not isinstance(content, str):
            raise ApiError(f"Malformed content for '{article_key}'")
        size = latest.get("size")
        return content, int(size) if isinstance(size, int) else len(content.encode("utf-8"))

    def fetch_article_meta(self, article_key: str, quality_class: QualityClass,
                           revisions: list[RevisionRecord],
                           stub_max_bytes: int = STUB_MAX_BYTES) -> ArticleMeta:
        """Build the ArticleMeta used by the eligibility filter."""
        key = normalize_title(article_key)
        content, size = self.fetch_latest_content(key)
        return ArticleMeta(
            article_key=key,
            quality_class=quality_class,
            revision_count=len(revisions),
            distinct_editor_count=count_distinct_editors(revisions),
            is_stub=is_stub_text(content, size, stub_max_bytes),
            fetched_at=datetime.now(timezone.utc).replace(microsecond=0),
        )


_default_client: Optional[WikipediaClient] = None
_default_client_lock = threading.Lock()


def get_client() -> WikipediaClient:
    """Get or create the shared client configured from the environment."""
    global _default_client
    with _default_client_lock:
        if _default_client is None:
            _default_client = WikipediaClient()
        return _default_client


def fetch_revisions(article_key: str, cache_dir: str | Path) -> list[RevisionRecord]:
    """Fetch (or load from cache) an article's revision history with the shared client."""
    return get_client().fetch_revisions(article_key, cache_dir)


def sample_random_candidates(n: int) -> list[str]:
    """Draw n distinct random main-namespace titles with the shared client."""
    return get_client().sample_random_candidates(n)

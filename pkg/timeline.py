"""Per-editor quarterly edit series, top-editor selection, derivatives, and correlations."""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass
from datetime import datetime, timezone
from enum import Enum
from typing import Iterable, Optional, Sequence

import numpy as np

from wikipedia import HIDDEN_EDITOR, QualityClass, RevisionRecord

logger = logging.getLogger(__name__)

BASE_YEAR = 2000
DEFAULT_TOP_N = 10

_BOT_NAME_RE = re.compile(r"bot$", re.IGNORECASE)
_QUARTER_LABEL_RE = re.compile(r"^(-?\d{1,4})Q([1-4])$")

# QuarterIndex encodes (year - 2000) * 4 + (calendar quarter - 1)
QuarterIndex = int


class TimelineError(ValueError):
    """Base class for timeline construction errors."""


class EmptyInput(TimelineError):
    """No revisions (or no eligible editors) to build a timeline from."""


class TooFewEditors(TimelineError):
    """Correlation needs at least two editor series."""


class TooShort(TimelineError):
    """Derivative correlation needs series of length two or more."""


class CorrelationMode(str, Enum):
    """Which series the correlation matrix is computed over."""

    COUNTS = "counts"
    DERIVATIVES = "derivatives"


def quarter_index(timestamp: datetime) -> QuarterIndex:
    """Map a timestamp to its UTC calendar quarter."""
    ts = timestamp.astimezone(timezone.utc)
    return (ts.year - BASE_YEAR) * 4 + (ts.month - 1) // 3


def quarter_label(quarter: QuarterIndex) -> str:
    """Render a quarter index as 'YYYYQn', e.g. 20 -> '2005Q1'."""
    return f"{BASE_YEAR + quarter // 4}Q{quarter % 4 + 1}"


def parse_quarter_label(label: str) -> QuarterIndex:
    """Inverse of quarter_label."""
    match = _QUARTER_LABEL_RE.match(label.strip())
    if not match:
        raise ValueError(f"Invalid quarter label: '{label}'")
    return (int(match.group(1)) - BASE_YEAR) * 4 + int(match.group(2)) - 1


def is_bot_name(editor_key: str) -> bool:
    return bool(_BOT_NAME_RE.search(editor_key))


@dataclass(frozen=True)
class EditorSeries:
    """One editor's edit counts per quarter across the article's lifetime."""

    editor_key: str
    counts: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "counts", tuple(int(c) for c in self.counts))
        if not self.counts:
            raise TimelineError(f"Series for '{self.editor_key}' is empty")
        if any(c < 0 for c in self.counts):
            raise TimelineError(f"Series for '{self.editor_key}' has negative counts")

    @property
    def total(self) -> int:
        return sum(self.counts)

    @property
    def onset_quarter(self) -> Optional[int]:
        """Offset of the first quarter with an edit, or None for an all-zero series."""
        return next((i for i, c in enumerate(self.counts) if c > 0), None)


@dataclass(frozen=True)
class EditorBuckets:
    """Every editor's quarterly series for one article, before top-editor selection."""

    article_key: str
    start_quarter: QuarterIndex
    series: dict[str, EditorSeries]
    revision_count: int

    @property
    def span(self) -> int:
        return len(next(iter(self.series.values())).counts) if self.series else 0


@dataclass(frozen=True)
class ArticleTimeline:
    """Quarterly series of an article's top editors, most active first."""

    article_key: str
    quality_class: QualityClass
    start_quarter: QuarterIndex
    series: tuple[EditorSeries, ...]
    revision_count: int

    def __post_init__(self):
        object.__setattr__(self, "series", tuple(self.series))
        if not self.series:
            raise EmptyInput(f"Timeline for '{self.article_key}' has no editors")
        lengths = {len(s.counts) for s in self.series}
        if len(lengths) != 1:
            raise TimelineError(f"Series lengths differ in '{self.article_key}': {sorted(lengths)}")
        if any(s.total < 1 for s in self.series):
            raise TimelineError(f"Timeline for '{self.article_key}' holds an editor with no edits")
        keys = [s.editor_key for s in self.series]
        if len(set(keys)) != len(keys):
            raise TimelineError(f"Duplicate editors in '{self.article_key}'")
        if sum(s.total for s in self.series) > self.revision_count:
            raise TimelineError(f"Series totals exceed revision count in '{self.article_key}'")

    @property
    def editor_keys(self) -> tuple[str, ...]:
        return tuple(s.editor_key for s in self.series)

    @property
    def span(self) -> int:
        return len(self.series[0].counts)

    def quarter_labels(self) -> list[str]:
        return [quarter_label(self.start_quarter + k) for k in range(self.span)]

    def counts_matrix(self) -> np.ndarray:
        """Editors x quarters matrix of edit counts."""
        return np.array([s.counts for s in self.series], dtype=np.int64)


def bucket_by_quarter(revisions: Iterable[RevisionRecord]) -> EditorBuckets:
    """Count each editor's revisions per UTC calendar quarter.

    The span runs from the quarter of the earliest revision to the quarter of
    the latest, and every editor's series covers the whole span.

    Raises:
        EmptyInput: If there are no revisions
        TimelineError: If the revisions belong to more than one article
    """
    revisions = list(revisions)
    if not revisions:
        raise EmptyInput("No revisions to bucket")

    article_keys = {r.article_key for r in revisions}
    if len(article_keys) > 1:
        raise TimelineError(f"Revisions span several articles: {sorted(article_keys)}")

    quarters = [quarter_index(r.timestamp) for r in revisions]
    start = min(quarters)
    span = max(quarters) - start + 1

    counts: dict[str, list[int]] = {}
    for record, quarter in zip(revisions, quarters):
        counts.setdefault(record.editor_key, [0] * span)[quarter - start] += 1

    return EditorBuckets(
        article_key=revisions[0].article_key,
        start_quarter=start,
        series={key: EditorSeries(key, tuple(values)) for key, values in sorted(counts.items())},
        revision_count=len(revisions),
    )


def _ranking_key(series: EditorSeries) -> tuple[int, int, str]:
    # Most edits first, then earliest first edit, then editor name
    return -series.total, series.onset_quarter, series.editor_key


def select_top_editors(buckets: EditorBuckets, top_n: int = DEFAULT_TOP_N,
                       quality_class: QualityClass = QualityClass.OTHER,
                       exclude_bots: bool = False) -> ArticleTimeline:
    """Keep the top_n most active editors of an article.

    Hidden usernames never qualify; names ending in "bot" are dropped when
    exclude_bots is set. Fewer editors than top_n keeps them all.

    Raises:
        ValueError: If top_n < 1
        EmptyInput: If no editor qualifies
    """
    if top_n < 1:
        raise ValueError(f"top_n must be positive, got {top_n}")

    candidates = [
        s for s in buckets.series.values()
        if s.total > 0
        and s.editor_key != HIDDEN_EDITOR
        and not (exclude_bots and is_bot_name(s.editor_key))
    ]
    if not candidates:
        raise EmptyInput(f"No eligible editors in '{buckets.article_key}'")

    ranked = sorted(candidates, key=_ranking_key)[:top_n]
    logger.debug(
        f"'{buckets.article_key}': kept {len(ranked)} of {len(candidates)} editors"
    )
    return ArticleTimeline(
        article_key=buckets.article_key,
        quality_class=quality_class,
        start_quarter=buckets.start_quarter,
        series=tuple(ranked),
        revision_count=buckets.revision_count,
    )


def derivative_series(counts: Sequence[int]) -> list[int]:
    """Quarter-to-quarter change: output[k] = counts[k + 1] - counts[k]."""
    if len(counts) < 2:
        return []
    return np.diff(np.asarray(counts, dtype=np.int64)).tolist()


def derivative_timeline(timeline: ArticleTimeline) -> dict[str, list[int]]:
    """Derivative series of every top editor, keyed by editor."""
    return {s.editor_key: derivative_series(s.counts) for s in timeline.series}


def activity_rows(timeline: ArticleTimeline) -> list[tuple[str, tuple[int, ...]]]:
    """One row per quarter: (quarter label, count of each top editor in timeline order)."""
    matrix = timeline.counts_matrix()
    return [
        (label, tuple(int(c) for c in matrix[:, k]))
        for k, label in enumerate(timeline.quarter_labels())
    ]


def pearson(x: Sequence[float], y: Sequence[float]) -> Optional[float]:
    """Pearson correlation of two aligned series, or None when either is constant."""
    xs = np.asarray(x, dtype=np.float64)
    ys = np.asarray(y, dtype=np.float64)
    if xs.shape != ys.shape:
        raise ValueError(f"Series lengths differ: {xs.size} vs {ys.size}")
    if xs.size < 2 or np.ptp(xs) == 0 or np.ptp(ys) == 0:
        return None

    xc = xs - xs.mean()
    yc = ys - ys.mean()
    denominator = np.sqrt(np.dot(xc, xc) * np.dot(yc, yc))
    if denominator == 0:
        return None
    return float(np.clip(np.dot(xc, yc) / denominator, -1.0, 1.0))


@dataclass(frozen=True)
class CorrelationMatrix:
    """Symmetric matrix of pairwise correlations; None marks an undefined entry."""

    editor_keys: tuple[str, ...]
    entries: tuple[tuple[Optional[float], ...], ...]

    def entry(self, i: int, j: int) -> Optional[float]:
        return self.entries[i][j]

    def get(self, editor_a: str, editor_b: str) -> Optional[float]:
        return self.entries[self.editor_keys.index(editor_a)][self.editor_keys.index(editor_b)]

    @classmethod
    def undefined(cls, editor_keys: Sequence[str]) -> "CorrelationMatrix":
        """A matrix with every entry undefined, used when correlation is impossible."""
        n = len(editor_keys)
        return cls(tuple(editor_keys), tuple(tuple(None for _ in range(n)) for _ in range(n)))

    def to_json(self) -> dict:
        return {"editor_keys": list(self.editor_keys), "entries": [list(row) for row in self.entries]}


def correlation_matrix(timeline: ArticleTimeline,
                       mode: CorrelationMode | str = CorrelationMode.COUNTS) -> CorrelationMatrix:
    """Pairwise Pearson correlation of the top editors' series.

    Args:
        timeline: Article timeline with at least two editors
        mode: Correlate raw quarterly counts or their derivative series

    Raises:
        TooFewEditors: With fewer than two series
        TooShort: In derivative mode on a single-quarter timeline
    """
    mode = CorrelationMode(mode)
    if len(timeline.series) < 2:
        raise TooFewEditors(f"'{timeline.article_key}' has {len(timeline.series)} top editor(s)")
    if mode is CorrelationMode.DERIVATIVES and timeline.span < 2:
        raise TooShort(f"'{timeline.article_key}' spans a single quarter")

    if mode is CorrelationMode.DERIVATIVES:
        rows = [derivative_series(s.counts) for s in timeline.series]
    else:
        rows = [list(s.counts) for s in timeline.series]

    n = len(rows)
    entries: list[list[Optional[float]]] = [[None] * n for _ in range(n)]
    for i in range(n):
        for j in range(i, n):
            if i == j:
                value = 1.0 if len(rows[i]) > 1 and np.ptp(rows[i]) > 0 else None
            else:
                value = pearson(rows[i], rows[j])
            entries[i][j] = entries[j][i] = value

    return CorrelationMatrix(timeline.editor_keys, tuple(tuple(row) for row in entries))

"""Study pipeline: fetch, bucket, classify and tabulate articles, then write the report bundle.

Bundle layout under the output directory:

    contingency.csv                      quality class x persona counts and the chi-square test
    study.json                           manifest echo, config, per-article evidence, errors, test
    personas/<title>.csv                 persona and features of each top editor
    timelines/<title>.csv                edits per quarter of each top editor
    charts/<title>.svg                   edits per quarter chart
    charts/<title>.derivatives.svg       quarter-to-quarter change chart

<title> is the percent-encoded article title. Every file depends only on the
manifest and the cached revisions, so reruns on an unchanged cache are
byte-identical.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Optional, Sequence

import utils
import wikipedia
from charts import render_oscillation_chart
from personas import (
    ClassifierConfig,
    PersonaAssignment,
    article_correlation,
    classify,
    extract_features,
)
from stats import (
    ChiSquareResult,
    ContingencyTable,
    DegenerateTable,
    build_contingency,
    chi_square_independence,
    drop_empty_categories,
    format_contingency_csv,
)
from timeline import (
    ArticleTimeline,
    CorrelationMatrix,
    CorrelationMode,
    TimelineError,
    activity_rows,
    bucket_by_quarter,
    quarter_label,
    select_top_editors,
)
from wikipedia import QualityClass, RevisionRecord, WikiError, WikipediaClient, normalize_title

logger = logging.getLogger(__name__)

PERSONA_CSV_HEADER = (
    "editor_key", "persona", "rule_fired", "active_quarters", "span_quarters",
    "peak_share", "onset_quarter", "dominant_quarters", "negative_corr_fraction",
)


class ManifestError(ValueError):
    """The study manifest is unusable (empty or overlapping title lists)."""


class StudyError(RuntimeError):
    """The study cannot produce a two-class comparison."""


@dataclass(frozen=True)
class StudyManifest:
    """Everything a study run needs: the two title lists, thresholds, and directories."""

    featured_titles: tuple[str, ...]
    non_assessed_titles: tuple[str, ...]
    config: ClassifierConfig = field(default_factory=ClassifierConfig)
    cache_dir: Path = field(default_factory=lambda: Path(utils.get_cache_dir()))
    output_dir: Path = field(default_factory=lambda: Path(utils.get_save_directory("study")))

    def __post_init__(self):
        featured = tuple(dict.fromkeys(normalize_title(t) for t in self.featured_titles))
        non_assessed = tuple(dict.fromkeys(normalize_title(t) for t in self.non_assessed_titles))
        object.__setattr__(self, "featured_titles", featured)
        object.__setattr__(self, "non_assessed_titles", non_assessed)
        object.__setattr__(self, "cache_dir", Path(self.cache_dir))
        object.__setattr__(self, "output_dir", Path(self.output_dir))

        if not featured:
            raise ManifestError("The Featured title list is empty")
        if not non_assessed:
            raise ManifestError("The Non-Assessed title list is empty")
        overlap = sorted(set(featured) & set(non_assessed))
        if overlap:
            raise ManifestError(f"Titles listed as both Featured and Non-Assessed: {', '.join(overlap)}")

    @classmethod
    def from_files(cls, featured_path: str | Path, non_assessed_path: str | Path,
                   **kwargs: Any) -> "StudyManifest":
        """Build a manifest from two title-list files."""
        return cls(
            featured_titles=tuple(wikipedia.read_title_list(featured_path)),
            non_assessed_titles=tuple(wikipedia.read_title_list(non_assessed_path)),
            **kwargs,
        )

    def jobs(self) -> list[tuple[str, QualityClass]]:
        """Every title with its quality class, Featured first, in list order."""
        return ([(t, QualityClass.FEATURED) for t in self.featured_titles]
                + [(t, QualityClass.NON_ASSESSED) for t in self.non_assessed_titles])

    def to_json(self) -> dict[str, Any]:
        return {
            "featured_titles": list(self.featured_titles),
            "non_assessed_titles": list(self.non_assessed_titles),
            "cache_dir": str(self.cache_dir),
            "output_dir": str(self.output_dir),
        }


@dataclass(frozen=True)
class ArticleAnalysis:
    """One article taken through the timeline, correlation and classification steps."""

    timeline: ArticleTimeline
    correlations: CorrelationMatrix
    assignments: tuple[PersonaAssignment, ...]

    @property
    def article_key(self) -> str:
        return self.timeline.article_key

    @property
    def quality_class(self) -> QualityClass:
        return self.timeline.quality_class

    def persona_map(self) -> dict[str, str]:
        return {a.editor_key: a.persona.value for a in self.assignments}

    def to_json(self) -> dict[str, Any]:
        return {
            "article_key": self.article_key,
            "quality_class": self.quality_class.value,
            "revision_count": self.timeline.revision_count,
            "first_quarter": quarter_label(self.timeline.start_quarter),
            "span_quarters": self.timeline.span,
            "top_editors": list(self.timeline.editor_keys),
            "personas": [a.to_json() for a in self.assignments],
            "correlations": self.correlations.to_json(),
        }


def analyze_revisions(revisions: Sequence[RevisionRecord],
                      quality_class: QualityClass = QualityClass.OTHER,
                      config: ClassifierConfig = ClassifierConfig()) -> ArticleAnalysis:
    """Bucket, select, correlate and classify one article's revision history.

    Raises:
        TimelineError: If the history is empty or no editor qualifies
    """
    buckets = bucket_by_quarter(revisions)
    timeline = select_top_editors(buckets, config.top_n, quality_class, config.exclude_bots)
    correlations = article_correlation(timeline, config.correlation_mode)
    assignments = tuple(classify(f, config) for f in extract_features(timeline, correlations))
    logger.info(
        f"Analyzed '{timeline.article_key}': {len(assignments)} top editors over {timeline.span} quarters"
    )
    return ArticleAnalysis(timeline, correlations, assignments)


def analyze_article(title: str, quality_class: QualityClass = QualityClass.OTHER,
                    config: ClassifierConfig = ClassifierConfig(),
                    cache_dir: Optional[str | Path] = None,
                    client: Optional[WikipediaClient] = None,
                    refresh: bool = False) -> ArticleAnalysis:
    """Fetch (or load from cache) an article and analyze it.

    Raises:
        WikiError: If the history cannot be fetched
        TimelineError: If the history yields no top editors
    """
    client = client or wikipedia.get_client()
    revisions = client.fetch_revisions(title, cache_dir or utils.get_cache_dir(), refresh=refresh)
    return analyze_revisions(revisions, quality_class, config)


def _csv_text(rows: Iterable[Sequence[Any]]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerows(rows)
    return buffer.getvalue()


def format_personas_csv(analysis: ArticleAnalysis) -> str:
    """One row per top editor: persona, fired rule and features."""
    rows: list[Sequence[Any]] = [PERSONA_CSV_HEADER]
    for a in analysis.assignments:
        f = a.features
        rows.append((
            a.editor_key, a.persona.value, a.rule_fired, f.active_quarters, f.span_quarters,
            repr(f.peak_share), f.onset_quarter, f.dominant_quarters,
            "" if f.negative_corr_fraction is None else repr(f.negative_corr_fraction),
        ))
    return _csv_text(rows)


def format_timeline_csv(timeline: ArticleTimeline) -> str:
    """One row per quarter with the edit count of each top editor."""
    rows: list[Sequence[Any]] = [("quarter", *timeline.editor_keys)]
    rows.extend((label, *counts) for label, counts in activity_rows(timeline))
    return _csv_text(rows)


def write_article_outputs(analysis: ArticleAnalysis, output_dir: str | Path) -> list[Path]:
    """Write the persona CSV, timeline CSV and both charts of one article.

    Returns:
        list: Paths written
    """
    output_dir = Path(output_dir)
    name = utils.encode_title(analysis.article_key)
    personas = analysis.persona_map()
    outputs = {
        output_dir / "personas" / f"{name}.csv": format_personas_csv(analysis),
        output_dir / "timelines" / f"{name}.csv": format_timeline_csv(analysis.timeline),
        output_dir / "charts" / f"{name}.svg": render_oscillation_chart(
            analysis.timeline, personas, CorrelationMode.COUNTS),
        output_dir / "charts" / f"{name}.derivatives.svg": render_oscillation_chart(
            analysis.timeline, personas, CorrelationMode.DERIVATIVES),
    }
    for path, text in outputs.items():
        utils.atomic_write_text(path, text)
        logger.debug(f"Wrote {path}")
    return list(outputs)


@dataclass(frozen=True)
class StudyResult:
    """What run_study computed and wrote."""

    table: ContingencyTable
    chi_square: Optional[ChiSquareResult]
    dropped_categories: tuple[str, ...]
    analyses: tuple[ArticleAnalysis, ...]
    errors: dict[str, str]
    note: Optional[str] = None

    @property
    def partial(self) -> bool:
        """True if some articles were skipped."""
        return bool(self.errors)


def _default_workers() -> int:
    return max(1, min(os.cpu_count() or 1, utils.get_max_concurrency()))


def run_study(manifest: StudyManifest, client: Optional[WikipediaClient] = None,
              max_workers: Optional[int] = None) -> StudyResult:
    """Run the full Featured vs Non-Assessed persona comparison and write the bundle.

    Articles are analyzed on a bounded thread pool; reports are written
    afterwards, in manifest order, from a single thread. An article that
    cannot be fetched or analyzed is recorded under "errors" and skipped.

    Args:
        manifest: Title lists, classifier config and directories
        client: API client (optional, uses the shared client)
        max_workers: Concurrent article pipelines (default: processors, capped by WIKI_MAX_CONCURRENCY)

    Returns:
        StudyResult: Table, test, per-article analyses and errors

    Raises:
        StudyError: If every article of a quality class failed
    """
    client = client or wikipedia.get_client()
    workers = max(1, max_workers or _default_workers())
    jobs = manifest.jobs()
    logger.info(f"Running study on {len(jobs)} articles with {workers} workers")

    def _analyze(job: tuple[str, QualityClass]) -> ArticleAnalysis | Exception:
        title, quality_class = job
        try:
            return analyze_article(title, quality_class, manifest.config, manifest.cache_dir, client)
        except (WikiError, TimelineError, OSError, ValueError) as e:
            logger.warning(f"Skipping '{title}': {e}")
            return e

    with ThreadPoolExecutor(max_workers=workers) as executor:
        outcomes = list(executor.map(_analyze, jobs))

    analyses: list[ArticleAnalysis] = []
    errors: dict[str, str] = {}
    for (title, _), outcome in zip(jobs, outcomes):
        if isinstance(outcome, Exception):
            errors[title] = f"{type(outcome).__name__}: {outcome}"
        else:
            analyses.append(outcome)

    for quality_class in (QualityClass.FEATURED, QualityClass.NON_ASSESSED):
        if not any(a.quality_class is quality_class for a in analyses):
            raise StudyError(f"No {quality_class.label} article could be analyzed")

    table = build_contingency({a.article_key: (a.quality_class, a.assignments) for a in analyses})
    reduced, dropped = drop_empty_categories(table)
    note = None
    if dropped:
        note = f"Test computed without empty categories: {', '.join(dropped)}"
        logger.warning(note)

    chi_square: Optional[ChiSquareResult] = None
    try:
        chi_square = chi_square_independence(reduced)
        logger.info(
            f"Chi-square {chi_square.statistic:.2f}, df {chi_square.df}, p-value {chi_square.p_value:.6f}"
        )
    except DegenerateTable as e:
        note = f"Chi-square test not computed: {e}"
        logger.warning(note)

    result = StudyResult(table, chi_square, tuple(dropped), tuple(analyses), errors, note)
    write_study_bundle(manifest, result)
    return result


def study_json(manifest: StudyManifest, result: StudyResult) -> dict[str, Any]:
    return {
        "manifest": manifest.to_json(),
        "config": manifest.config.to_json(),
        "articles": [a.to_json() for a in result.analyses],
        "errors": result.errors,
        "contingency": {
            "row_labels": list(result.table.row_labels),
            "col_labels": list(result.table.col_labels),
            "counts": [list(row) for row in result.table.counts],
        },
        "dropped_categories": list(result.dropped_categories),
        "chi_square": result.chi_square.to_json() if result.chi_square else None,
        "note": result.note,
    }


def write_study_bundle(manifest: StudyManifest, result: StudyResult) -> None:
    """Write every study artifact under manifest.output_dir."""
    out = manifest.output_dir
    for analysis in result.analyses:
        write_article_outputs(analysis, out)

    contingency_path = out / "contingency.csv"
    utils.atomic_write_text(contingency_path,
                            format_contingency_csv(result.table, result.chi_square, result.note))
    logger.info(f"Wrote {contingency_path}")

    json_path = out / "study.json"
    text = json.dumps(study_json(manifest, result), indent=2, ensure_ascii=False) + "\n"
    utils.atomic_write_text(json_path, text)
    logger.info(f"Wrote {json_path}")

"""Command-line entry point for Wikipedia editor persona analysis.

Subcommands:
    fetch    download revision histories (titles or --random N) and apply the sampling filter
    analyze  timeline, charts and personas for one article
    stats    chi-square test on a contingency CSV
    study    full Featured vs Non-Assessed pipeline

Exit codes: 0 success, 1 partial (some articles skipped), 2 fatal.
"""

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Optional

from dotenv import load_dotenv

import report
import stats
import utils
import wikipedia
from personas import PERSONA_ORDER, ClassifierConfig, persona_counts
from timeline import CorrelationMode, TimelineError
from wikipedia import QualityClass, WikiError, WikipediaClient

# Load environment variables from .env file
load_dotenv()

# Configure logging
logging.basicConfig(
    format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
    level=logging.INFO
)
# Set higher logging level for httpx to avoid all GET requests being logged
logging.getLogger("httpx").setLevel(logging.WARNING)

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_PARTIAL = 1
EXIT_FATAL = 2


def _quality_class(value: str) -> QualityClass:
    try:
        return QualityClass.parse(value)
    except ValueError as e:
        raise argparse.ArgumentTypeError(str(e)) from e


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="wikipersona",
        description="Classify top Wikipedia editors into personas and compare Featured with Non-Assessed articles.",
    )
    parser.add_argument("--api-url", help="MediaWiki API endpoint (default: WIKI_API_URL or English Wikipedia)")
    parser.add_argument("--cache-dir", help="Revision cache directory (default: WIKI_CACHE_DIR or data/cache)")
    parser.add_argument("--config", help="Classifier config YAML (default: PERSONA_CONFIG)")
    verbosity = parser.add_mutually_exclusive_group()
    verbosity.add_argument("-v", "--verbose", action="store_true", help="Log debug messages")
    verbosity.add_argument("-q", "--quiet", action="store_true", help="Log warnings and errors only")

    classifier = parser.add_argument_group("classifier overrides (win over the config file)")
    classifier.add_argument("--top-n", type=int, help="Top editors kept per article")
    classifier.add_argument("--mode", choices=[m.value for m in CorrelationMode],
                            dest="correlation_mode", help="Correlate counts or their derivatives")
    classifier.add_argument("--exclude-bots", action=argparse.BooleanOptionalAction, default=None,
                            help="Drop usernames ending in 'bot' before top-editor selection")
    classifier.add_argument("--cowboy-max-active", type=int, dest="cowboy_max_active_quarters")
    classifier.add_argument("--cowboy-peak-share", type=float)
    classifier.add_argument("--rebel-fraction", type=float, dest="rebel_negative_fraction")
    classifier.add_argument("--conqueror-min-dominant", type=int, dest="conqueror_min_dominant_quarters")
    classifier.add_argument("--sustained-fraction", type=float, dest="sustained_min_active_fraction")

    commands = parser.add_subparsers(dest="command", required=True)

    fetch = commands.add_parser("fetch", help="Fetch revision histories and check eligibility")
    fetch.add_argument("titles", nargs="*", help="Article titles")
    fetch.add_argument("--titles-file", help="File with one title per line")
    fetch.add_argument("--random", type=int, metavar="N", help="Sample N random main-namespace articles")
    fetch.add_argument("--quality-class", type=_quality_class, default=QualityClass.OTHER,
                       help="Quality class recorded for the fetched articles")
    fetch.add_argument("--min-edits", type=int, default=wikipedia.DEFAULT_MIN_EDITS)
    fetch.add_argument("--min-authors", type=int, default=wikipedia.DEFAULT_MIN_AUTHORS)
    fetch.add_argument("--stub-max-bytes", type=int, default=wikipedia.STUB_MAX_BYTES,
                       help="Articles shorter than this count as stubs")
    fetch.add_argument("--refresh", action="store_true", help="Ignore cached histories")
    fetch.add_argument("--out", help="Write the eligible titles to this file")

    analyze = commands.add_parser("analyze", help="Analyze one article")
    analyze.add_argument("title")
    analyze.add_argument("--quality-class", type=_quality_class, default=QualityClass.OTHER)
    analyze.add_argument("--out-dir", help="Output directory (default: data/analysis)")
    analyze.add_argument("--json", action="store_true", help="Print the analysis as JSON")

    stats_cmd = commands.add_parser("stats", help="Chi-square test on a contingency CSV")
    stats_cmd.add_argument("csv", help="Contingency CSV (quality class rows x persona columns)")
    stats_cmd.add_argument("--json", action="store_true", help="Print the result as JSON")

    study = commands.add_parser("study", help="Run the Featured vs Non-Assessed study")
    study.add_argument("--featured", required=True, help="Featured title list")
    study.add_argument("--na", required=True, help="Non-Assessed title list")
    study.add_argument("--out-dir", help="Output directory (default: data/study)")
    study.add_argument("--workers", type=int, help="Concurrent article pipelines")

    return parser


def load_config(args: argparse.Namespace) -> ClassifierConfig:
    """Defaults, then the config file, then CLI flags."""
    path = args.config or utils.get_config_path()
    config = ClassifierConfig.load(path) if path else ClassifierConfig()
    return config.with_overrides(
        top_n=args.top_n,
        correlation_mode=args.correlation_mode,
        exclude_bots=args.exclude_bots,
        cowboy_max_active_quarters=args.cowboy_max_active_quarters,
        cowboy_peak_share=args.cowboy_peak_share,
        rebel_negative_fraction=args.rebel_negative_fraction,
        conqueror_min_dominant_quarters=args.conqueror_min_dominant_quarters,
        sustained_min_active_fraction=args.sustained_min_active_fraction,
    )


def command_fetch(args: argparse.Namespace, client: WikipediaClient, cache_dir: str) -> int:
    titles = list(args.titles)
    if args.titles_file:
        titles.extend(wikipedia.read_title_list(args.titles_file))
    if args.random is not None:
        titles.extend(client.sample_random_candidates(args.random))
    if not titles:
        logger.error("No titles given: pass titles, --titles-file, or --random N")
        return EXIT_FATAL

    failed = 0
    eligible = []
    print("title\trevisions\teditors\tstub\teligible")
    for title in dict.fromkeys(wikipedia.normalize_title(t) for t in titles):
        try:
            revisions = client.fetch_revisions(title, cache_dir, refresh=args.refresh)
            meta = client.fetch_article_meta(title, args.quality_class, revisions, args.stub_max_bytes)
        except WikiError as e:
            logger.warning(f"Skipping '{title}': {e}")
            failed += 1
            continue
        ok = wikipedia.passes_eligibility(meta, args.min_edits, args.min_authors)
        if ok:
            eligible.append(title)
        print(f"{title}\t{meta.revision_count}\t{meta.distinct_editor_count}\t"
              f"{'yes' if meta.is_stub else 'no'}\t{'yes' if ok else 'no'}")

    logger.info(f"{len(eligible)} eligible articles, {failed} failed")
    if args.out:
        utils.atomic_write_text(args.out, "".join(f"{t}\n" for t in eligible))
        logger.info(f"Wrote {args.out}")
    return EXIT_PARTIAL if failed else EXIT_OK


def command_analyze(args: argparse.Namespace, client: WikipediaClient, cache_dir: str,
                    config: ClassifierConfig) -> int:
    analysis = report.analyze_article(args.title, args.quality_class, config, cache_dir, client)
    out_dir = Path(args.out_dir or utils.get_save_directory("analysis"))
    for path in report.write_article_outputs(analysis, out_dir):
        logger.info(f"Wrote {path}")

    if args.json:
        print(json.dumps(analysis.to_json(), indent=2, ensure_ascii=False))
        return EXIT_OK

    print(f"{analysis.article_key}: {analysis.timeline.revision_count} revisions, "
          f"{analysis.timeline.span} quarters")
    for assignment in analysis.assignments:
        print(f"  {assignment.editor_key:<30} {assignment.persona.value:<10} {assignment.rule_fired}")
    counts = persona_counts(list(analysis.assignments))
    print("  " + ", ".join(f"{p.value} {c}" for p, c in zip(PERSONA_ORDER, counts)))
    return EXIT_OK


def command_stats(args: argparse.Namespace) -> int:
    table = stats.read_contingency_csv(args.csv)
    reduced, dropped = stats.drop_empty_categories(table)
    if dropped:
        logger.warning(f"Dropping empty categories: {', '.join(dropped)}")
    result = stats.chi_square_independence(reduced)

    if args.json:
        print(json.dumps({**result.to_json(), "dropped_categories": dropped}, indent=2))
    else:
        print(stats.format_summary(reduced, result))
    return EXIT_OK


def command_study(args: argparse.Namespace, client: WikipediaClient, cache_dir: str,
                  config: ClassifierConfig) -> int:
    manifest = report.StudyManifest.from_files(
        args.featured, args.na,
        config=config,
        cache_dir=Path(cache_dir),
        output_dir=Path(args.out_dir or utils.get_save_directory("study")),
    )
    result = report.run_study(manifest, client, args.workers)
    if result.chi_square:
        chi = result.chi_square
        print(f"Chi-Square {chi.statistic:.2f}   df {chi.df}   p-value {chi.p_value:.6f}")
    if result.partial:
        logger.warning(f"{len(result.errors)} articles skipped: {', '.join(result.errors)}")
        return EXIT_PARTIAL
    return EXIT_OK


def main(argv: Optional[list[str]] = None) -> int:
    """Run the CLI and return its exit code."""
    args = build_parser().parse_args(argv)
    if args.verbose:
        logging.getLogger().setLevel(logging.DEBUG)
    elif args.quiet:
        logging.getLogger().setLevel(logging.WARNING)

    try:
        if args.command == "stats":
            return command_stats(args)

        config = load_config(args)
        cache_dir = args.cache_dir or utils.get_cache_dir()
        client = WikipediaClient(api_url=args.api_url) if args.api_url else wikipedia.get_client()
        if args.command == "fetch":
            return command_fetch(args, client, cache_dir)
        if args.command == "analyze":
            return command_analyze(args, client, cache_dir, config)
        return command_study(args, client, cache_dir, config)
    except (WikiError, TimelineError, report.StudyError, stats.StatsError) as e:
        logger.error(f"{type(e).__name__}: {e}")
        return EXIT_FATAL
    except (ValueError, OSError) as e:
        logger.error(f"Invalid input: {e}")
        return EXIT_FATAL


if __name__ == "__main__":
    sys.exit(main())

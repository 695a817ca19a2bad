"""MCP server exposing persona analysis tools: chi-square tables, article analysis, and eligibility checks."""

import json
import logging

from mcp.server.fastmcp.server import FastMCP

import report
import stats
import utils
import wikipedia
from personas import ClassifierConfig
from wikipedia import QualityClass

logger = logging.getLogger(__name__)

# Initialize MCP server
fast_mcp = FastMCP("mcp-persona-server")


def _error(e: Exception) -> str:
    return json.dumps({"success": False, "error": str(e)}, indent=2)


@fast_mcp.tool()
def chi_square_table(csv_text: str) -> str:
    """Run the chi-square test of independence on a contingency table.

    Args:
        csv_text: CSV with a header row of persona names and one row per quality
            class, e.g. "quality_class,Conqueror,Follower,Rebel,Cowboy\\nFeatured,39,23,19,94\\n..."

    Returns:
        str: JSON with statistic, df, p-value, residuals and percentages, or an error
    """
    try:
        table = stats.parse_contingency_csv(csv_text)
        reduced, dropped = stats.drop_empty_categories(table)
        result = stats.chi_square_independence(reduced)
        return json.dumps({
            "success": True,
            **result.to_json(),
            "dropped_categories": dropped,
        }, indent=2)
    except Exception as e:
        return _error(e)


@fast_mcp.tool()
def analyze_article(title: str, top_n: int = 10) -> str:
    """Classify the top editors of a Wikipedia article into personas.

    Args:
        title: Article title
        top_n: Number of most active editors to classify

    Returns:
        str: JSON with each top editor's persona, features and the correlation matrix
    """
    try:
        path = utils.get_config_path()
        config = (ClassifierConfig.load(path) if path else ClassifierConfig()).with_overrides(top_n=top_n)
        analysis = report.analyze_article(title, QualityClass.OTHER, config, utils.get_cache_dir())
        return json.dumps({"success": True, **analysis.to_json()}, indent=2, ensure_ascii=False)
    except Exception as e:
        logger.warning(f"analyze_article failed for '{title}': {e}")
        return _error(e)


@fast_mcp.tool()
def check_eligibility(title: str) -> str:
    """Check whether an article passes the sampling filter (not a stub, 50+ edits, 10+ authors).

    Args:
        title: Article title

    Returns:
        str: JSON with revision and editor counts, stub flag and the verdict
    """
    try:
        client = wikipedia.get_client()
        revisions = client.fetch_revisions(title, utils.get_cache_dir())
        meta = client.fetch_article_meta(title, QualityClass.OTHER, revisions)
        return json.dumps({
            "success": True,
            "title": meta.article_key,
            "revision_count": meta.revision_count,
            "distinct_editor_count": meta.distinct_editor_count,
            "is_stub": meta.is_stub,
            "eligible": wikipedia.passes_eligibility(meta),
        }, indent=2, ensure_ascii=False)
    except Exception as e:
        return _error(e)


def main() -> None:
    """Run the MCP server."""
    fast_mcp.run()


if __name__ == "__main__":
    main()

"""Utility functions for environment settings, file naming, and atomic file output."""

import hashlib
import os
import re
import tempfile
from pathlib import Path
from urllib.parse import quote

from dotenv import load_dotenv

# Load environment variables
load_dotenv()

DEFAULT_API_URL = "https://en.wikipedia.org/w/api.php"
DEFAULT_USER_AGENT = "wikipersona/0.1 (editor persona analysis; https://github.com/)"
DEFAULT_MAX_CONCURRENCY = 2
MAX_ENCODED_NAME = 200
TITLE_HASH_LENGTH = 12


def get_api_url() -> str:
    """Get the MediaWiki Action API endpoint.

    Returns:
        str: Value of WIKI_API_URL, or the English Wikipedia endpoint
    """
    return os.getenv("WIKI_API_URL", DEFAULT_API_URL).strip() or DEFAULT_API_URL


def get_user_agent() -> str:
    """Get the User-Agent header sent with every API request."""
    return os.getenv("WIKI_USER_AGENT", DEFAULT_USER_AGENT).strip() or DEFAULT_USER_AGENT


def get_max_concurrency() -> int:
    """Get the bound on concurrent article fetches.

    Returns:
        int: WIKI_MAX_CONCURRENCY if set to a positive integer, else 2

    Raises:
        ValueError: If the variable is set but is not a positive integer
    """
    raw = os.getenv("WIKI_MAX_CONCURRENCY", "").strip()
    if not raw:
        return DEFAULT_MAX_CONCURRENCY
    try:
        value = int(raw)
    except ValueError as e:
        raise ValueError(f"WIKI_MAX_CONCURRENCY must be an integer, got '{raw}'") from e
    if value < 1:
        raise ValueError(f"WIKI_MAX_CONCURRENCY must be positive, got {value}")
    return value


def get_save_directory(*args) -> str:
    """Get the absolute path to a subdirectory within the data folder.

    Args:
        *args: Path components to join with the data directory

    Returns:
        str: Absolute path to the requested directory
    """
    return os.path.join(os.getcwd(), "data", *args)


def get_cache_dir() -> str:
    """Get the revision cache directory (WIKI_CACHE_DIR, default data/cache)."""
    return os.getenv("WIKI_CACHE_DIR", "").strip() or get_save_directory("cache")


def get_config_path() -> str | None:
    """Get the classifier config file named by PERSONA_CONFIG, if any."""
    return os.getenv("PERSONA_CONFIG", "").strip() or None


def encode_title(title: str) -> str:
    """Percent-encode an article title for use as a file name.

    Every character outside the unreserved set is encoded, so slashes and
    spaces cannot leak into the path. Names longer than MAX_ENCODED_NAME are
    cut and suffixed with a hash of the full title, leaving room for the
    longest extension written (".derivatives.svg") under the 255-byte limit.
    """
    encoded = quote(title, safe="")
    if len(encoded) <= MAX_ENCODED_NAME:
        return encoded
    digest = hashlib.sha256(title.encode("utf-8")).hexdigest()[:TITLE_HASH_LENGTH]
    # Never cut inside a %XX escape
    head = re.sub(r"%[0-9A-F]?$", "", encoded[:MAX_ENCODED_NAME - TITLE_HASH_LENGTH - 1])
    return f"{head}~{digest}"


def atomic_write_text(path: str | Path, text: str) -> None:
    """Write text to path via a temporary file in the same directory, then rename.

    Output is UTF-8 with LF line endings regardless of platform.

    Raises:
        ValueError: If the file cannot be written
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp_name = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=path.parent)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as f:
            f.write(text)
        os.replace(tmp_name, path)
    except Exception as e:
        try:
            os.unlink(tmp_name)
        except OSError:
            pass
        raise ValueError(f"Failed to write {path}: {e}") from e

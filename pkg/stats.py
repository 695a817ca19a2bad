"""Contingency tables and the chi-square test of independence.

Residuals are Pearson residuals (O - E) / sqrt(E). The p-value comes from the
regularized upper incomplete gamma function Q(df / 2, x / 2), evaluated with
the power series below a + 1 and Lentz's continued fraction above it
("Numerical Recipes in C", 2nd edition, chapter 6). No continuity correction
is applied.
"""

from __future__ import annotations

import csv
import io
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Mapping, Optional, Sequence

import numpy as np

from personas import PERSONA_ORDER, PersonaAssignment
from wikipedia import QualityClass

logger = logging.getLogger(__name__)

RELATIVE_TOLERANCE = 1e-14
MAX_ITERATIONS = 10_000
_TINY = 1e-300

# Row order of the persona contingency table
QUALITY_ROWS = (QualityClass.FEATURED, QualityClass.NON_ASSESSED)
TOTAL_LABEL = "Total"


class StatsError(ValueError):
    """Base class for contingency analysis errors."""


class UnknownQualityClass(StatsError):
    """An article outside the Featured / Non-Assessed classes reached the table."""


class DegenerateTable(StatsError):
    """A row or column total is zero, so expected counts vanish."""

    def __init__(self, message: str, empty_rows: Sequence[str] = (), empty_columns: Sequence[str] = ()):
        super().__init__(message)
        self.empty_rows = tuple(empty_rows)
        self.empty_columns = tuple(empty_columns)


@dataclass(frozen=True)
class ContingencyTable:
    """Quality class x persona count matrix."""

    row_labels: tuple[str, ...]
    col_labels: tuple[str, ...]
    counts: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        object.__setattr__(self, "row_labels", tuple(self.row_labels))
        object.__setattr__(self, "col_labels", tuple(self.col_labels))
        object.__setattr__(self, "counts", tuple(tuple(int(c) for c in row) for row in self.counts))
        if len(self.counts) != len(self.row_labels):
            raise StatsError(f"{len(self.counts)} count rows for {len(self.row_labels)} row labels")
        for label, row in zip(self.row_labels, self.counts):
            if len(row) != len(self.col_labels):
                raise StatsError(f"Row '{label}' has {len(row)} cells, expected {len(self.col_labels)}")
            if any(c < 0 for c in row):
                raise StatsError(f"Row '{label}' has negative counts")

    def as_array(self) -> np.ndarray:
        return np.array(self.counts, dtype=np.int64).reshape(len(self.row_labels), len(self.col_labels))

    @property
    def row_totals(self) -> list[int]:
        return [sum(row) for row in self.counts]

    @property
    def col_totals(self) -> list[int]:
        return [int(v) for v in self.as_array().sum(axis=0)]

    @property
    def grand_total(self) -> int:
        return sum(self.row_totals)


@dataclass(frozen=True)
class ChiSquareResult:
    """Outcome of the chi-square test of independence."""

    row_labels: tuple[str, ...]
    col_labels: tuple[str, ...]
    statistic: float
    df: int
    p_value: float
    expected: tuple[tuple[float, ...], ...]
    std_residuals: tuple[tuple[float, ...], ...]
    percent_rows: tuple[tuple[float, ...], ...]

    def to_json(self) -> dict[str, Any]:
        return {
            "row_labels": list(self.row_labels),
            "col_labels": list(self.col_labels),
            "statistic": self.statistic,
            "df": self.df,
            "p_value": self.p_value,
            "expected": [list(row) for row in self.expected],
            "std_residuals": [list(row) for row in self.std_residuals],
            "percent_rows": [list(row) for row in self.percent_rows],
        }


def _as_tuples(matrix: np.ndarray) -> tuple[tuple[float, ...], ...]:
    return tuple(tuple(float(v) for v in row) for row in matrix)


def build_contingency(
    assignments: Mapping[str, tuple[QualityClass, Sequence[PersonaAssignment]]]
) -> ContingencyTable:
    """Tally persona assignments per quality class.

    An editor counts once per article, so the same username in two articles
    contributes twice.

    Raises:
        UnknownQualityClass: If an article is neither Featured nor Non-Assessed
    """
    counts = {quality: [0] * len(PERSONA_ORDER) for quality in QUALITY_ROWS}
    column = {persona: j for j, persona in enumerate(PERSONA_ORDER)}

    for article_key, (quality_class, article_assignments) in assignments.items():
        quality_class = QualityClass(quality_class)
        if quality_class not in counts:
            raise UnknownQualityClass(
                f"Article '{article_key}' has quality class {quality_class.value}; "
                f"only Featured and Non-Assessed articles can be tabulated"
            )
        for assignment in article_assignments:
            counts[quality_class][column[assignment.persona]] += 1

    return ContingencyTable(
        row_labels=tuple(q.label for q in QUALITY_ROWS),
        col_labels=tuple(p.value for p in PERSONA_ORDER),
        counts=tuple(tuple(counts[q]) for q in QUALITY_ROWS),
    )


def _require_nondegenerate(table: ContingencyTable) -> None:
    empty_rows = [label for label, total in zip(table.row_labels, table.row_totals) if total == 0]
    empty_columns = [label for label, total in zip(table.col_labels, table.col_totals) if total == 0]
    if table.grand_total < 1 or empty_rows or empty_columns:
        raise DegenerateTable(
            f"Zero totals in rows {empty_rows or '[]'} and columns {empty_columns or '[]'}",
            empty_rows=empty_rows,
            empty_columns=empty_columns,
        )


def drop_empty_categories(table: ContingencyTable) -> tuple[ContingencyTable, list[str]]:
    """Remove rows and columns whose total is zero.

    Returns:
        tuple: (reduced table, labels of the dropped rows and columns)
    """
    keep_rows = [i for i, total in enumerate(table.row_totals) if total > 0]
    keep_cols = [j for j, total in enumerate(table.col_totals) if total > 0]
    dropped = [table.row_labels[i] for i in range(len(table.row_labels)) if i not in keep_rows]
    dropped += [table.col_labels[j] for j in range(len(table.col_labels)) if j not in keep_cols]

    reduced = ContingencyTable(
        row_labels=tuple(table.row_labels[i] for i in keep_rows),
        col_labels=tuple(table.col_labels[j] for j in keep_cols),
        counts=tuple(tuple(table.counts[i][j] for j in keep_cols) for i in keep_rows),
    )
    return reduced, dropped


def expected_counts(table: ContingencyTable) -> np.ndarray:
    """Expected cell counts under independence: row total x column total / grand total."""
    _require_nondegenerate(table)
    rows = np.asarray(table.row_totals, dtype=np.float64)
    cols = np.asarray(table.col_totals, dtype=np.float64)
    return np.outer(rows, cols) / table.grand_total


def standardized_residuals(table: ContingencyTable) -> list[list[float]]:
    """Pearson residuals (observed - expected) / sqrt(expected).

    Raises:
        DegenerateTable: If a row or column total is zero
    """
    expected = expected_counts(table)
    residuals = (table.as_array() - expected) / np.sqrt(expected)
    return residuals.tolist()


def percent_distribution(table: ContingencyTable) -> list[list[float]]:
    """Row-normalized percentages, 100 x count / row total (unrounded).

    Raises:
        DegenerateTable: If a row total is zero
    """
    empty_rows = [label for label, total in zip(table.row_labels, table.row_totals) if total == 0]
    if empty_rows:
        raise DegenerateTable(f"Zero totals in rows {empty_rows}", empty_rows=empty_rows)
    observed = table.as_array().astype(np.float64)
    return (100.0 * observed / observed.sum(axis=1, keepdims=True)).tolist()


def _lower_gamma_series(a: float, x: float) -> float:
    """Regularized lower incomplete gamma P(a, x) by its power series."""
    ap = a
    term = 1.0 / a
    total = term
    for _ in range(MAX_ITERATIONS):
        ap += 1.0
        term *= x / ap
        total += term
        if abs(term) < abs(total) * RELATIVE_TOLERANCE:
            return total * math.exp(-x + a * math.log(x) - math.lgamma(a))
    raise ArithmeticError(f"Incomplete gamma series did not converge for a={a}, x={x}")


def _upper_gamma_continued_fraction(a: float, x: float) -> float:
    """Regularized upper incomplete gamma Q(a, x) by modified Lentz continued fraction."""
    b = x + 1.0 - a
    c = 1.0 / _TINY
    d = 1.0 / b
    h = d
    for i in range(1, MAX_ITERATIONS + 1):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < _TINY:
            d = _TINY
        c = b + an / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < RELATIVE_TOLERANCE:
            return math.exp(-x + a * math.log(x) - math.lgamma(a)) * h
    raise ArithmeticError(f"Incomplete gamma continued fraction did not converge for a={a}, x={x}")


def regularized_gamma_q(a: float, x: float) -> float:
    """Regularized upper incomplete gamma function Q(a, x) = 1 - P(a, x)."""
    if a <= 0:
        raise ValueError(f"Gamma shape must be positive, got {a}")
    if x < 0:
        raise ValueError(f"Incomplete gamma argument must be non-negative, got {x}")
    if x == 0:
        return 1.0
    if x < a + 1.0:
        return min(1.0, max(0.0, 1.0 - _lower_gamma_series(a, x)))
    return min(1.0, max(0.0, _upper_gamma_continued_fraction(a, x)))


def chi_square_survival(x: float, df: int) -> float:
    """Upper-tail probability of the chi-square distribution, Q(df / 2, x / 2)."""
    if df < 1:
        raise ValueError(f"Degrees of freedom must be positive, got {df}")
    if x < 0:
        raise ValueError(f"Chi-square statistic must be non-negative, got {x}")
    return regularized_gamma_q(df / 2.0, x / 2.0)


def chi_square_independence(table: ContingencyTable) -> ChiSquareResult:
    """Pearson chi-square test of independence on a contingency table.

    Raises:
        DegenerateTable: If a row or column total is zero, or the table has a single row or column
    """
    expected = expected_counts(table)
    rows, cols = expected.shape
    df = (rows - 1) * (cols - 1)
    if df < 1:
        raise DegenerateTable(f"A {rows}x{cols} table has no degrees of freedom")

    diff = table.as_array() - expected
    statistic = float(np.sum(diff ** 2 / expected))
    p_value = chi_square_survival(statistic, df)
    logger.debug(f"Chi-square {statistic:.4f} with df={df}, p={p_value:.6g}")

    return ChiSquareResult(
        row_labels=table.row_labels,
        col_labels=table.col_labels,
        statistic=statistic,
        df=df,
        p_value=p_value,
        expected=_as_tuples(expected),
        std_residuals=_as_tuples(diff / np.sqrt(expected)),
        percent_rows=_as_tuples(np.asarray(percent_distribution(table))),
    )


def _fmt(value: float, places: int) -> str:
    text = f"{value:.{places}f}"
    # Avoid "-0.00" for values that round to zero
    return text[1:] if text.startswith("-") and float(text) == 0 else text


def format_contingency_csv(table: ContingencyTable, result: Optional[ChiSquareResult] = None,
                           note: Optional[str] = None) -> str:
    """Render a table in the persona-distribution layout as CSV text.

    The count block (with Total row and column) comes first and ends at a blank
    line; the chi-square line, percentage rows and residual rows follow.
    """
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(["quality_class", *table.col_labels, TOTAL_LABEL])
    for label, row, total in zip(table.row_labels, table.counts, table.row_totals):
        writer.writerow([label, *row, total])
    writer.writerow([TOTAL_LABEL, *table.col_totals, table.grand_total])
    writer.writerow([])

    if result is None:
        writer.writerow(["Chi-Square", note or "not computed"])
        return buffer.getvalue()

    writer.writerow(["Chi-Square", _fmt(result.statistic, 2), "df", result.df,
                     "p-value", _fmt(result.p_value, 6)])
    if note:
        writer.writerow(["Note", note])

    # The test may cover fewer columns than the table; cells of dropped columns stay empty
    position = {label: j for j, label in enumerate(result.col_labels)}

    def aligned(row: Sequence[float], places: int) -> list[str]:
        return [_fmt(row[position[c]], places) if c in position else "" for c in table.col_labels]

    writer.writerow(["Percentage distribution:"])
    for label, row in zip(result.row_labels, result.percent_rows):
        writer.writerow([label, *aligned(row, 1), _fmt(sum(row), 1)])
    writer.writerow(["Standardized residuals:"])
    for label, row in zip(result.row_labels, result.std_residuals):
        writer.writerow([label, *aligned(row, 2)])
    return buffer.getvalue()


def parse_contingency_csv(text: str) -> ContingencyTable:
    """Parse the count block of a contingency CSV.

    The header row names the personas after a leading label cell; the first
    column names the quality class. A trailing Total column and a Total row
    are ignored, and parsing stops at the first blank line.

    Raises:
        StatsError: If the block is missing or holds non-integer counts
    """
    rows = []
    for row in csv.reader(io.StringIO(text)):
        if not any(cell.strip() for cell in row):
            if rows:
                break
            continue
        rows.append([cell.strip() for cell in row])

    if len(rows) < 2:
        raise StatsError("Contingency CSV needs a header row and at least one data row")

    header = rows[0][1:]
    has_total_column = bool(header) and header[-1].lower() == TOTAL_LABEL.lower()
    col_labels = header[:-1] if has_total_column else header
    if not col_labels:
        raise StatsError("Contingency CSV header names no categories")

    row_labels, counts = [], []
    for row in rows[1:]:
        if row[0].lower() == TOTAL_LABEL.lower():
            continue
        cells = row[1:len(col_labels) + 1]
        if len(cells) != len(col_labels):
            raise StatsError(f"Row '{row[0]}' has {len(cells)} cells, expected {len(col_labels)}")
        try:
            values = [float(cell) for cell in cells]
        except ValueError as e:
            raise StatsError(f"Row '{row[0]}' holds a non-numeric count: {e}") from e
        if any(v != int(v) for v in values):
            raise StatsError(f"Row '{row[0]}' holds a non-integer count")
        row_labels.append(row[0])
        counts.append(tuple(int(v) for v in values))

    return ContingencyTable(tuple(row_labels), tuple(col_labels), tuple(counts))


def read_contingency_csv(path: str | Path) -> ContingencyTable:
    """Read a contingency table from a UTF-8 CSV file."""
    with open(path, "r", encoding="utf-8", newline="") as f:
        return parse_contingency_csv(f.read())


def format_summary(table: ContingencyTable, result: ChiSquareResult) -> str:
    """Plain-text rendering of the test for the terminal."""
    width = max(len(label) for label in (*table.row_labels, TOTAL_LABEL)) + 2
    header = "".join(f"{label:>11}" for label in (*table.col_labels, TOTAL_LABEL))
    lines = [f"{'':<{width}}{header}"]
    for label, row, total in zip(table.row_labels, table.counts, table.row_totals):
        lines.append(f"{label:<{width}}" + "".join(f"{v:>11d}" for v in (*row, total)))
    lines.append(f"{TOTAL_LABEL:<{width}}" + "".join(f"{v:>11d}" for v in (*table.col_totals, table.grand_total)))
    lines.append("")
    lines.append(f"Chi-Square {result.statistic:.2f}   df {result.df}   p-value {result.p_value:.6f}")
    lines.append("Percentage distribution:")
    for label, row in zip(result.row_labels, result.percent_rows):
        lines.append(f"{label:<{width}}" + "".join(f"{_fmt(v, 1) + ' %':>11}" for v in row))
    lines.append("Standardized residuals:")
    for label, row in zip(result.row_labels, result.std_residuals):
        lines.append(f"{label:<{width}}" + "".join(f"{_fmt(v, 2):>11}" for v in row))
    return "\n".join(lines)

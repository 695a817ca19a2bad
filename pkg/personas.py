"""Persona classification of an article's top editors.

Each top editor gets exactly one of four personas from an ordered decision
procedure over features of their quarterly activity:

    1. cowboy_burst        short burst of activity          -> Cowboy
    2. rebel_negative      mostly negative correlations     -> Rebel
    3. conqueror_dominant  sustained, volume-dominant       -> Conqueror
    4. follower_default    everything else                  -> Follower
"""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, fields
from enum import Enum
from pathlib import Path
from typing import Any, Mapping, Optional

import numpy as np
import yaml

from timeline import (
    DEFAULT_TOP_N,
    ArticleTimeline,
    CorrelationMatrix,
    CorrelationMode,
    TooFewEditors,
    TooShort,
    correlation_matrix,
)

logger = logging.getLogger(__name__)

RULE_COWBOY_BURST = "cowboy_burst"
RULE_REBEL_NEGATIVE = "rebel_negative"
RULE_CONQUEROR_DOMINANT = "conqueror_dominant"
RULE_FOLLOWER_DEFAULT = "follower_default"
RULES = (RULE_COWBOY_BURST, RULE_REBEL_NEGATIVE, RULE_CONQUEROR_DOMINANT, RULE_FOLLOWER_DEFAULT)


class Persona(str, Enum):
    """The four editing personas."""

    CONQUEROR = "Conqueror"
    FOLLOWER = "Follower"
    REBEL = "Rebel"
    COWBOY = "Cowboy"


# Column order of the persona contingency table
PERSONA_ORDER = (Persona.CONQUEROR, Persona.FOLLOWER, Persona.REBEL, Persona.COWBOY)


class MatrixMismatch(ValueError):
    """The correlation matrix was computed for a different set of editors."""


@dataclass(frozen=True)
class EditorFeatures:
    """Evidence the classifier looks at for one editor."""

    editor_key: str
    active_quarters: int
    span_quarters: int
    peak_share: float
    onset_quarter: int
    dominant_quarters: int
    negative_corr_fraction: Optional[float]

    def __post_init__(self):
        if not 1 <= self.active_quarters <= self.span_quarters:
            raise ValueError(
                f"{self.editor_key}: active_quarters {self.active_quarters} "
                f"outside 1..{self.span_quarters}"
            )
        if not 0 < self.peak_share <= 1:
            raise ValueError(f"{self.editor_key}: peak_share {self.peak_share} outside (0, 1]")
        if not 0 <= self.onset_quarter < self.span_quarters:
            raise ValueError(f"{self.editor_key}: onset_quarter {self.onset_quarter} outside the span")
        if not 0 <= self.dominant_quarters <= self.active_quarters:
            raise ValueError(f"{self.editor_key}: dominant_quarters {self.dominant_quarters} invalid")
        if self.negative_corr_fraction is not None and not 0 <= self.negative_corr_fraction <= 1:
            raise ValueError(
                f"{self.editor_key}: negative_corr_fraction {self.negative_corr_fraction} outside [0, 1]"
            )


@dataclass(frozen=True)
class PersonaAssignment:
    """An editor's persona and the branch of the decision procedure that produced it."""

    editor_key: str
    persona: Persona
    features: EditorFeatures
    rule_fired: str

    def to_json(self) -> dict[str, Any]:
        return {
            "editor_key": self.editor_key,
            "persona": self.persona.value,
            "rule_fired": self.rule_fired,
            "features": asdict(self.features),
        }


@dataclass(frozen=True)
class ClassifierConfig:
    """Thresholds of the decision procedure plus the timeline options feeding it.

    A cowboy_peak_share above 1.0 disables the peak-share test and a
    cowboy_max_active_quarters of 0 disables the active-quarter test.
    """

    top_n: int = DEFAULT_TOP_N
    cowboy_max_active_quarters: int = 2
    cowboy_peak_share: float = 0.7
    rebel_negative_fraction: float = 0.5
    conqueror_min_dominant_quarters: int = 3
    sustained_min_active_fraction: float = 0.25
    correlation_mode: CorrelationMode = CorrelationMode.COUNTS
    exclude_bots: bool = False

    def __post_init__(self):
        object.__setattr__(self, "correlation_mode", CorrelationMode(self.correlation_mode))
        if self.top_n < 1:
            raise ValueError(f"top_n must be positive, got {self.top_n}")
        if self.cowboy_max_active_quarters < 0:
            raise ValueError("cowboy_max_active_quarters must not be negative")
        if self.cowboy_peak_share <= 0:
            raise ValueError("cowboy_peak_share must be positive")
        if not 0 < self.rebel_negative_fraction <= 1:
            raise ValueError("rebel_negative_fraction must lie in (0, 1]")
        if self.conqueror_min_dominant_quarters < 1:
            raise ValueError("conqueror_min_dominant_quarters must be positive")
        if not 0 < self.sustained_min_active_fraction <= 1:
            raise ValueError("sustained_min_active_fraction must lie in (0, 1]")

    @classmethod
    def from_mapping(cls, data: Mapping[str, Any]) -> "ClassifierConfig":
        """Build a config from flat keys matching the field names.

        Raises:
            ValueError: On unknown keys or values of the wrong type
        """
        known = {f.name: f for f in fields(cls)}
        unknown = sorted(set(data) - set(known))
        if unknown:
            raise ValueError(f"Unknown classifier config keys: {', '.join(unknown)}")

        values: dict[str, Any] = {}
        for key, raw in data.items():
            default = getattr(cls, key)
            try:
                if isinstance(default, bool):
                    if not isinstance(raw, bool):
                        raise TypeError(f"expected true/false, got {raw!r}")
                    values[key] = raw
                elif isinstance(default, CorrelationMode):
                    values[key] = CorrelationMode(str(raw).lower())
                elif isinstance(default, int):
                    if isinstance(raw, bool) or int(raw) != raw:
                        raise TypeError(f"expected an integer, got {raw!r}")
                    values[key] = int(raw)
                else:
                    if isinstance(raw, bool):
                        raise TypeError(f"expected a number, got {raw!r}")
                    values[key] = float(raw)
            except (TypeError, ValueError) as e:
                raise ValueError(f"Invalid value for '{key}': {e}") from e
        return cls(**values)

    @classmethod
    def load(cls, path: str | Path) -> "ClassifierConfig":
        """Load a YAML config file of flat key/value pairs."""
        try:
            with open(path, "r", encoding="utf-8") as f:
                data = yaml.safe_load(f)
        except (OSError, yaml.YAMLError) as e:
            raise ValueError(f"Cannot read classifier config {path}: {e}") from e
        if data is None:
            data = {}
        if not isinstance(data, dict):
            raise ValueError(f"Classifier config {path} must be a mapping of keys to values")
        logger.info(f"Loaded classifier config from {path}")
        return cls.from_mapping(data)

    def with_overrides(self, **overrides: Any) -> "ClassifierConfig":
        """Return a copy with every non-None override applied (CLI flags win over the file)."""
        changes = {k: v for k, v in overrides.items() if v is not None}
        return self.from_mapping({**self.to_json(), **changes}) if changes else self

    def to_json(self) -> dict[str, Any]:
        data = asdict(self)
        data["correlation_mode"] = self.correlation_mode.value
        return data


def _dominant_quarter_counts(matrix: np.ndarray) -> np.ndarray:
    """Per editor, the number of quarters in which they hold the strict maximum count."""
    dominant = np.zeros(matrix.shape[0], dtype=np.int64)
    for column in matrix.T:
        peak = column.max()
        if peak > 0 and np.count_nonzero(column == peak) == 1:
            dominant[int(column.argmax())] += 1
    return dominant


def extract_features(timeline: ArticleTimeline, corr: CorrelationMatrix) -> list[EditorFeatures]:
    """Compute classifier features for every top editor, in timeline order.

    Raises:
        MatrixMismatch: If corr covers a different editor set than the timeline
    """
    if sorted(corr.editor_keys) != sorted(timeline.editor_keys):
        raise MatrixMismatch(
            f"Correlation editors {sorted(corr.editor_keys)} do not match "
            f"timeline editors of '{timeline.article_key}'"
        )

    matrix = timeline.counts_matrix()
    dominant = _dominant_quarter_counts(matrix)
    position = {key: i for i, key in enumerate(corr.editor_keys)}

    features = []
    for row, series in enumerate(timeline.series):
        counts = matrix[row]
        i = position[series.editor_key]
        defined = [
            corr.entry(i, j) for j in range(len(corr.editor_keys))
            if j != i and corr.entry(i, j) is not None
        ]
        features.append(EditorFeatures(
            editor_key=series.editor_key,
            active_quarters=int(np.count_nonzero(counts)),
            span_quarters=int(counts.size),
            peak_share=float(counts.max() / counts.sum()),
            onset_quarter=series.onset_quarter,
            dominant_quarters=int(dominant[row]),
            negative_corr_fraction=(
                sum(1 for value in defined if value < 0) / len(defined) if defined else None
            ),
        ))
    return features


def classify(features: EditorFeatures, config: ClassifierConfig = ClassifierConfig()) -> PersonaAssignment:
    """Run the ordered decision procedure; the first matching branch wins."""
    f, c = features, config

    if f.active_quarters <= c.cowboy_max_active_quarters or f.peak_share >= c.cowboy_peak_share:
        persona, rule = Persona.COWBOY, RULE_COWBOY_BURST
    elif f.negative_corr_fraction is not None and f.negative_corr_fraction > c.rebel_negative_fraction:
        persona, rule = Persona.REBEL, RULE_REBEL_NEGATIVE
    elif (f.dominant_quarters >= c.conqueror_min_dominant_quarters
          and f.active_quarters >= c.sustained_min_active_fraction * f.span_quarters):
        persona, rule = Persona.CONQUEROR, RULE_CONQUEROR_DOMINANT
    else:
        persona, rule = Persona.FOLLOWER, RULE_FOLLOWER_DEFAULT

    return PersonaAssignment(f.editor_key, persona, f, rule)


def article_correlation(timeline: ArticleTimeline,
                        mode: CorrelationMode | str = CorrelationMode.COUNTS) -> CorrelationMatrix:
    """Correlation matrix of a timeline, all-undefined when correlation is impossible."""
    try:
        return correlation_matrix(timeline, mode)
    except (TooFewEditors, TooShort) as e:
        logger.info(f"No correlations for '{timeline.article_key}': {e}")
        return CorrelationMatrix.undefined(timeline.editor_keys)


def classify_article(timeline: ArticleTimeline,
                     config: ClassifierConfig = ClassifierConfig()) -> list[PersonaAssignment]:
    """Assign a persona to every top editor of an article, in timeline order.

    A single-editor article has no defined correlations, so its editor can
    never take the Rebel branch.
    """
    corr = article_correlation(timeline, config.correlation_mode)
    return [classify(f, config) for f in extract_features(timeline, corr)]


def persona_counts(assignments: list[PersonaAssignment]) -> list[int]:
    """Tally assignments in PERSONA_ORDER."""
    return [sum(1 for a in assignments if a.persona is persona) for persona in PERSONA_ORDER]

"""SVG line charts of top editors' quarterly activity.

One polyline per editor over quarter indices, a legend naming each editor with
its persona, and labelled axes. Output is self-contained (no external fonts,
images or stylesheets) and depends only on its inputs.
"""

from __future__ import annotations

import math
import xml.etree.ElementTree as ET
from typing import Mapping, Optional

from timeline import ArticleTimeline, CorrelationMode, derivative_series

SVG_NS = "http://www.w3.org/2000/svg"
WIDTH = 960
HEIGHT = 500
MARGIN_LEFT = 70
MARGIN_RIGHT = 240
MARGIN_TOP = 50
MARGIN_BOTTOM = 70
MAX_X_LABELS = 16
Y_TICKS = 5

PALETTE = (
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
    "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf",
)


def _num(value: float) -> str:
    return f"{value:.2f}"


def _nice_step(span: float) -> float:
    """Round a raw tick step up to 1, 2 or 5 times a power of ten (at least 1)."""
    raw = max(span / Y_TICKS, 1.0)
    magnitude = 10 ** math.floor(math.log10(raw))
    for factor in (1, 2, 5, 10):
        if raw <= factor * magnitude:
            return factor * magnitude
    return 10 * magnitude


def _text(parent: ET.Element, x: float, y: float, content: str, **attrs: str) -> ET.Element:
    element = ET.SubElement(parent, "text", {"x": _num(x), "y": _num(y), **attrs})
    element.text = content
    return element


def render_oscillation_chart(timeline: ArticleTimeline,
                             personas: Optional[Mapping[str, str]] = None,
                             mode: CorrelationMode | str = CorrelationMode.COUNTS) -> str:
    """Render the editing-oscillation chart of an article as an SVG document.

    Args:
        timeline: Article timeline (top editors only)
        personas: Optional editor -> persona name, shown in the legend
        mode: Plot raw quarterly counts, or quarter-to-quarter changes

    Returns:
        str: SVG document text
    """
    mode = CorrelationMode(mode)
    derivatives = mode is CorrelationMode.DERIVATIVES
    labels = timeline.quarter_labels()
    if derivatives:
        labels = labels[1:]
        values = [derivative_series(s.counts) for s in timeline.series]
    else:
        values = [list(s.counts) for s in timeline.series]

    flat = [v for row in values for v in row]
    y_min = min(0, min(flat, default=0))
    y_max = max(1, max(flat, default=0))
    step = _nice_step(y_max - y_min)
    y_min = step * math.floor(y_min / step)
    y_max = step * math.ceil(y_max / step)

    plot_left, plot_right = MARGIN_LEFT, WIDTH - MARGIN_RIGHT
    plot_top, plot_bottom = MARGIN_TOP, HEIGHT - MARGIN_BOTTOM
    n = len(labels)

    def x_at(k: int) -> float:
        if n <= 1:
            return (plot_left + plot_right) / 2
        return plot_left + k * (plot_right - plot_left) / (n - 1)

    def y_at(value: float) -> float:
        return plot_bottom - (value - y_min) * (plot_bottom - plot_top) / (y_max - y_min)

    svg = ET.Element("svg", {
        "xmlns": SVG_NS,
        "width": str(WIDTH),
        "height": str(HEIGHT),
        "viewBox": f"0 0 {WIDTH} {HEIGHT}",
        "font-family": "sans-serif",
        "font-size": "12",
    })
    heading = "quarter-to-quarter change in edits" if derivatives else "edits per quarter"
    ET.SubElement(svg, "title").text = f"{timeline.article_key}: {heading}"
    ET.SubElement(svg, "rect", {"width": str(WIDTH), "height": str(HEIGHT), "fill": "#ffffff"})
    _text(svg, WIDTH / 2, 28, f"{timeline.article_key} ({heading})",
          **{"text-anchor": "middle", "font-size": "16"})

    axes = ET.SubElement(svg, "g", {"class": "axes", "stroke": "#333333"})
    ET.SubElement(axes, "line", {"x1": _num(plot_left), "y1": _num(plot_bottom),
                                 "x2": _num(plot_right), "y2": _num(plot_bottom)})
    ET.SubElement(axes, "line", {"x1": _num(plot_left), "y1": _num(plot_top),
                                 "x2": _num(plot_left), "y2": _num(plot_bottom)})

    ticks = ET.SubElement(svg, "g", {"class": "ticks", "fill": "#333333"})
    stride = max(1, math.ceil(n / MAX_X_LABELS))
    for k, label in enumerate(labels):
        x = x_at(k)
        ET.SubElement(ticks, "line", {"class": "x-tick", "x1": _num(x), "y1": _num(plot_bottom),
                                      "x2": _num(x), "y2": _num(plot_bottom + 5), "stroke": "#333333"})
        if k % stride == 0:
            _text(ticks, x, plot_bottom + 20, label, **{"text-anchor": "middle", "font-size": "10"})

    tick_count = int(round((y_max - y_min) / step))
    for i in range(tick_count + 1):
        value = y_min + i * step
        y = y_at(value)
        ET.SubElement(ticks, "line", {"class": "y-tick", "x1": _num(plot_left - 5), "y1": _num(y),
                                      "x2": _num(plot_left), "y2": _num(y), "stroke": "#333333"})
        _text(ticks, plot_left - 8, y + 4, f"{value:g}", **{"text-anchor": "end", "font-size": "10"})

    _text(svg, (plot_left + plot_right) / 2, HEIGHT - 20, "Quarter",
          **{"class": "axis-label", "text-anchor": "middle"})
    y_caption = "Change in edit count" if derivatives else "Edit count"
    y_mid = (plot_top + plot_bottom) / 2
    _text(svg, 18, y_mid, y_caption, **{"class": "axis-label", "text-anchor": "middle",
                                         "transform": f"rotate(-90 18 {_num(y_mid)})"})

    if derivatives and y_min < 0:
        ET.SubElement(svg, "line", {"class": "baseline", "x1": _num(plot_left), "y1": _num(y_at(0)),
                                    "x2": _num(plot_right), "y2": _num(y_at(0)),
                                    "stroke": "#999999", "stroke-dasharray": "4 3"})

    lines = ET.SubElement(svg, "g", {"class": "series", "fill": "none", "stroke-width": "2"})
    legend = ET.SubElement(svg, "g", {"class": "legend"})
    for index, (series, row) in enumerate(zip(timeline.series, values)):
        color = PALETTE[index % len(PALETTE)]
        points = " ".join(f"{_num(x_at(k))},{_num(y_at(v))}" for k, v in enumerate(row))
        ET.SubElement(lines, "polyline", {"class": "editor", "data-editor": series.editor_key,
                                          "stroke": color, "points": points})

        y = plot_top + 10 + index * 20
        x = plot_right + 20
        ET.SubElement(legend, "line", {"x1": _num(x), "y1": _num(y - 4), "x2": _num(x + 20),
                                       "y2": _num(y - 4), "stroke": color, "stroke-width": "3"})
        entry = series.editor_key
        if personas and series.editor_key in personas:
            entry = f"{series.editor_key} ({personas[series.editor_key]})"
        _text(legend, x + 28, y, entry, **{"class": "legend-entry"})

    return '<?xml version="1.0" encoding="UTF-8"?>\n' + ET.tostring(svg, encoding="unicode") + "\n"

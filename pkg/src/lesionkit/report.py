"""Comparison tables and confusion-matrix heatmap rendering.

The heatmap is emitted as SVG: deterministic text output, diffable in
tests, no plotting dependency.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .metrics import ConfusionMatrix, MetricReport, normalize_rows


def format_pct(value: float) -> str:
    return f"{value * 100:.1f}%"


def render_table(rows: list[tuple[str, str, MetricReport]]) -> str:
    """One line per model: name, parameter count (registry metadata),
    weighted accuracy/precision/recall/F1."""
    header = ["Model", "Parameters", "Accuracy", "Precision", "Recall", "F1"]
    body = [[name, params,
             format_pct(r.accuracy_std),
             format_pct(r.precision_weighted),
             format_pct(r.recall_weighted),
             format_pct(r.f1_weighted)]
            for name, params, r in rows]
    widths = [max(len(header[i]), *(len(b[i]) for b in body))
              for i in range(len(header))]
    lines = ["  ".join(h.ljust(widths[i]) for i, h in enumerate(header))]
    lines.append("  ".join("-" * w for w in widths))
    for b in body:
        lines.append("  ".join(v.ljust(widths[i]) for i, v in enumerate(b)))
    return "\n".join(lines) + "\n"


def render_table_csv(rows: list[tuple[str, str, MetricReport]]) -> str:
    lines = ["model,parameters,accuracy,precision,recall,f1"]
    for name, params, r in rows:
        lines.append(",".join([
            name, params,
            repr(r.accuracy_std), repr(r.precision_weighted),
            repr(r.recall_weighted), repr(r.f1_weighted)]))
    return "\n".join(lines) + "\n"


def _cell_color(frac: float) -> str:
    # white -> blue ramp
    v = int(round(255 * (1.0 - frac)))
    return f"#{v:02x}{v:02x}ff"


def render_heatmap_svg(cm: ConfusionMatrix, title: str = "") -> str:
    """Row-normalized confusion-matrix heatmap with a percentage label in
    every cell."""
    rows, _ = normalize_rows(cm)
    n = len(cm.classes)
    cell = 72
    margin = 120
    top = 56
    width = margin + n * cell + 16
    height = top + n * cell + 72
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" '
        f'height="{height}" font-family="sans-serif" font-size="12">',
    ]
    if title:
        parts.append(f'<text x="{margin}" y="24" font-size="16">{title}'
                     f'</text>')
    for i in range(n):
        for j in range(n):
            frac = float(rows[i][j])
            x = margin + j * cell
            y = top + i * cell
            parts.append(
                f'<rect x="{x}" y="{y}" width="{cell}" height="{cell}" '
                f'fill="{_cell_color(frac)}" stroke="#444"/>')
            color = "#ffffff" if frac > 0.5 else "#000000"
            parts.append(
                f'<text x="{x + cell / 2:.0f}" y="{y + cell / 2 + 4:.0f}" '
                f'text-anchor="middle" fill="{color}">'
                f'{frac * 100:.1f}%</text>')
    for i, cls in enumerate(cm.classes):
        y = top + i * cell + cell / 2 + 4
        parts.append(f'<text x="{margin - 8}" y="{y:.0f}" '
                     f'text-anchor="end">{cls}</text>')
        x = margin + i * cell + cell / 2
        yb = top + n * cell + 16
        parts.append(
            f'<text x="{x:.0f}" y="{yb}" text-anchor="middle" '
            f'transform="rotate(30 {x:.0f} {yb})">{cls}</text>')
    parts.append(f'<text x="8" y="{top + n * cell / 2:.0f}" '
                 f'transform="rotate(-90 14 {top + n * cell / 2:.0f})" '
                 f'text-anchor="middle">true</text>')
    parts.append(f'<text x="{margin + n * cell / 2:.0f}" y="{height - 8}" '
                 f'text-anchor="middle">predicted</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def save_heatmap(cm: ConfusionMatrix, path: str | Path,
                 title: str = "") -> None:
    Path(path).write_text(render_heatmap_svg(cm, title), encoding="utf-8")

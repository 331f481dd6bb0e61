"""Gantt-chart export of schedules as text or SVG."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Optional, Sequence

from .model import Assignment, TaskStatus

__all__ = ["GanttBar", "GanttRow", "build_gantt", "render_text", "render_svg"]

_STATUS_CLASS = {
    TaskStatus.PENDING: "pending",
    TaskStatus.RUNNING: "running",
    TaskStatus.DONE: "done",
    TaskStatus.FAILED: "failed",
    TaskStatus.CANCELED: "canceled",
}

_STATUS_COLOR = {
    "pending": "#4682b4",
    "running": "#e69500",
    "done": "#2e8b57",
    "failed": "#c0392b",
    "canceled": "#9e9e9e",
}

_STATUS_GLYPH = {
    "pending": "░",
    "running": "▒",
    "done": "█",
    "failed": "!",
    "canceled": "x",
}


@dataclass(frozen=True)
class GanttBar:
    label: str
    start_s: int
    end_s: int
    status: str  # css-style class: todo | running | done | canceled
    recipe_index: int
    task_index: int


@dataclass(frozen=True)
class GanttRow:
    machine: str
    bars: tuple[GanttBar, ...]


def build_gantt(
    assignments: Sequence[Assignment],
    machines: Sequence[str],
    names: Optional[Mapping[tuple[int, int], str]] = None,
) -> tuple[GanttRow, ...]:
    """One row per machine; bar intervals equal assignment intervals exactly."""
    names = names or {}
    per_machine: dict[str, list[GanttBar]] = {m: [] for m in machines}
    for a in assignments:
        label = names.get(a.key, f"{a.key[0]}.{a.key[1]}")
        bar = GanttBar(
            label=label,
            start_s=a.start_s,
            end_s=a.end_s,
            status=_STATUS_CLASS[a.status],
            recipe_index=a.key[0],
            task_index=a.key[1],
        )
        if a.machine not in per_machine:
            per_machine[a.machine] = []
        per_machine[a.machine].append(bar)
    return tuple(
        GanttRow(machine=m, bars=tuple(sorted(bars, key=lambda b: (b.start_s, b.label))))
        for m, bars in per_machine.items()
    )


def render_text(rows: Sequence[GanttRow], width: int = 80) -> str:
    """Fixed-width textual chart; one line per machine."""
    horizon = max((b.end_s for r in rows for b in r.bars), default=0)
    if horizon == 0:
        return "\n".join(f"{r.machine:>16} |" for r in rows) + "\n"
    scale = width / horizon
    label_pad = max((len(r.machine) for r in rows), default=0)
    lines = []
    for row in rows:
        cells = [" "] * width
        for bar in row.bars:
            lo = min(int(bar.start_s * scale), width - 1)
            hi = max(min(int(bar.end_s * scale), width), lo + 1)
            glyph = _STATUS_GLYPH[bar.status]
            for i in range(lo, hi):
                cells[i] = glyph
        lines.append(f"{row.machine:>{label_pad}} |{''.join(cells)}|")
    lines.append(
        f"{'':>{label_pad}}  0{'':{max(width - len(str(horizon)) - 1, 0)}}{horizon}s"
    )
    return "\n".join(lines) + "\n"


def render_svg(rows: Sequence[GanttRow], width: int = 900, row_height: int = 28) -> str:
    horizon = max((b.end_s for r in rows for b in r.bars), default=1)
    label_width = 150
    chart_width = width - label_width
    scale = chart_width / max(horizon, 1)
    height = row_height * len(rows) + 30
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'font-family="sans-serif" font-size="11">',
    ]
    for i, row in enumerate(rows):
        y = 10 + i * row_height
        parts.append(
            f'<text x="4" y="{y + row_height / 2 + 4:.1f}">{row.machine}</text>'
        )
        for bar in row.bars:
            x = label_width + bar.start_s * scale
            w = max((bar.end_s - bar.start_s) * scale, 1.0)
            color = _STATUS_COLOR[bar.status]
            parts.append(
                f'<rect class="{bar.status}" x="{x:.1f}" y="{y:.1f}" '
                f'width="{w:.1f}" height="{row_height - 6}" fill="{color}">'
                f"<title>{bar.label} [{bar.start_s}, {bar.end_s}] {bar.status}</title>"
                f"</rect>"
            )
    parts.append(
        f'<text x="{label_width}" y="{height - 6}">0 .. {horizon} s</text>'
    )
    parts.append("</svg>")
    return "".join(parts)

/**
 * Pure Gantt model + SVG rendering. The model is a deterministic function
 * of the schedule snapshot so two consoles with the same state render the
 * same chart.
 */

import type { ScheduleSnapshot } from "./api.js";

export interface Bar {
  label: string;
  startS: number;
  endS: number;
  status: string;
  recipeIndex: number;
  taskIndex: number;
}

export interface Row {
  machine: string;
  bars: Bar[];
}

export interface GanttModel {
  rows: Row[];
  horizonS: number;
  clockS: number;
}

export const STATUS_COLORS: Record<string, string> = {
  pending: "#4682b4",
  running: "#e69500",
  done: "#2e8b57",
  failed: "#c0392b",
  canceled: "#9e9e9e",
};

export function buildModel(
  snapshot: ScheduleSnapshot,
  machines: string[],
): GanttModel {
  const rows = new Map<string, Bar[]>(machines.map((m) => [m, []]));
  for (const a of snapshot.assignments) {
    const bar: Bar = {
      label: a.name !== "" ? a.name : `${a.recipe_index}.${a.task_index}`,
      startS: a.start_s,
      endS: a.end_s,
      status: a.status,
      recipeIndex: a.recipe_index,
      taskIndex: a.task_index,
    };
    const bars = rows.get(a.machine);
    if (bars === undefined) {
      rows.set(a.machine, [bar]);
    } else {
      bars.push(bar);
    }
  }
  const sorted: Row[] = [...rows.entries()].map(([machine, bars]) => ({
    machine,
    bars: bars
      .slice()
      .sort((x, y) => x.startS - y.startS || x.label.localeCompare(y.label)),
  }));
  const horizonS = Math.max(
    1,
    ...sorted.flatMap((r) => r.bars.map((b) => b.endS)),
  );
  return { rows: sorted, horizonS, clockS: snapshot.clock_s };
}

const esc = (s: string): string =>
  s.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;");

export function renderSvg(
  model: GanttModel,
  width = 900,
  rowHeight = 28,
): string {
  const labelWidth = 140;
  const chartWidth = width - labelWidth;
  const scale = chartWidth / model.horizonS;
  const height = rowHeight * model.rows.length + 30;
  const parts: string[] = [
    `<svg xmlns="http://www.w3.org/2000/svg" width="${width}" ` +
      `height="${height}" font-family="sans-serif" font-size="11">`,
  ];
  model.rows.forEach((row, i) => {
    const y = 10 + i * rowHeight;
    parts.push(
      `<text x="4" y="${(y + rowHeight / 2 + 4).toFixed(1)}">` +
        `${esc(row.machine)}</text>`,
    );
    for (const bar of row.bars) {
      const x = labelWidth + bar.startS * scale;
      const w = Math.max((bar.endS - bar.startS) * scale, 1);
      const color = STATUS_COLORS[bar.status] ?? "#888888";
      parts.push(
        `<rect class="${esc(bar.status)}" x="${x.toFixed(1)}" ` +
          `y="${y.toFixed(1)}" width="${w.toFixed(1)}" ` +
          `height="${rowHeight - 6}" fill="${color}">` +
          `<title>${esc(bar.label)} [${bar.startS}, ${bar.endS}] ` +
          `${esc(bar.status)}</title></rect>`,
      );
    }
  });
  // clock line
  const clockX = labelWidth + model.clockS * scale;
  parts.push(
    `<line x1="${clockX.toFixed(1)}" y1="0" x2="${clockX.toFixed(1)}" ` +
      `y2="${height - 20}" stroke="#333" stroke-dasharray="4 3"/>`,
  );
  parts.push(
    `<text x="${labelWidth}" y="${height - 6}">0 .. ${model.horizonS} s ` +
      `(t = ${model.clockS.toFixed(0)} s)</text>`,
  );
  parts.push("</svg>");
  return parts.join("");
}

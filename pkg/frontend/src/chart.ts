// Minimal SVG line chart, rendered as a string. Points are plotted exactly
// as given; only the pixel projection is computed here.

import type { GrowthSeries } from "./viewmodel.js";

export interface ChartOptions {
  width: number;
  height: number;
  padding: number;
}

const DEFAULTS: ChartOptions = { width: 560, height: 240, padding: 36 };
const COLORS = ["#2563eb", "#dc2626", "#059669", "#d97706"];

interface Scale {
  x: (v: number) => number;
  y: (v: number) => number;
  xMax: number;
  yMax: number;
}

function makeScale(series: GrowthSeries[], opts: ChartOptions): Scale {
  const points = series.flatMap((s) => s.points);
  const xMax = Math.max(1, ...points.map((p) => p[0]));
  const yMax = Math.max(1, ...points.map((p) => p[1]));
  const innerW = opts.width - 2 * opts.padding;
  const innerH = opts.height - 2 * opts.padding;
  return {
    x: (v) => opts.padding + (v / xMax) * innerW,
    y: (v) => opts.height - opts.padding - (v / yMax) * innerH,
    xMax,
    yMax,
  };
}

export function polylinePoints(points: [number, number][], scale: Scale): string {
  return points.map(([x, y]) => `${scale.x(x).toFixed(1)},${scale.y(y).toFixed(1)}`).join(" ");
}

export function renderGrowthChart(series: GrowthSeries[], options?: Partial<ChartOptions>): string {
  const opts = { ...DEFAULTS, ...options };
  if (series.length === 0 || series.every((s) => s.points.length === 0)) {
    return `<svg class="growth-chart" width="${opts.width}" height="${opts.height}"><text x="16" y="24">no data yet</text></svg>`;
  }
  const scale = makeScale(series, opts);
  const axisY = opts.height - opts.padding;
  const parts = [
    `<svg class="growth-chart" width="${opts.width}" height="${opts.height}" viewBox="0 0 ${opts.width} ${opts.height}">`,
    `<line x1="${opts.padding}" y1="${axisY}" x2="${opts.width - opts.padding}" y2="${axisY}" class="axis"/>`,
    `<line x1="${opts.padding}" y1="${opts.padding}" x2="${opts.padding}" y2="${axisY}" class="axis"/>`,
    `<text x="${opts.width / 2}" y="${opts.height - 6}" class="axis-label">assistant turn</text>`,
    `<text x="10" y="${opts.padding - 10}" class="axis-label">tokens (max ${scale.yMax})</text>`,
  ];
  series.forEach((s, i) => {
    const color = COLORS[i % COLORS.length];
    parts.push(
      `<polyline fill="none" stroke="${color}" stroke-width="1.5" points="${polylinePoints(s.points, scale)}"/>`,
    );
    for (const [x, y] of s.points) {
      parts.push(
        `<circle cx="${scale.x(x).toFixed(1)}" cy="${scale.y(y).toFixed(1)}" r="2" fill="${color}" data-turn="${x}" data-tokens="${y}"/>`,
      );
    }
    parts.push(
      `<text x="${opts.width - opts.padding}" y="${opts.padding + 14 * (i + 1)}" text-anchor="end" fill="${color}" class="legend">${s.label}</text>`,
    );
  });
  parts.push("</svg>");
  return parts.join("");
}

/** Minimal dependency-free SVG charts (bars only; enough for usage graphs). */

import { escapeHtml } from './dom.js';

export interface BarPoint {
  label: string;
  value: number;
  secondary?: number;
}

const WIDTH = 640;
const HEIGHT = 160;
const PAD = 24;

export function barChart(points: BarPoint[], valueName = 'events'): string {
  if (points.length === 0) {
    return `<p class="empty">no activity in this range</p>`;
  }
  const max = Math.max(1, ...points.map((p) => p.value));
  const band = (WIDTH - 2 * PAD) / points.length;
  const bars = points
    .map((p, i) => {
      const h = Math.round(((HEIGHT - 2 * PAD) * p.value) / max);
      const x = PAD + i * band;
      const y = HEIGHT - PAD - h;
      const title = `${p.label}: ${p.value} ${valueName}` +
        (p.secondary !== undefined ? ` / ${p.secondary} sessions` : '');
      return (
        `<g><title>${escapeHtml(title)}</title>` +
        `<rect x="${x + 2}" y="${y}" width="${Math.max(band - 4, 2)}" height="${h}" class="bar"/>` +
        `</g>`
      );
    })
    .join('');
  const first = points[0].label;
  const last = points[points.length - 1].label;
  return (
    `<svg viewBox="0 0 ${WIDTH} ${HEIGHT}" class="chart" role="img" aria-label="activity chart">` +
    `<line x1="${PAD}" y1="${HEIGHT - PAD}" x2="${WIDTH - PAD}" y2="${HEIGHT - PAD}" class="axis"/>` +
    bars +
    `<text x="${PAD}" y="${HEIGHT - 6}" class="tick">${escapeHtml(first)}</text>` +
    `<text x="${WIDTH - PAD}" y="${HEIGHT - 6}" class="tick" text-anchor="end">${escapeHtml(last)}</text>` +
    `<text x="${PAD}" y="${PAD - 8}" class="tick">max ${max}</text>` +
    `</svg>`
  );
}

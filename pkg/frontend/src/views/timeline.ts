/** Usage over time at hour/day/week resolution. */

import { barChart } from '../charts.js';
import { escapeHtml } from '../dom.js';
import type { Timeline } from '../types.js';

const BUCKETS = ['hour', 'day', 'week'] as const;

export function renderTimeline(data: Timeline): string {
  const tabs = BUCKETS.map((b) =>
    b === data.bucket
      ? `<strong>${b}</strong>`
      : `<a href="#/timeline?bucket=${b}">${b}</a>`,
  ).join(' | ');
  const chart = barChart(
    data.points.map((p) => ({
      label: p.bucket_start.slice(0, data.bucket === 'hour' ? 13 : 10),
      value: p.event_count,
      secondary: p.session_count,
    })),
  );
  const total = data.points.reduce((acc, p) => acc + p.event_count, 0);
  return (
    `<section><h2>usage timeline</h2>` +
    `<p class="muted">bucket: ${tabs} · ${total} events in ${data.points.length} ${escapeHtml(
      data.bucket,
    )} buckets</p>` +
    chart +
    `</section>`
  );
}

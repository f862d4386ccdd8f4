/** Overview: totals, the 7-day activity chart, and the most recent sessions. */

import { barChart } from '../charts.js';
import { empty, escapeHtml, pseudonymChip, shortTime } from '../dom.js';
import type { Dashboard } from '../types.js';

function tile(label: string, value: number): string {
  return `<div class="tile"><div class="tile-value">${value}</div><div class="tile-label">${escapeHtml(label)}</div></div>`;
}

export function renderDashboard(data: Dashboard): string {
  const t = data.totals;
  const chart = barChart(
    data.timeline_7d.map((p) => ({
      label: p.bucket_start.slice(0, 10),
      value: p.event_count,
      secondary: p.session_count,
    })),
  );
  const rows = data.recent_sessions
    .map(
      (s) =>
        `<tr><td><a href="#/sessions/${escapeHtml(s.session_id)}">${escapeHtml(
          s.session_id.slice(0, 10),
        )}…</a></td><td>${pseudonymChip(s.pseudonym)}</td>` +
        `<td>${shortTime(s.started_at)}</td><td class="num">${s.event_count}</td></tr>`,
    )
    .join('');
  const recent = data.recent_sessions.length
    ? `<table class="listing"><thead><tr><th>session</th><th>learner</th><th>started</th><th>events</th></tr></thead><tbody>${rows}</tbody></table>`
    : empty('no sessions yet');
  return (
    `<section class="dashboard">` +
    `<h2>${escapeHtml(data.activity_id)}: overview</h2>` +
    `<div class="tiles">` +
    tile('learners', t.users) +
    tile('sessions', t.sessions) +
    tile('events', t.events) +
    tile('help requests', t.help_requests) +
    `</div>` +
    `<h3>last 7 days</h3>${chart}` +
    `<h3>recent sessions</h3>${recent}` +
    `</section>`
  );
}

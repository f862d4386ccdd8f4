/** Paged session listing, optionally filtered to one pseudonym. */

import { empty, escapeHtml, pseudonymChip, shortTime } from '../dom.js';
import type { SessionList } from '../types.js';

export function renderSessions(data: SessionList, pseudonym?: string): string {
  const heading = pseudonym
    ? `sessions of ${pseudonymChip(pseudonym)}`
    : 'recent sessions';
  if (data.sessions.length === 0) {
    return `<section><h2>${heading}</h2>${empty('nothing here')}</section>`;
  }
  const rows = data.sessions
    .map(
      (s) =>
        `<tr><td><a href="#/sessions/${escapeHtml(s.session_id)}">${escapeHtml(
          s.session_id.slice(0, 12),
        )}…</a></td>` +
        `<td>${pseudonymChip(s.pseudonym)}</td><td>${shortTime(s.started_at)}</td>` +
        `<td class="num">${s.event_count}</td></tr>`,
    )
    .join('');
  const limit = data.limit ?? data.sessions.length;
  const prev =
    data.offset > 0
      ? `<a href="#/sessions?offset=${Math.max(0, data.offset - limit)}${pseudonym ? `&pseudonym=${pseudonym}` : ''}">&laquo; newer</a>`
    : '';
  const next =
    data.sessions.length === limit
      ? `<a href="#/sessions?offset=${data.offset + limit}${pseudonym ? `&pseudonym=${pseudonym}` : ''}">older &raquo;</a>`
      : '';
  return (
    `<section><h2>${heading}</h2>` +
    `<table class="listing"><thead><tr><th>session</th><th>learner</th><th>started</th><th>events</th></tr></thead>` +
    `<tbody>${rows}</tbody></table>` +
    `<nav class="pager">${prev} ${next}</nav></section>`
  );
}

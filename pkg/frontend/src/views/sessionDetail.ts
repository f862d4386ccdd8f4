/** Chronological session replay; honors the until= deep links from
 * help-request emails exactly. */

import { empty, escapeHtml, pseudonymChip, shortTime } from '../dom.js';
import type { SessionView } from '../types.js';
import { renderItems } from './items.js';

export function renderSessionDetail(data: SessionView): string {
  const truncated =
    data.until !== null && data.until !== undefined
      ? `<p class="notice">showing the session up to event #${data.until}, the moment of the request. ` +
        `<a href="#/sessions/${escapeHtml(data.session_id)}">show the full session</a></p>`
      : '';
  const items = data.items.length ? renderItems(data.items) : empty('no events in this session');
  return (
    `<section class="session-detail">` +
    `<h2>session of ${pseudonymChip(data.pseudonym)}</h2>` +
    `<p class="muted">started ${shortTime(data.started_at)} · ${escapeHtml(
      data.activity_id,
    )} · ${data.items.length} events shown</p>` +
    truncated +
    items +
    `</section>`
  );
}

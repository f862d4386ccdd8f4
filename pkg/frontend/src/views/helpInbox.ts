/** Help requests with deep links into the session prefix that led to each
 * request. "Answered" marks live only in this browser. */

import { empty, escapeHtml, pseudonymChip, shortTime } from '../dom.js';
import { answeredKey } from '../state.js';
import type { EventList } from '../types.js';

export function renderHelpInbox(data: EventList, answered: Set<string>): string {
  if (data.events.length === 0) {
    return `<section><h2>help requests</h2>${empty('no help requests yet')}</section>`;
  }
  const cards = [...data.events]
    .reverse() // newest first
    .map((ev) => {
      const key = answeredKey(ev.session_id, ev.seq);
      const done = answered.has(key);
      const question = escapeHtml(ev.payload['question_text'] ?? '(no question text)');
      return (
        `<article class="inbox-card ${done ? 'answered' : ''}">` +
        `<header>${pseudonymChip(ev.pseudonym)} · <time>${shortTime(ev.server_timestamp)}</time>` +
        (ev.exercise ? ` · <span class="exercise">${escapeHtml(ev.exercise)}</span>` : '') +
        `</header>` +
        `<p class="question">${question}</p>` +
        `<footer>` +
        `<a href="#/sessions/${escapeHtml(ev.session_id)}?until=${ev.seq}">view session up to this request</a>` +
        ` <button class="mark-answered" data-key="${escapeHtml(key)}">` +
        (done ? 'answered ✓ (click to undo)' : 'mark answered') +
        `</button>` +
        `</footer></article>`
      );
    })
    .join('');
  return `<section><h2>help requests</h2><div class="inbox">${cards}</div></section>`;
}

/** The learner's own log, rendered exactly like the teacher's session view
 * (transparency: you see what they see). */

import { empty, pseudonymChip, shortTime } from '../dom.js';
import type { SessionView } from '../types.js';
import { renderItems } from './items.js';

export function renderMylog(data: SessionView): string {
  const items = data.items.length
    ? renderItems(data.items)
    : empty('nothing was recorded in this session');
  return (
    `<section class="mylog">` +
    `<h2>my log</h2>` +
    `<p class="muted">this is everything the logging service stored about this session, ` +
    `shown in the same format a teacher would see it. you appear as ${pseudonymChip(
      data.pseudonym,
    )}.</p>` +
    `<p class="muted">session started ${shortTime(data.started_at)} · ${data.items.length} events</p>` +
    items +
    `</section>`
  );
}

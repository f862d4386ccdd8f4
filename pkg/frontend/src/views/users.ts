/** Learner list: pseudonyms only, most recently active first. */

import { empty, pseudonymChip, shortTime } from '../dom.js';
import type { UserList } from '../types.js';

export function renderUsers(data: UserList): string {
  if (data.users.length === 0) {
    return `<section><h2>learners</h2>${empty('no learners yet')}</section>`;
  }
  const rows = data.users
    .map(
      (u) =>
        `<tr><td><a href="#/sessions?pseudonym=${u.pseudonym}">${pseudonymChip(u.pseudonym)}</a></td>` +
        `<td class="num">${u.session_count}</td><td>${shortTime(u.last_active)}</td></tr>`,
    )
    .join('');
  return (
    `<section><h2>learners</h2>` +
    `<table class="listing"><thead><tr><th>pseudonym</th><th>sessions</th><th>last active</th></tr></thead>` +
    `<tbody>${rows}</tbody></table></section>`
  );
}

/** Small HTML-building helpers shared by all views. */

export function escapeHtml(value: unknown): string {
  return String(value)
    .replace(/&/g, '&amp;')
    .replace(/</g, '&lt;')
    .replace(/>/g, '&gt;')
    .replace(/"/g, '&quot;');
}

/** "2012-01-15T10:00:00.000Z" -> "2012-01-15 10:00" (display only). */
export function shortTime(iso: string): string {
  const m = iso.match(/^(\d{4}-\d{2}-\d{2})T(\d{2}:\d{2})/);
  return m ? `${m[1]} ${m[2]}` : iso;
}

export function pseudonymChip(digits: string): string {
  return `<span class="pseudonym" title="learner pseudonym">${escapeHtml(digits)}</span>`;
}

export function empty(message: string): string {
  return `<p class="empty">${escapeHtml(message)}</p>`;
}

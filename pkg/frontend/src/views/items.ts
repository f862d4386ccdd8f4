/** Per-type rendering of session items: text lines for actions, cards for
 * questions and feedback, inline images, and a field table for anything the
 * console has no special renderer for. */

import { escapeHtml, shortTime } from '../dom.js';
import type { BlobRef, RenderedItem } from '../types.js';

function isBlobRef(value: unknown): value is BlobRef {
  return (
    typeof value === 'object' &&
    value !== null &&
    typeof (value as BlobRef).href === 'string' &&
    typeof (value as BlobRef).media === 'string'
  );
}

function renderValue(value: unknown): string {
  if (value === null || value === undefined) {
    return '<span class="muted">(empty)</span>';
  }
  if (isBlobRef(value)) {
    if (value.media.startsWith('image/')) {
      return `<img class="inline-image" src="${escapeHtml(value.href)}" alt="logged image (${value.bytes} bytes)"/>`;
    }
    return `<a href="${escapeHtml(value.href)}">download (${escapeHtml(value.media)}, ${value.bytes} bytes)</a>`;
  }
  if (Array.isArray(value)) {
    const rows = value
      .map((entry) => {
        const pair = entry as { key?: unknown; value?: unknown };
        return `<li><code>${escapeHtml(pair.key)}</code>: ${renderValue(pair.value)}</li>`;
      })
      .join('');
    return `<ul class="kvlist">${rows}</ul>`;
  }
  return escapeHtml(value);
}

function verdictBadge(verdict: string): string {
  const cls = verdict === 'success' ? 'ok' : verdict === 'failure' ? 'bad' : 'mid';
  return `<span class="badge ${cls}">${escapeHtml(verdict || 'feedback')}</span>`;
}

function body(item: RenderedItem): string {
  const p = item.payload;
  switch (item.renderer_id) {
    case 'text_line':
      return `<span class="action-text">${escapeHtml(p.text)}</span>`;
    case 'question_card':
      return `<div class="card question"><strong>Question</strong><p>${escapeHtml(p.question_text)}</p></div>`;
    case 'image_card':
      return `<div class="card image">${renderValue(p.image)}</div>`;
    case 'feedback_card':
      return `<div class="card feedback">${verdictBadge(String(p.verdict))} ${escapeHtml(p.message)}</div>`;
    case 'help_request_card': {
      const reply = p.learner_email
        ? `<div class="muted">reply address: ${escapeHtml(p.learner_email)}</div>`
        : '';
      const snapshot = p.snapshot ? `<div>${renderValue(p.snapshot)}</div>` : '';
      return (
        `<div class="card help"><strong>Help request</strong>` +
        `<p>${escapeHtml(p.question_text)}</p>${reply}${snapshot}</div>`
      );
    }
    default: {
      const fields = (p.fields ?? []) as { name: string; kind: string; value: unknown }[];
      const rows = fields
        .map(
          (f) =>
            `<tr><td><code>${escapeHtml(f.name)}</code></td>` +
            `<td class="muted">${escapeHtml(f.kind)}</td><td>${renderValue(f.value)}</td></tr>`,
        )
        .join('');
      return (
        `<div class="card generic"><span class="muted">${escapeHtml(String(p.event_type ?? ''))}</span>` +
        `<table class="fields">${rows}</table></div>`
      );
    }
  }
}

export function renderItem(item: RenderedItem): string {
  const exercise = item.exercise
    ? `<span class="exercise">${escapeHtml(item.exercise)}</span>`
    : '';
  return (
    `<li class="item ${item.renderer_id}" data-seq="${item.seq}">` +
    `<span class="seq">#${item.seq}</span>` +
    `<time>${shortTime(item.server_timestamp)}</time>${exercise}` +
    body(item) +
    `</li>`
  );
}

export function renderItems(items: RenderedItem[]): string {
  return `<ol class="session-items">${items.map(renderItem).join('')}</ol>`;
}

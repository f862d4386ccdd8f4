/** Progress grid: one row per pseudonym, one column per exercise, cells
 * colored by status. Clicking a column header sorts by that column. */

import { empty, escapeHtml, pseudonymChip } from '../dom.js';
import type { CellStatus, ExerciseMatrix } from '../types.js';

const STATUS_LABEL: Record<CellStatus, string> = {
  no_attempt: '·',
  attempted: '~',
  failed: '✗',
  succeeded: '✓',
};

const STATUS_RANK: Record<CellStatus, number> = {
  succeeded: 3,
  failed: 2,
  attempted: 1,
  no_attempt: 0,
};

export function sortMatrix(data: ExerciseMatrix, column: number): ExerciseMatrix {
  if (column < 0 || column >= data.columns.length) {
    return data;
  }
  const rows = [...data.rows].sort(
    (a, b) =>
      STATUS_RANK[b.cells[column]] - STATUS_RANK[a.cells[column]] ||
      a.pseudonym.localeCompare(b.pseudonym),
  );
  return { ...data, rows };
}

export function renderExerciseMatrix(data: ExerciseMatrix, sortColumn = -1): string {
  if (data.rows.length === 0) {
    return `<section><h2>exercise progress</h2>${empty('no attempts recorded yet')}</section>`;
  }
  const table = sortColumn >= 0 ? sortMatrix(data, sortColumn) : data;
  const head = table.columns
    .map(
      (c, i) =>
        `<th class="${i === sortColumn ? 'sorted' : ''}"><a href="#/matrix?sort=${i}" title="sort by ${escapeHtml(c)}">${escapeHtml(c)}</a></th>`,
    )
    .join('');
  const rows = table.rows
    .map((row) => {
      const cells = row.cells
        .map(
          (status) =>
            `<td class="cell ${status}" title="${status.replace('_', ' ')}">${STATUS_LABEL[status]}</td>`,
        )
        .join('');
      return `<tr><th>${pseudonymChip(row.pseudonym)}</th>${cells}</tr>`;
    })
    .join('');
  return (
    `<section><h2>exercise progress</h2>` +
    `<p class="muted legend">✓ succeeded · ✗ failed · ~ attempted · &nbsp;·&nbsp; no attempt</p>` +
    `<div class="matrix-scroll"><table class="matrix">` +
    `<thead><tr><th>learner</th>${head}</tr></thead><tbody>${rows}</tbody></table></div>` +
    `</section>`
  );
}

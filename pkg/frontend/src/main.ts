/** Console bootstrap: settings form, hash routing, view fetch + render. */

import {
  ApiError,
  Ctx,
  fetchDashboard,
  fetchExerciseMatrix,
  fetchHelpRequests,
  fetchMylog,
  fetchSessionDetail,
  fetchSessions,
  fetchTimeline,
  fetchUsers,
} from './api.js';
import { escapeHtml } from './dom.js';
import { NAV_ITEMS, parseRoute, Route } from './router.js';
import { loadAnswered, loadSettings, saveAnswered, saveSettings } from './state.js';
import { renderDashboard } from './views/dashboard.js';
import { renderExerciseMatrix } from './views/exerciseMatrix.js';
import { renderHelpInbox } from './views/helpInbox.js';
import { renderMylog } from './views/mylog.js';
import { renderSessionDetail } from './views/sessionDetail.js';
import { renderSessions } from './views/sessions.js';
import { renderTimeline } from './views/timeline.js';
import { renderUsers } from './views/users.js';

const view = () => document.getElementById('view')!;

function renderError(err: unknown): string {
  if (err instanceof ApiError && (err.status === 401 || err.status === 403)) {
    return `<p class="error">not authorized (${escapeHtml(err.code)}); check the activity id and teacher token above.</p>`;
  }
  return `<p class="error">request failed: ${escapeHtml(String(err))}</p>`;
}

async function show(route: Route): Promise<void> {
  const settings = loadSettings();
  const ctx: Ctx = { activity: settings.activity, token: settings.token };
  if (route.name !== 'mylog' && (!ctx.activity || !ctx.token)) {
    view().innerHTML =
      `<p class="notice">enter the activity id and your teacher token above to begin.</p>`;
    return;
  }
  try {
    switch (route.name) {
      case 'dashboard':
        view().innerHTML = renderDashboard(await fetchDashboard(ctx));
        break;
      case 'users':
        view().innerHTML = renderUsers(await fetchUsers(ctx));
        break;
      case 'sessions':
        view().innerHTML = renderSessions(
          await fetchSessions(ctx, route.pseudonym, route.offset),
          route.pseudonym,
        );
        break;
      case 'session-detail':
        view().innerHTML = renderSessionDetail(
          await fetchSessionDetail(ctx, route.sessionId, route.until),
        );
        break;
      case 'matrix':
        view().innerHTML = renderExerciseMatrix(await fetchExerciseMatrix(ctx), route.sort);
        break;
      case 'timeline':
        view().innerHTML = renderTimeline(await fetchTimeline(ctx, route.bucket));
        break;
      case 'help-inbox':
        view().innerHTML = renderHelpInbox(await fetchHelpRequests(ctx), loadAnswered());
        break;
      case 'mylog':
        view().innerHTML = renderMylog(await fetchMylog(route.token, route.until));
        break;
    }
  } catch (err) {
    view().innerHTML = renderError(err);
  }
}

function highlightNav(hash: string): void {
  const nav = document.getElementById('nav')!;
  nav.innerHTML = NAV_ITEMS.map((item) => {
    const active = hash.startsWith(item.route) || (item.route === '#/dashboard' && hash.length <= 2);
    return `<a href="${item.route}" class="${active ? 'active' : ''}">${item.label}</a>`;
  }).join('');
}

function bindSettingsForm(): void {
  const activity = document.getElementById('activity') as HTMLInputElement;
  const token = document.getElementById('token') as HTMLInputElement;
  const settings = loadSettings();
  activity.value = settings.activity;
  token.value = settings.token;
  const apply = () => {
    saveSettings({ activity: activity.value.trim(), token: token.value.trim() });
    void show(parseRoute(location.hash));
  };
  document.getElementById('apply')!.addEventListener('click', apply);
  token.addEventListener('keydown', (ev) => {
    if (ev.key === 'Enter') {
      apply();
    }
  });
}

function bindInboxClicks(): void {
  document.addEventListener('click', (ev) => {
    const target = ev.target as HTMLElement;
    if (!target.classList.contains('mark-answered')) {
      return;
    }
    const key = target.dataset.key!;
    const answered = loadAnswered();
    if (answered.has(key)) {
      answered.delete(key);
    } else {
      answered.add(key);
    }
    saveAnswered(answered);
    void show(parseRoute(location.hash));
  });
}

function onRoute(): void {
  highlightNav(location.hash);
  void show(parseRoute(location.hash));
}

export function boot(): void {
  bindSettingsForm();
  bindInboxClicks();
  window.addEventListener('hashchange', onRoute);
  onRoute();
}

boot();

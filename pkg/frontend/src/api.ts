/** Thin client for the JSON read API; same origin as the served assets. */

import type {
  Dashboard,
  EventList,
  ExerciseMatrix,
  SessionList,
  SessionView,
  Timeline,
  UserList,
} from './types.js';

export class ApiError extends Error {
  constructor(public status: number, public code: string) {
    super(`${status}: ${code}`);
  }
}

async function getJson<T>(path: string, token?: string): Promise<T> {
  const headers: Record<string, string> = {};
  if (token) {
    headers['Authorization'] = `Bearer ${token}`;
  }
  const resp = await fetch(path, { headers });
  const body = await resp.json().catch(() => ({}));
  if (!resp.ok) {
    throw new ApiError(resp.status, (body as { error?: string }).error ?? 'request_failed');
  }
  return body as T;
}

export interface Ctx {
  activity: string;
  token: string;
}

const base = (ctx: Ctx) => `/activities/${encodeURIComponent(ctx.activity)}`;

export const fetchDashboard = (ctx: Ctx) =>
  getJson<Dashboard>(`${base(ctx)}/dashboard`, ctx.token);

export const fetchUsers = (ctx: Ctx) => getJson<UserList>(`${base(ctx)}/users`, ctx.token);

export const fetchSessions = (ctx: Ctx, pseudonym?: string, offset = 0, limit = 50) => {
  const params = new URLSearchParams({ offset: String(offset), limit: String(limit) });
  if (pseudonym) {
    params.set('pseudonym', pseudonym);
  }
  return getJson<SessionList>(`${base(ctx)}/sessions?${params}`, ctx.token);
};

export const fetchSessionDetail = (ctx: Ctx, sessionId: string, until?: number) => {
  const suffix = until !== undefined ? `?until=${until}` : '';
  return getJson<SessionView>(
    `${base(ctx)}/sessions/${encodeURIComponent(sessionId)}${suffix}`,
    ctx.token,
  );
};

export const fetchExerciseMatrix = (ctx: Ctx) =>
  getJson<ExerciseMatrix>(`${base(ctx)}/summary/exercises`, ctx.token);

export const fetchTimeline = (ctx: Ctx, bucket: string) =>
  getJson<Timeline>(`${base(ctx)}/summary/timeline?bucket=${bucket}`, ctx.token);

export const fetchHelpRequests = (ctx: Ctx) =>
  getJson<EventList>(`${base(ctx)}/events?type=helprequest`, ctx.token);

export const fetchMylog = (sessionToken: string, until?: number) => {
  const suffix = until !== undefined ? `?until=${until}` : '';
  return getJson<SessionView>(`/mylog/${encodeURIComponent(sessionToken)}${suffix}`);
};

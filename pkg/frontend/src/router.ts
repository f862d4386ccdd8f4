/** Hash router; routes mirror the read API one-to-one. */

export type Route =
  | { name: 'dashboard' }
  | { name: 'users' }
  | { name: 'sessions'; pseudonym?: string; offset: number }
  | { name: 'session-detail'; sessionId: string; until?: number }
  | { name: 'matrix'; sort: number }
  | { name: 'timeline'; bucket: 'hour' | 'day' | 'week' }
  | { name: 'help-inbox' }
  | { name: 'mylog'; token: string; until?: number };

export function parseRoute(hash: string): Route {
  const raw = hash.replace(/^#\/?/, '');
  const [pathPart, queryPart] = raw.split('?');
  const params = new URLSearchParams(queryPart ?? '');
  const segments = pathPart.split('/').filter(Boolean);

  const intOrUndefined = (name: string): number | undefined => {
    const value = params.get(name);
    if (value === null || value === '' || Number.isNaN(Number(value))) {
      return undefined;
    }
    return Number(value);
  };

  switch (segments[0] ?? '') {
    case '':
    case 'dashboard':
      return { name: 'dashboard' };
    case 'users':
      return { name: 'users' };
    case 'sessions':
      if (segments[1]) {
        return {
          name: 'session-detail',
          sessionId: segments[1],
          until: intOrUndefined('until'),
        };
      }
      return {
        name: 'sessions',
        pseudonym: params.get('pseudonym') ?? undefined,
        offset: intOrUndefined('offset') ?? 0,
      };
    case 'matrix':
      return { name: 'matrix', sort: intOrUndefined('sort') ?? -1 };
    case 'timeline': {
      const bucket = params.get('bucket');
      return {
        name: 'timeline',
        bucket: bucket === 'hour' || bucket === 'week' ? bucket : 'day',
      };
    }
    case 'help':
      return { name: 'help-inbox' };
    case 'mylog':
      return { name: 'mylog', token: segments[1] ?? '', until: intOrUndefined('until') };
    default:
      return { name: 'dashboard' };
  }
}

export const NAV_ITEMS: { route: string; label: string }[] = [
  { route: '#/dashboard', label: 'dashboard' },
  { route: '#/users', label: 'learners' },
  { route: '#/sessions', label: 'sessions' },
  { route: '#/matrix', label: 'exercise matrix' },
  { route: '#/timeline', label: 'timeline' },
  { route: '#/help', label: 'help inbox' },
];

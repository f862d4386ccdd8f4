/** Client-side settings and the local-only "answered" flags for the help
 * inbox. No learner data is persisted here beyond the myLog session token the
 * learner themselves pasted. */

const SETTINGS_KEY = 'learnlog-console-settings';
const ANSWERED_KEY = 'learnlog-answered';

export interface Settings {
  activity: string;
  token: string;
}

export function loadSettings(): Settings {
  try {
    const raw = localStorage.getItem(SETTINGS_KEY);
    if (raw) {
      const parsed = JSON.parse(raw);
      return { activity: parsed.activity ?? '', token: parsed.token ?? '' };
    }
  } catch {
    /* fresh start */
  }
  return { activity: '', token: '' };
}

export function saveSettings(settings: Settings): void {
  localStorage.setItem(SETTINGS_KEY, JSON.stringify(settings));
}

export function answeredKey(sessionId: string, seq: number): string {
  return `${sessionId}:${seq}`;
}

export function loadAnswered(): Set<string> {
  try {
    const raw = localStorage.getItem(ANSWERED_KEY);
    if (raw) {
      return new Set(JSON.parse(raw));
    }
  } catch {
    /* ignore */
  }
  return new Set();
}

export function saveAnswered(answered: Set<string>): void {
  localStorage.setItem(ANSWERED_KEY, JSON.stringify([...answered]));
}

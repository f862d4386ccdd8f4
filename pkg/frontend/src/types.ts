/** Shapes of the JSON read API (see docs/api.md). */

export interface Totals {
  users: number;
  sessions: number;
  events: number;
  help_requests: number;
}

export interface SessionRow {
  session_id: string;
  pseudonym: string;
  started_at: string;
  event_count: number;
}

export interface TimelinePoint {
  bucket_start: string;
  event_count: number;
  session_count: number;
}

export interface Dashboard {
  activity_id: string;
  totals: Totals;
  recent_sessions: SessionRow[];
  timeline_7d: TimelinePoint[];
}

export interface UserRow {
  pseudonym: string;
  session_count: number;
  last_active: string;
}

export interface UserList {
  activity_id: string;
  users: UserRow[];
}

export interface SessionList {
  activity_id: string;
  offset: number;
  limit: number | null;
  sessions: SessionRow[];
}

export interface BlobRef {
  media: string;
  bytes: number;
  href: string;
}

export type RendererId =
  | 'text_line'
  | 'question_card'
  | 'image_card'
  | 'feedback_card'
  | 'help_request_card'
  | 'generic_field_table';

export interface RenderedItem {
  seq: number;
  server_timestamp: string;
  exercise: string;
  renderer_id: RendererId;
  payload: Record<string, unknown>;
}

export interface SessionView {
  session_id: string;
  activity_id: string;
  pseudonym: string;
  started_at: string;
  until: number | null;
  items: RenderedItem[];
}

export type CellStatus = 'no_attempt' | 'attempted' | 'failed' | 'succeeded';

export interface ExerciseMatrix {
  activity_id: string;
  columns: string[];
  rows: { pseudonym: string; cells: CellStatus[] }[];
}

export interface Timeline {
  activity_id: string;
  bucket: 'hour' | 'day' | 'week';
  points: TimelinePoint[];
}

export interface EventListItem {
  session_id: string;
  seq: number;
  server_timestamp: string;
  event_type: string;
  exercise: string;
  pseudonym: string;
  payload: Record<string, unknown>;
}

export interface EventList {
  activity_id: string;
  type: string;
  events: EventListItem[];
}

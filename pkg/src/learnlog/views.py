"""Teacher-facing view models assembled from store queries.

Every builder is a pure function over a store snapshot and returns JSON-ready
structures (timestamps as canonical strings, blobs as download locators).
View models never contain a user reference, an un-redacted learner email, or
any field listed in an event's redactions.
"""

from __future__ import annotations

from dataclasses import dataclass
from datetime import datetime, timedelta

from .auth import ActivityConfig
from .events import FieldValue, StoredEvent, match_type
from .store import EventStore, SessionRow, TimelineBucket
from .timefmt import format_instant

REDACTED = "(redacted)"

TEXT_LINE = "text_line"
QUESTION_CARD = "question_card"
IMAGE_CARD = "image_card"
FEEDBACK_CARD = "feedback_card"
HELP_REQUEST_CARD = "help_request_card"
GENERIC_FIELD_TABLE = "generic_field_table"

NO_ATTEMPT = "no_attempt"
ATTEMPTED = "attempted"
SUCCEEDED = "succeeded"
FAILED = "failed"


@dataclass(frozen=True)
class RendererDescriptor:
    """Maps an event type pattern to a payload shape; most specific (longest)
    matching pattern wins, ties broken by registration order."""

    renderer_id: str
    applies_to: str


DEFAULT_RENDERERS: tuple[RendererDescriptor, ...] = (
    RendererDescriptor(TEXT_LINE, "action.*"),
    RendererDescriptor(QUESTION_CARD, "question.*"),
    RendererDescriptor(IMAGE_CARD, "image.*"),
    RendererDescriptor(FEEDBACK_CARD, "feedback.*"),
    RendererDescriptor(HELP_REQUEST_CARD, "helprequest.*"),
)


def resolve_renderer(
    event_type: str, registry: tuple[RendererDescriptor, ...] = DEFAULT_RENDERERS
) -> str:
    best: RendererDescriptor | None = None
    for descriptor in registry:
        if not match_type(event_type, descriptor.applies_to):
            continue
        if best is None or len(descriptor.applies_to) > len(best.applies_to):
            best = descriptor
    return best.renderer_id if best is not None else GENERIC_FIELD_TABLE


@dataclass(frozen=True)
class RenderedItem:
    seq: int
    server_timestamp: str
    exercise: str
    renderer_id: str
    payload: dict

    def as_dict(self) -> dict:
        return {
            "seq": self.seq,
            "server_timestamp": self.server_timestamp,
            "exercise": self.exercise,
            "renderer_id": self.renderer_id,
            "payload": self.payload,
        }


@dataclass(frozen=True)
class SessionViewModel:
    session_id: str
    activity_id: str
    pseudonym: str
    started_at: str
    until: int | None
    items: tuple[RenderedItem, ...]

    def as_dict(self) -> dict:
        return {
            "session_id": self.session_id,
            "activity_id": self.activity_id,
            "pseudonym": self.pseudonym,
            "started_at": self.started_at,
            "until": self.until,
            "items": [item.as_dict() for item in self.items],
        }


@dataclass(frozen=True)
class DashboardModel:
    activity_id: str
    totals: dict
    recent_sessions: tuple[SessionRow, ...]
    timeline_7d: tuple[TimelineBucket, ...]

    def as_dict(self) -> dict:
        return {
            "activity_id": self.activity_id,
            "totals": dict(self.totals),
            "recent_sessions": [session_row_dict(row) for row in self.recent_sessions],
            "timeline_7d": [timeline_bucket_dict(b) for b in self.timeline_7d],
        }


@dataclass(frozen=True)
class ExerciseTable:
    activity_id: str
    columns: tuple[str, ...]
    rows: tuple[tuple[str, tuple[str, ...]], ...]  # (pseudonym, cell statuses)

    def as_dict(self) -> dict:
        return {
            "activity_id": self.activity_id,
            "columns": list(self.columns),
            "rows": [
                {"pseudonym": pseudonym, "cells": list(cells)}
                for pseudonym, cells in self.rows
            ],
        }


def session_row_dict(row: SessionRow) -> dict:
    return {
        "session_id": row.session_id,
        "pseudonym": row.pseudonym,
        "started_at": format_instant(row.started_at),
        "event_count": row.event_count,
    }


def timeline_bucket_dict(bucket: TimelineBucket) -> dict:
    return {
        "bucket_start": format_instant(bucket.bucket_start),
        "event_count": bucket.event_count,
        "session_count": bucket.session_count,
    }


def _blob_href(stored: StoredEvent, activity_id: str, name: str) -> str:
    return (
        f"/activities/{activity_id}/sessions/{stored.session_id}"
        f"/blobs/{stored.seq}/{name}"
    )


def render_value(fv: FieldValue, stored: StoredEvent, activity_id: str, name: str):
    """JSON-safe rendering of a field value; blob bytes become download locators."""
    if fv.kind == "string":
        return fv.value
    if fv.kind == "number":
        return fv.value
    if fv.kind == "date":
        return format_instant(fv.value)
    if fv.kind == "blob":
        return {
            "media": fv.media,
            "bytes": len(fv.value),
            "href": _blob_href(stored, activity_id, name),
        }
    return [
        {"key": key, "value": render_value(sub, stored, activity_id, name)}
        for key, sub in fv.value
    ]


def _text_or_redacted(stored: StoredEvent, name: str):
    if name in stored.redactions:
        return REDACTED
    fv = stored.envelope.field_value(name)
    if fv is None:
        return None
    if fv.kind == "string":
        return fv.value
    return None


def _render_payload(stored: StoredEvent, renderer_id: str, activity_id: str) -> dict:
    env = stored.envelope
    if renderer_id == TEXT_LINE:
        return {"text": _text_or_redacted(stored, "action_name") or ""}
    if renderer_id == QUESTION_CARD:
        return {"question_text": _text_or_redacted(stored, "question_text") or ""}
    if renderer_id == IMAGE_CARD:
        if "image" in stored.redactions:
            return {"image": REDACTED}
        fv = env.field_value("image")
        image = render_value(fv, stored, activity_id, "image") if fv is not None else None
        return {"image": image}
    if renderer_id == FEEDBACK_CARD:
        return {
            "verdict": _text_or_redacted(stored, "verdict") or "",
            "message": _text_or_redacted(stored, "message") or "",
        }
    if renderer_id == HELP_REQUEST_CARD:
        payload = {
            "question_text": _text_or_redacted(stored, "question_text") or "",
            "learner_email": _text_or_redacted(stored, "learner_email"),
        }
        snapshot = env.field_value("snapshot")
        if "snapshot" in stored.redactions:
            payload["snapshot"] = REDACTED
        elif snapshot is not None:
            payload["snapshot"] = render_value(snapshot, stored, activity_id, "snapshot")
        return payload
    rows = [
        {"name": name, "kind": fv.kind, "value": render_value(fv, stored, activity_id, name)}
        for name, fv in env.fields
    ]
    rows.extend(
        {"name": name, "kind": "redacted", "value": REDACTED}
        for name in stored.redactions
        if env.field_value(name) is None
    )
    return {"event_type": env.event_type, "fields": rows}


def render_item(
    stored: StoredEvent,
    activity_id: str,
    registry: tuple[RendererDescriptor, ...] = DEFAULT_RENDERERS,
) -> RenderedItem:
    renderer_id = resolve_renderer(stored.envelope.event_type, registry)
    return RenderedItem(
        seq=stored.seq,
        server_timestamp=format_instant(stored.server_timestamp),
        exercise=stored.envelope.exercise,
        renderer_id=renderer_id,
        payload=_render_payload(stored, renderer_id, activity_id),
    )


def build_session_view(
    store: EventStore,
    session_id: str,
    until: int | None = None,
    registry: tuple[RendererDescriptor, ...] = DEFAULT_RENDERERS,
) -> SessionViewModel:
    """Chronological rendering of one session, truncated at `until` when given.
    Caller must have authorized the viewer (teacher of the activity, or the
    session's own token)."""
    session = store.get_session(session_id)
    events = store.session_events(session_id, until)
    items = tuple(render_item(ev, session.activity_id, registry) for ev in events)
    return SessionViewModel(
        session_id=session.session_id,
        activity_id=session.activity_id,
        pseudonym=session.pseudonym.digits,
        started_at=format_instant(session.started_at),
        until=until,
        items=items,
    )


def cell_status(attempts: int, successes: int, failures: int) -> str:
    """One status per cell: success ever recorded dominates, then failure,
    then bare attempts."""
    if successes >= 1:
        return SUCCEEDED
    if failures >= 1:
        return FAILED
    if attempts >= 1:
        return ATTEMPTED
    return NO_ATTEMPT


def build_exercise_table(
    store: EventStore, activity_id: str, cfg: ActivityConfig
) -> ExerciseTable:
    """Progress grid: rows are pseudonyms, columns follow the configured
    exercise order with unseen exercises appended alphabetically."""
    stats = store.exercise_stats(activity_id)
    configured = list(cfg.exercise_order)
    seen = {exercise for (_, exercise) in stats}
    columns = configured + sorted(seen - set(configured))
    pseudonyms = sorted({pseudonym for (pseudonym, _) in stats})
    rows = []
    for pseudonym in pseudonyms:
        cells = []
        for exercise in columns:
            cell = stats.get((pseudonym, exercise))
            if cell is None:
                cells.append(NO_ATTEMPT)
            else:
                cells.append(cell_status(cell.attempts, cell.successes, cell.failures))
        rows.append((pseudonym, tuple(cells)))
    return ExerciseTable(activity_id=activity_id, columns=tuple(columns), rows=tuple(rows))


def build_dashboard(store: EventStore, activity_id: str, now: datetime) -> DashboardModel:
    """Overview of recent activity: totals, the last 20 sessions, and a 7-day
    daily timeline (zero-filled)."""
    totals = store.activity_totals(activity_id)
    recent = tuple(store.list_sessions(activity_id, offset=0, limit=20))
    window_start = (now - timedelta(days=6)).replace(
        hour=0, minute=0, second=0, microsecond=0
    )
    raw = {b.bucket_start: b for b in store.timeline(activity_id, "day", start=window_start)}
    days = []
    for offset in range(7):
        day = window_start + timedelta(days=offset)
        bucket = raw.get(day)
        days.append(bucket if bucket is not None else TimelineBucket(day, 0, 0))
    return DashboardModel(
        activity_id=activity_id,
        totals=totals,
        recent_sessions=recent,
        timeline_7d=tuple(days),
    )


def event_list_dict(store: EventStore, stored: StoredEvent, activity_id: str) -> dict:
    """Row shape for the events-by-type listing (help inbox and similar views)."""
    session = store.get_session(stored.session_id)
    return {
        "session_id": stored.session_id,
        "seq": stored.seq,
        "server_timestamp": format_instant(stored.server_timestamp),
        "event_type": stored.envelope.event_type,
        "exercise": stored.envelope.exercise,
        "pseudonym": session.pseudonym.digits,
        "payload": _render_payload(
            stored, resolve_renderer(stored.envelope.event_type), activity_id
        ),
    }

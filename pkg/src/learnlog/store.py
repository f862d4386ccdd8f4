"""Durable ordered event persistence with aggregate queries and export/import.

Two backends share one implementation: pure in-memory, and a single append-only
log file that is fsync'd before an append is acknowledged and replayed on open.
Aggregate queries run over compact per-event index rows and incrementally
maintained counters; they never deserialize stored payloads.
"""

from __future__ import annotations

import json
import os
import threading
from dataclasses import dataclass, field
from datetime import datetime, timedelta

from . import wire
from .auth import Pseudonym, Session
from .events import StoredEvent, ValidatedEvent, match_type, redact
from .timefmt import format_instant, parse_instant, utc_now


class StoreError(Exception):
    pass


class UnknownSession(StoreError):
    pass


class UnknownActivity(StoreError):
    pass


class StorageFailure(StoreError):
    """The append was not acknowledged; a retry may duplicate the event."""


class CorruptLog(StoreError):
    pass


class CorruptStream(StoreError):
    def __init__(self, position: int, detail: str = ""):
        self.position = position
        super().__init__(f"corrupt stream at line {position}" + (f": {detail}" if detail else ""))


class _Discarded:
    """Result of appending to an opt-out session: acknowledged, not persisted."""

    def __repr__(self) -> str:  # pragma: no cover
        return "DISCARDED"


DISCARDED = _Discarded()


@dataclass(frozen=True)
class AppendResult:
    seq: int


@dataclass(frozen=True)
class AggregateFilter:
    activity_id: str
    pseudonym: str | None = None
    event_type_pattern: str | None = None
    exercise: str | None = None
    start: datetime | None = None
    end: datetime | None = None

    def __post_init__(self) -> None:
        if self.start is not None and self.end is not None and self.start > self.end:
            raise ValueError("time range start must be <= end")


@dataclass(frozen=True)
class UserRow:
    pseudonym: str
    session_count: int
    last_active: datetime


@dataclass(frozen=True)
class SessionRow:
    session_id: str
    pseudonym: str
    started_at: datetime
    event_count: int


@dataclass(frozen=True)
class CellStats:
    attempts: int
    successes: int
    failures: int
    last_attempt_at: datetime


@dataclass(frozen=True)
class TimelineBucket:
    bucket_start: datetime
    event_count: int
    session_count: int


@dataclass(frozen=True)
class _IndexRow:
    # Lightweight projection of one stored event; all aggregates scan these.
    session_id: str
    seq: int
    ts: datetime
    event_type: str
    exercise: str
    pseudonym: str


class _Cell:
    __slots__ = ("attempts", "successes", "failures", "last_attempt_at")

    def __init__(self) -> None:
        self.attempts = 0
        self.successes = 0
        self.failures = 0
        self.last_attempt_at: datetime | None = None

    def snapshot(self) -> CellStats:
        return CellStats(self.attempts, self.successes, self.failures, self.last_attempt_at)


@dataclass
class _ActivityState:
    session_order: list[str] = field(default_factory=list)
    total_events: int = 0
    type_counts: dict[str, int] = field(default_factory=dict)
    rows: list[_IndexRow] = field(default_factory=list)
    matrix: dict[tuple[str, str], _Cell] = field(default_factory=dict)
    opt_out_sessions: int = 0


def _bucket_start(ts: datetime, bucket: str) -> datetime:
    day = ts.replace(hour=0, minute=0, second=0, microsecond=0)
    if bucket == "hour":
        return ts.replace(minute=0, second=0, microsecond=0)
    if bucket == "day":
        return day
    if bucket == "week":
        return day - timedelta(days=day.weekday())
    raise ValueError(f"unknown bucket size: {bucket!r}")


class EventStore:
    """Sessions plus their ordered event streams, with aggregate queries.

    Thread-safe: one store-wide lock serializes mutations and gives reads a
    consistent snapshot; per-session sequence numbers stay gap-free under
    concurrent appends.
    """

    def __init__(self, _log_path: str | None = None):
        self._lock = threading.RLock()
        self._activities: dict[str, _ActivityState] = {}
        self._sessions: dict[str, Session] = {}
        self._events: dict[str, list[StoredEvent]] = {}
        self._last_server_ts: dict[str, datetime] = {}
        self._log = None
        self._log_path = _log_path
        if _log_path is not None:
            parent = os.path.dirname(os.path.abspath(_log_path))
            os.makedirs(parent, exist_ok=True)
            self._replay(_log_path)
            self._log = open(_log_path, "ab")

    @classmethod
    def in_memory(cls) -> EventStore:
        return cls()

    @classmethod
    def open(cls, path: str) -> EventStore:
        """Open (or create) the file backend; replays the log on open, tolerating
        a torn final record from an unacknowledged write."""
        return cls(_log_path=os.fspath(path))

    def close(self) -> None:
        with self._lock:
            if self._log is not None:
                self._log.close()
                self._log = None

    # -- registration and sessions -------------------------------------------

    def register_activity(self, activity_id: str) -> None:
        with self._lock:
            self._activities.setdefault(activity_id, _ActivityState())

    def has_activity(self, activity_id: str) -> bool:
        with self._lock:
            return activity_id in self._activities

    def add_session(self, session: Session) -> None:
        with self._lock:
            state = self._activities.get(session.activity_id)
            if state is None:
                raise UnknownActivity(session.activity_id)
            if session.session_id in self._sessions:
                raise StoreError(f"duplicate session id {session.session_id}")
            self._write_record(_session_record(session))
            self._admit_session(session, state)

    def _admit_session(self, session: Session, state: _ActivityState) -> None:
        self._sessions[session.session_id] = session
        self._events[session.session_id] = []
        state.session_order.append(session.session_id)
        if session.opt_out:
            state.opt_out_sessions += 1

    def get_session(self, session_id: str) -> Session:
        with self._lock:
            session = self._sessions.get(session_id)
            if session is None:
                raise UnknownSession(session_id)
            return session

    # -- append path -----------------------------------------------------------

    def append(
        self, session_id: str, event: ValidatedEvent, now: datetime | None = None
    ) -> AppendResult | _Discarded:
        """Assign the next per-session seq, stamp the server time, store durably.

        Opt-out sessions acknowledge with DISCARDED and persist nothing. The
        acknowledge happens only after the durable flush; on StorageFailure the
        event is not acknowledged and a retry may duplicate it.
        """
        stamp = utc_now() if now is None else now
        with self._lock:
            session = self._sessions.get(session_id)
            if session is None:
                raise UnknownSession(session_id)
            if session.opt_out:
                return DISCARDED
            seq = len(self._events[session_id]) + 1
            last = self._last_server_ts.get(session_id)
            if last is not None and stamp < last:
                stamp = last  # server_timestamp is non-decreasing within a session
            stored = StoredEvent(
                envelope=event.envelope,
                session_id=session_id,
                seq=seq,
                server_timestamp=stamp,
            )
            if self._log is not None:
                self._write_record(_event_record(stored))
            self._admit_event(stored, session)
            return AppendResult(seq)

    def _admit_event(self, stored: StoredEvent, session: Session) -> None:
        self._events[session.session_id].append(stored)
        self._last_server_ts[session.session_id] = stored.server_timestamp
        state = self._activities[session.activity_id]
        env = stored.envelope
        state.total_events += 1
        state.type_counts[env.event_type] = state.type_counts.get(env.event_type, 0) + 1
        state.rows.append(
            _IndexRow(
                session_id=session.session_id,
                seq=stored.seq,
                ts=stored.server_timestamp,
                event_type=env.event_type,
                exercise=env.exercise,
                pseudonym=session.pseudonym.digits,
            )
        )
        if match_type(env.event_type, "feedback.*"):
            cell = state.matrix.setdefault((session.pseudonym.digits, env.exercise), _Cell())
            cell.attempts += 1
            verdict = env.field_value("verdict")
            if verdict is not None and verdict.kind == "string":
                if verdict.value == "success":
                    cell.successes += 1
                elif verdict.value == "failure":
                    cell.failures += 1
            if cell.last_attempt_at is None or stored.server_timestamp > cell.last_attempt_at:
                cell.last_attempt_at = stored.server_timestamp

    def apply_redaction(self, session_id: str, seq: int, field_names) -> StoredEvent:
        """Persistently remove fields from a stored event (see events.redact).

        The file backend is compacted so the removed values leave no trace in
        the persisted bytes, not even in the historical append record.
        """
        with self._lock:
            stored = self.get_event(session_id, seq)
            scrubbed = redact(stored, field_names)
            if scrubbed == stored:
                return stored
            self._events[session_id][seq - 1] = scrubbed
            self._rewrite_log()
            return scrubbed

    def _write_record(self, record: dict) -> None:
        if self._log is None:
            return
        line = json.dumps(record, separators=(",", ":")) + "\n"
        try:
            self._log.write(line.encode("utf-8"))
            self._log.flush()
            os.fsync(self._log.fileno())
        except OSError as exc:  # pragma: no cover - disk faults
            raise StorageFailure(str(exc)) from exc

    def _rewrite_log(self) -> None:
        """Atomically rewrite the log from current state (after a redaction)."""
        if self._log is None or self._log_path is None:
            return
        tmp = self._log_path + ".rewrite"
        with open(tmp, "wb") as fh:
            for session in self._sessions.values():
                fh.write(json.dumps(_session_record(session), separators=(",", ":")).encode())
                fh.write(b"\n")
            for session_id in self._sessions:
                for stored in self._events[session_id]:
                    fh.write(json.dumps(_event_record(stored), separators=(",", ":")).encode())
                    fh.write(b"\n")
            fh.flush()
            os.fsync(fh.fileno())
        self._log.close()
        os.replace(tmp, self._log_path)
        dir_fd = os.open(os.path.dirname(os.path.abspath(self._log_path)), os.O_RDONLY)
        try:
            os.fsync(dir_fd)
        finally:
            os.close(dir_fd)
        self._log = open(self._log_path, "ab")

    # -- reads ------------------------------------------------------------------

    def get_event(self, session_id: str, seq: int) -> StoredEvent:
        with self._lock:
            events = self._events.get(session_id)
            if events is None:
                raise UnknownSession(session_id)
            if not 1 <= seq <= len(events):
                raise StoreError(f"no event {seq} in session {session_id}")
            return events[seq - 1]

    def session_events(self, session_id: str, until: int | None = None) -> list[StoredEvent]:
        """Events with seq <= until (all when until is absent), ascending seq."""
        with self._lock:
            events = self._events.get(session_id)
            if events is None:
                raise UnknownSession(session_id)
            if until is None:
                return list(events)
            return events[: max(until, 0)]

    def _activity(self, activity_id: str) -> _ActivityState:
        state = self._activities.get(activity_id)
        if state is None:
            raise UnknownActivity(activity_id)
        return state

    def _visible_sessions(self, state: _ActivityState) -> list[Session]:
        # Opt-out sessions never surface in any read or aggregate.
        return [
            self._sessions[sid]
            for sid in state.session_order
            if not self._sessions[sid].opt_out
        ]

    def _last_active(self, session: Session) -> datetime:
        last = self._last_server_ts.get(session.session_id)
        return last if last is not None else session.started_at

    def list_users(self, activity_id: str) -> list[UserRow]:
        """One row per pseudonym, most recently active first."""
        with self._lock:
            state = self._activity(activity_id)
            grouped: dict[str, tuple[int, datetime]] = {}
            for session in self._visible_sessions(state):
                digits = session.pseudonym.digits
                count, last = grouped.get(digits, (0, self._last_active(session)))
                grouped[digits] = (count + 1, max(last, self._last_active(session)))
            rows = [UserRow(d, c, t) for d, (c, t) in grouped.items()]
            rows.sort(key=lambda r: (r.last_active, r.pseudonym), reverse=True)
            return rows

    def list_sessions(
        self,
        activity_id: str,
        pseudonym: str | None = None,
        offset: int = 0,
        limit: int | None = None,
    ) -> list[SessionRow]:
        """Most recent first; paged with (offset, limit)."""
        with self._lock:
            state = self._activity(activity_id)
            sessions = self._visible_sessions(state)
            if pseudonym is not None:
                sessions = [s for s in sessions if s.pseudonym.digits == pseudonym]
            sessions.sort(key=lambda s: (s.started_at, s.session_id), reverse=True)
            page = sessions[offset : None if limit is None else offset + limit]
            return [
                SessionRow(
                    session_id=s.session_id,
                    pseudonym=s.pseudonym.digits,
                    started_at=s.started_at,
                    event_count=len(self._events[s.session_id]),
                )
                for s in page
            ]

    def _filtered_rows(self, flt: AggregateFilter) -> list[_IndexRow]:
        state = self._activities.get(flt.activity_id)
        if state is None:
            return []
        rows = state.rows
        out = []
        for row in rows:
            if flt.pseudonym is not None and row.pseudonym != flt.pseudonym:
                continue
            if flt.event_type_pattern is not None and not match_type(
                row.event_type, flt.event_type_pattern
            ):
                continue
            if flt.exercise is not None and row.exercise != flt.exercise:
                continue
            if flt.start is not None and row.ts < flt.start:
                continue
            if flt.end is not None and row.ts >= flt.end:
                continue
            out.append(row)
        return out

    def count_events(self, flt: AggregateFilter) -> int:
        """Aggregate count; an unfiltered query is served from a counter and a
        filtered one from index rows, never from stored payloads."""
        with self._lock:
            state = self._activities.get(flt.activity_id)
            if state is None:
                return 0
            if (
                flt.pseudonym is None
                and flt.exercise is None
                and flt.start is None
                and flt.end is None
            ):
                if flt.event_type_pattern is None:
                    return state.total_events
                return sum(
                    count
                    for etype, count in state.type_counts.items()
                    if match_type(etype, flt.event_type_pattern)
                )
            return len(self._filtered_rows(flt))

    def exercise_stats(self, activity_id: str) -> dict[tuple[str, str], CellStats]:
        """(pseudonym, exercise) -> attempt/success/failure tallies, maintained
        incrementally from feedback events."""
        with self._lock:
            state = self._activity(activity_id)
            return {key: cell.snapshot() for key, cell in state.matrix.items()}

    def timeline(
        self,
        activity_id: str,
        bucket: str,
        start: datetime | None = None,
        end: datetime | None = None,
    ) -> list[TimelineBucket]:
        """Non-empty buckets in [start, end), ascending."""
        with self._lock:
            flt = AggregateFilter(activity_id=activity_id, start=start, end=end)
            buckets: dict[datetime, tuple[int, set[str]]] = {}
            for row in self._filtered_rows(flt):
                key = _bucket_start(row.ts, bucket)
                count, sessions = buckets.get(key, (0, set()))
                sessions.add(row.session_id)
                buckets[key] = (count + 1, sessions)
            return [
                TimelineBucket(key, count, len(sessions))
                for key, (count, sessions) in sorted(buckets.items())
            ]

    def events_by_type(
        self,
        activity_id: str,
        type_pattern: str,
        offset: int = 0,
        limit: int | None = None,
    ) -> list[StoredEvent]:
        """Matching events in ascending (server time, session, seq) order."""
        with self._lock:
            flt = AggregateFilter(activity_id=activity_id, event_type_pattern=type_pattern)
            rows = self._filtered_rows(flt)
            rows.sort(key=lambda r: (r.ts, r.session_id, r.seq))
            page = rows[offset : None if limit is None else offset + limit]
            return [self._events[r.session_id][r.seq - 1] for r in page]

    def activity_totals(self, activity_id: str) -> dict[str, int]:
        """users/sessions/events/help_requests under one lock (one snapshot)."""
        with self._lock:
            state = self._activity(activity_id)
            visible = self._visible_sessions(state)
            return {
                "users": len({s.pseudonym.digits for s in visible}),
                "sessions": len(visible),
                "events": state.total_events,
                "help_requests": sum(
                    count
                    for etype, count in state.type_counts.items()
                    if match_type(etype, "helprequest.*")
                ),
            }

    def opt_out_stats(self, activity_id: str) -> tuple[int, int]:
        """(opt_out_sessions, total_sessions) for reporting the opt-out rate."""
        with self._lock:
            state = self._activity(activity_id)
            return state.opt_out_sessions, len(state.session_order)

    # -- export / import ---------------------------------------------------------

    EXPORT_FORMAT = "learnlog-export"
    EXPORT_VERSION = 1

    def export_all(self, activity_id: str):
        """Yield export lines: header, session manifest, events as canonical wire
        documents, and a final count record for truncation detection."""
        with self._lock:
            state = self._activity(activity_id)
            sessions = [self._sessions[sid] for sid in state.session_order]
            events: list[StoredEvent] = []
            for sid in state.session_order:
                events.extend(self._events[sid])
        yield json.dumps(
            {
                "format": self.EXPORT_FORMAT,
                "version": self.EXPORT_VERSION,
                "activity_id": activity_id,
            },
            separators=(",", ":"),
        )
        for s in sessions:
            yield json.dumps(_session_record(s), separators=(",", ":"))
        for ev in events:
            yield json.dumps(_event_record(ev), separators=(",", ":"))
        yield json.dumps(
            {"t": "end", "sessions": len(sessions), "events": len(events)},
            separators=(",", ":"),
        )

    @classmethod
    def import_stream(cls, lines, path: str | None = None) -> EventStore:
        """Rebuild a store from an export stream; sessions, events, seqs and
        pseudonyms are reproduced bit-exactly. Raises CorruptStream with the
        offending line position."""
        store = cls.in_memory() if path is None else cls.open(path)
        position = 0
        header = None
        seen_end = False
        counted_sessions = 0
        counted_events = 0
        for raw in lines:
            position += 1
            text = raw.strip()
            if not text:
                continue
            try:
                record = json.loads(text)
            except ValueError:
                raise CorruptStream(position, "not valid JSON") from None
            if position == 1:
                if record.get("format") != cls.EXPORT_FORMAT:
                    raise CorruptStream(position, "missing export header")
                if record.get("version") != cls.EXPORT_VERSION:
                    raise CorruptStream(position, f"unsupported version {record.get('version')}")
                header = record
                store.register_activity(record["activity_id"])
                continue
            if seen_end:
                raise CorruptStream(position, "records after end marker")
            try:
                kind = record["t"]
                if kind == "session":
                    store.add_session(_session_from_record(record))
                    counted_sessions += 1
                elif kind == "event":
                    store._restore_event(record)
                    counted_events += 1
                elif kind == "end":
                    if record.get("sessions") != counted_sessions or record.get("events") != counted_events:
                        raise CorruptStream(position, "count mismatch in end marker")
                    seen_end = True
                else:
                    raise CorruptStream(position, f"unknown record type {kind!r}")
            except CorruptStream:
                raise
            except (KeyError, ValueError, TypeError, StoreError, wire.DecodeError) as exc:
                raise CorruptStream(position, str(exc)) from None
        if header is None:
            raise CorruptStream(max(position, 1), "empty stream")
        if not seen_end:
            raise CorruptStream(max(position, 1), "truncated stream: missing end marker")
        return store

    def _restore_event(self, record: dict) -> None:
        """Insert an event with its original seq/timestamp (import and replay)."""
        with self._lock:
            session = self._sessions.get(record["session_id"])
            if session is None:
                raise UnknownSession(record["session_id"])
            envelope = wire.decode(record["xml"])
            seq = record["seq"]
            events = self._events[session.session_id]
            if seq != len(events) + 1:
                raise StoreError(f"sequence gap: expected {len(events) + 1}, got {seq}")
            stored = StoredEvent(
                envelope=envelope,
                session_id=session.session_id,
                seq=seq,
                server_timestamp=parse_instant(record["server_ts"]),
                redactions=tuple(record.get("redactions", ())),
            )
            if self._log is not None:
                self._write_record(_event_record(stored))
            self._admit_event(stored, session)

    # -- log replay ----------------------------------------------------------------

    def _replay(self, path: str) -> None:
        if not os.path.exists(path):
            return
        with open(path, "rb") as fh:
            data = fh.read()
        if not data:
            return
        lines = data.split(b"\n")
        trailing_complete = data.endswith(b"\n")
        if trailing_complete:
            lines = lines[:-1]
        last_index = len(lines) - 1
        for i, raw in enumerate(lines):
            if not raw:
                continue
            try:
                record = json.loads(raw)
            except ValueError:
                if i == last_index and not trailing_complete:
                    break  # torn final write of an unacknowledged append
                raise CorruptLog(f"{path}: bad record at line {i + 1}") from None
            self._apply_replayed(record, path, i + 1)

    def _apply_replayed(self, record: dict, path: str, line_no: int) -> None:
        try:
            kind = record["t"]
            if kind == "session":
                session = _session_from_record(record)
                state = self._activities.setdefault(session.activity_id, _ActivityState())
                self._admit_session(session, state)
            elif kind == "event":
                session = self._sessions[record["session_id"]]
                stored = StoredEvent(
                    envelope=wire.decode(record["xml"]),
                    session_id=session.session_id,
                    seq=record["seq"],
                    server_timestamp=parse_instant(record["server_ts"]),
                    redactions=tuple(record.get("redactions", ())),
                )
                if stored.seq != len(self._events[session.session_id]) + 1:
                    raise StoreError("sequence gap")
                self._admit_event(stored, session)
            else:
                raise StoreError(f"unknown record type {kind!r}")
        except (KeyError, IndexError, ValueError, StoreError, wire.DecodeError) as exc:
            raise CorruptLog(f"{path}: bad record at line {line_no}: {exc}") from None


def _session_from_record(record: dict) -> Session:
    return Session(
        session_id=record["session_id"],
        activity_id=record["activity_id"],
        pseudonym=Pseudonym(record["pseudonym"]),
        started_at=parse_instant(record["started_at"]),
        opt_out=bool(record["opt_out"]),
    )


def _session_record(session: Session) -> dict:
    return {
        "t": "session",
        "session_id": session.session_id,
        "activity_id": session.activity_id,
        "pseudonym": session.pseudonym.digits,
        "started_at": format_instant(session.started_at),
        "opt_out": session.opt_out,
    }


def _event_record(stored: StoredEvent) -> dict:
    return {
        "t": "event",
        "session_id": stored.session_id,
        "seq": stored.seq,
        "server_ts": format_instant(stored.server_timestamp),
        "redactions": list(stored.redactions),
        "xml": wire.encode(stored.envelope).decode("utf-8"),
    }

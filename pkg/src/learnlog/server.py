"""HTTP service: signed session launches, XML event ingestion, the JSON read
API for the console, myLog, blob downloads, and static console assets.

Routes, status codes and JSON shapes are documented in docs/api.md. Ingestion
acknowledges before triggers run; trigger execution happens on a worker pool
so a slow mail gateway never delays event appends.
"""

from __future__ import annotations

import threading
import time
from contextlib import asynccontextmanager
from pathlib import Path
from typing import Callable
from urllib.parse import parse_qsl

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse, RedirectResponse, Response
from fastapi.staticfiles import StaticFiles

from . import views, wire
from .auth import (
    LaunchError,
    LaunchRequest,
    NonceCache,
    ResourceRef,
    Role,
    SessionToken,
    TokenError,
    authorize,
    create_session,
    verify_launch,
    verify_viewer_token,
)
from .config import ServiceConfig, load_activity_dir
from .events import ValidationError, validate
from .store import DISCARDED, EventStore, UnknownSession
from .timefmt import format_instant, parse_instant, utc_now
from .triggers import MailGateway, OutboxGateway, SmtpGateway, TriggerDispatcher

_LAUNCH_FIELDS = ("user_ref", "issued_at", "nonce", "origin", "signature")


class RateLimiter:
    """Per-key token bucket; capacity equals the per-second rate."""

    def __init__(self, rate_per_sec: float):
        self.rate = rate_per_sec
        self._state: dict[str, tuple[float, float]] = {}
        self._lock = threading.Lock()

    def allow(self, key: str, now: float | None = None) -> bool:
        if self.rate <= 0:
            return True
        stamp = time.monotonic() if now is None else now
        with self._lock:
            tokens, last = self._state.get(key, (self.rate, stamp))
            tokens = min(self.rate, tokens + (stamp - last) * self.rate)
            if tokens < 1.0:
                self._state[key] = (tokens, stamp)
                return False
            self._state[key] = (tokens - 1.0, stamp)
            return True


def _error(status: int, code: str, detail: str = "") -> JSONResponse:
    body = {"error": code}
    if detail:
        body["detail"] = detail
    return JSONResponse(body, status_code=status)


def _mail_gateway(cfg: ServiceConfig) -> MailGateway:
    if cfg.mail.mode == "smtp":
        return SmtpGateway(
            cfg.mail.smtp_host,
            cfg.mail.smtp_port,
            cfg.mail.smtp_username,
            cfg.mail.smtp_password,
            cfg.mail.sender,
        )
    return OutboxGateway(cfg.mail.outbox_dir)


def create_app(
    cfg: ServiceConfig,
    *,
    activities=None,
    store: EventStore | None = None,
    mail: MailGateway | None = None,
    clock: Callable = utc_now,
) -> FastAPI:
    activities = activities if activities is not None else load_activity_dir(cfg.config_dir)
    if store is None:
        store = EventStore.open(cfg.data_path) if cfg.data_path else EventStore.in_memory()
    for activity_id in activities:
        store.register_activity(activity_id)
    mail = mail if mail is not None else _mail_gateway(cfg)
    dispatcher = TriggerDispatcher(
        store, mail, cfg.base_url, activities, dead_letter_dir=cfg.dead_letter_dir
    )
    nonces = NonceCache()
    limiter = RateLimiter(cfg.rate_limit_per_sec)

    @asynccontextmanager
    async def lifespan(_app):
        yield
        dispatcher.shutdown(wait=True)
        store.close()

    app = FastAPI(title="learnlog", lifespan=lifespan)
    app.state.store = store
    app.state.activities = activities
    app.state.dispatcher = dispatcher
    app.state.config = cfg
    app.state.mail = mail

    def _viewer(request: Request):
        """Bearer credentials: a signed viewer token (contains '.') or a raw
        session token. Returns None when the header is missing."""
        header = request.headers.get("authorization", "")
        if not header.lower().startswith("bearer "):
            return None
        token = header[7:].strip()
        if "." in token:
            return verify_viewer_token(token, cfg.identity_secret, clock())
        return SessionToken(token)

    def _guard(request: Request, activity_id: str, session_id: str | None = None):
        """Resolve (activity config, role) or an error response. Authorization
        runs before any store access."""
        activity = activities.get(activity_id)
        if activity is None:
            return None, _error(404, "unknown_activity")
        try:
            viewer = _viewer(request)
        except TokenError as exc:
            return None, _error(401, exc.code)
        if viewer is None:
            return None, _error(401, "missing_token")
        role = authorize(viewer, activity, ResourceRef(activity_id, session_id))
        return (activity, role), None

    # -- ingestion ---------------------------------------------------------

    @app.post("/activities/{activity_id}/sessions")
    async def launch(activity_id: str, request: Request):
        activity = activities.get(activity_id)
        if activity is None:
            return _error(404, "unknown_activity")
        body = await request.body()
        form = dict(parse_qsl(body.decode("utf-8", errors="replace"), keep_blank_values=True))
        missing = [name for name in _LAUNCH_FIELDS if name not in form]
        if missing:
            return _error(400, "bad_request", f"missing form fields: {', '.join(missing)}")
        try:
            issued_at = parse_instant(form["issued_at"])
        except ValueError:
            return _error(400, "bad_request", "issued_at is not an ISO-8601 instant")
        launch_req = LaunchRequest(
            activity_id=activity_id,
            user_ref=form["user_ref"],
            issued_at=issued_at,
            nonce=form["nonce"],
            origin=form["origin"],
            opt_out=form.get("opt_out", "false") == "true",
            signature=form["signature"],
        )
        try:
            verified = verify_launch(launch_req, activity, clock(), nonces)
        except LaunchError as exc:
            if exc.code == "origin_not_whitelisted":
                return _error(403, exc.code)
            if exc.code == "unknown_activity":
                return _error(404, exc.code)
            return _error(401, exc.code)
        session = create_session(verified, activity, clock())
        store.add_session(session)
        return JSONResponse(
            {
                "session_id": session.session_id,
                "pseudonym": session.pseudonym.digits,
                "mylog_url": f"{cfg.base_url.rstrip('/')}/console/#/mylog/{session.session_id}",
            },
            status_code=201,
        )

    @app.post("/sessions/{session_id}/events")
    async def ingest(session_id: str, request: Request):
        body = await request.body()
        if len(body) > cfg.max_body_bytes:
            return _error(413, "oversize", f"body exceeds {cfg.max_body_bytes} bytes")
        try:
            store.get_session(session_id)
        except UnknownSession:
            return _error(404, "unknown_session")
        if not limiter.allow(session_id):
            return _error(429, "rate_limited")
        try:
            envelope = wire.decode(body)
        except wire.DecodeError as exc:
            return _error(400, exc.code, exc.detail)
        try:
            validated = validate(envelope, max_event_bytes=cfg.max_body_bytes)
        except ValidationError as exc:
            return _error(400, exc.code, exc.field_name or "")
        result = store.append(session_id, validated, now=clock())
        if result is DISCARDED:
            return Response(status_code=204)
        stored = store.get_event(session_id, result.seq)
        dispatcher.submit(stored)
        return JSONResponse({"seq": result.seq}, status_code=201)

    # -- read API ----------------------------------------------------------

    @app.get("/activities/{activity_id}/dashboard")
    def dashboard(activity_id: str, request: Request):
        ctx, err = _guard(request, activity_id)
        if err is not None:
            return err
        _activity, role = ctx
        if role is not Role.TEACHER:
            return _error(403, "denied")
        return views.build_dashboard(store, activity_id, clock()).as_dict()

    @app.get("/activities/{activity_id}/users")
    def users(activity_id: str, request: Request):
        ctx, err = _guard(request, activity_id)
        if err is not None:
            return err
        _activity, role = ctx
        if role is not Role.TEACHER:
            return _error(403, "denied")
        return {
            "activity_id": activity_id,
            "users": [
                {
                    "pseudonym": row.pseudonym,
                    "session_count": row.session_count,
                    "last_active": format_instant(row.last_active),
                }
                for row in store.list_users(activity_id)
            ],
        }

    @app.get("/activities/{activity_id}/sessions")
    def sessions(
        activity_id: str,
        request: Request,
        pseudonym: str | None = None,
        offset: int = 0,
        limit: int | None = None,
    ):
        ctx, err = _guard(request, activity_id)
        if err is not None:
            return err
        _activity, role = ctx
        if role is not Role.TEACHER:
            return _error(403, "denied")
        rows = store.list_sessions(activity_id, pseudonym=pseudonym, offset=offset, limit=limit)
        return {
            "activity_id": activity_id,
            "offset": offset,
            "limit": limit,
            "sessions": [views.session_row_dict(row) for row in rows],
        }

    def _session_in_activity(activity_id: str, session_id: str):
        try:
            session = store.get_session(session_id)
        except UnknownSession:
            return None
        if session.activity_id != activity_id:
            return None
        return session

    @app.get("/activities/{activity_id}/sessions/{session_id}")
    def session_detail(
        activity_id: str, session_id: str, request: Request, until: int | None = None
    ):
        ctx, err = _guard(request, activity_id, session_id)
        if err is not None:
            return err
        _activity, role = ctx
        if role is Role.DENIED:
            return _error(403, "denied")
        if _session_in_activity(activity_id, session_id) is None:
            return _error(404, "unknown_session")
        return views.build_session_view(store, session_id, until).as_dict()

    @app.get("/activities/{activity_id}/sessions/{session_id}/blobs/{seq}/{field_name}")
    def blob(
        activity_id: str, session_id: str, seq: int, field_name: str, request: Request
    ):
        ctx, err = _guard(request, activity_id, session_id)
        if err is not None:
            return err
        _activity, role = ctx
        if role is Role.DENIED:
            return _error(403, "denied")
        if _session_in_activity(activity_id, session_id) is None:
            return _error(404, "unknown_session")
        events = store.session_events(session_id)
        if not 1 <= seq <= len(events):
            return _error(404, "unknown_event")
        stored = events[seq - 1]
        if field_name in stored.redactions:
            return _error(404, "redacted")
        fv = stored.envelope.field_value(field_name)
        if fv is None or fv.kind != "blob":
            return _error(404, "no_such_blob")
        return Response(content=fv.value, media_type=fv.media)

    @app.get("/activities/{activity_id}/summary/exercises")
    def summary_exercises(activity_id: str, request: Request):
        ctx, err = _guard(request, activity_id)
        if err is not None:
            return err
        activity, role = ctx
        if role is not Role.TEACHER:
            return _error(403, "denied")
        return views.build_exercise_table(store, activity_id, activity).as_dict()

    @app.get("/activities/{activity_id}/summary/timeline")
    def summary_timeline(
        activity_id: str,
        request: Request,
        bucket: str = "day",
        start: str | None = None,
        end: str | None = None,
    ):
        ctx, err = _guard(request, activity_id)
        if err is not None:
            return err
        _activity, role = ctx
        if role is not Role.TEACHER:
            return _error(403, "denied")
        if bucket not in ("hour", "day", "week"):
            return _error(400, "bad_request", "bucket must be hour, day or week")
        try:
            start_at = parse_instant(start) if start else None
            end_at = parse_instant(end) if end else None
        except ValueError:
            return _error(400, "bad_request", "start/end must be ISO-8601 instants")
        points = store.timeline(activity_id, bucket, start=start_at, end=end_at)
        return {
            "activity_id": activity_id,
            "bucket": bucket,
            "points": [views.timeline_bucket_dict(b) for b in points],
        }

    @app.get("/activities/{activity_id}/events")
    def events_by_type(
        activity_id: str,
        request: Request,
        type: str = "helprequest",
        offset: int = 0,
        limit: int | None = None,
    ):
        ctx, err = _guard(request, activity_id)
        if err is not None:
            return err
        _activity, role = ctx
        if role is not Role.TEACHER:
            return _error(403, "denied")
        try:
            rows = store.events_by_type(activity_id, type, offset=offset, limit=limit)
        except ValueError:
            return _error(400, "bad_request", f"invalid type pattern {type!r}")
        return {
            "activity_id": activity_id,
            "type": type,
            "events": [views.event_list_dict(store, ev, activity_id) for ev in rows],
        }

    @app.get("/mylog/{session_token}")
    def mylog(session_token: str, until: int | None = None):
        try:
            session = store.get_session(session_token)
        except UnknownSession:
            return _error(404, "unknown_session")
        return views.build_session_view(store, session.session_id, until).as_dict()

    # -- console assets ------------------------------------------------------

    static_dir = cfg.static_dir
    if static_dir and Path(static_dir).is_dir():
        app.mount("/console", StaticFiles(directory=static_dir, html=True), name="console")

        @app.get("/")
        def index():
            return RedirectResponse("/console/")

    return app

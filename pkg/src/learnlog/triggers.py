"""Trigger matching and actions; ships the send-mail help-request workflow.

A helprequest is forwarded to the responsible teacher by email together with a
deep link into the session up to the triggering event. Once the gateway
acknowledges the message (or the retry budget is exhausted), the learner's
email address is scrubbed from the stored event: after that it exists only in
the dispatched message. Privacy wins over deliverability.
"""

from __future__ import annotations

import base64
import smtplib
import threading
from abc import ABC, abstractmethod
from concurrent.futures import Future, ThreadPoolExecutor
from dataclasses import dataclass
from email.message import EmailMessage
from pathlib import Path
from typing import TYPE_CHECKING, Mapping

from .events import StoredEvent, match_type
from .store import EventStore

if TYPE_CHECKING:
    from .auth import ActivityConfig

RETRY_BUDGET = 1  # one retry, then dead-letter


@dataclass(frozen=True)
class TriggerBinding:
    """Binds an action kind to an event type pattern within one activity."""

    activity_id: str
    event_type_pattern: str
    kind: str = "send_mail"
    params: tuple[tuple[str, str], ...] = ()

    def param(self, name: str) -> str | None:
        for key, value in self.params:
            if key == name:
                return value
        return None


@dataclass(frozen=True)
class Attachment:
    filename: str
    media: str
    data: bytes


@dataclass(frozen=True)
class NotificationMessage:
    to: str
    subject: str
    body: str
    attachments: tuple[Attachment, ...] = ()


@dataclass(frozen=True)
class TriggerOutcome:
    binding: TriggerBinding
    status: str  # "sent" | "failed"
    detail: str = ""


class GatewayError(Exception):
    pass


class MailGateway(ABC):
    """Outbound mail. key is a stable per-message name for file backends."""

    @abstractmethod
    def send(self, message: NotificationMessage, key: str) -> None:
        raise NotImplementedError


def format_outbox_message(message: NotificationMessage) -> str:
    """RFC-5322-style text: headers, blank line, body, base64 attachment
    sections. Documented in docs/mail-outbox.md."""
    lines = [f"To: {message.to}", f"Subject: {message.subject}", "", message.body]
    for att in message.attachments:
        lines.append("")
        lines.append(f"-- attachment: {att.filename}; media={att.media}")
        lines.append(base64.b64encode(att.data).decode("ascii"))
    return "\n".join(lines) + "\n"


class OutboxGateway(MailGateway):
    """Writes one file per message under a directory; deterministic naming."""

    def __init__(self, directory: str | Path):
        self.directory = Path(directory)
        self.directory.mkdir(parents=True, exist_ok=True)

    def send(self, message: NotificationMessage, key: str) -> None:
        try:
            path = self.directory / f"{key}.eml"
            path.write_text(format_outbox_message(message), encoding="utf-8")
        except OSError as exc:
            raise GatewayError(str(exc)) from exc

    def messages(self) -> list[Path]:
        return sorted(self.directory.glob("*.eml"))


class SmtpGateway(MailGateway):
    def __init__(
        self,
        host: str,
        port: int = 25,
        username: str | None = None,
        password: str | None = None,
        sender: str = "learnlog@localhost",
    ):
        self.host = host
        self.port = port
        self.username = username
        self.password = password
        self.sender = sender

    def send(self, message: NotificationMessage, key: str) -> None:
        email = EmailMessage()
        email["From"] = self.sender
        email["To"] = message.to
        email["Subject"] = message.subject
        email.set_content(message.body)
        for att in message.attachments:
            maintype, _, subtype = att.media.partition("/")
            email.add_attachment(
                att.data, maintype=maintype or "application", subtype=subtype or "octet-stream",
                filename=att.filename,
            )
        try:
            with smtplib.SMTP(self.host, self.port, timeout=30) as client:
                if self.username:
                    client.login(self.username, self.password or "")
                client.send_message(email)
        except (OSError, smtplib.SMTPException) as exc:
            raise GatewayError(str(exc)) from exc


def _field_string(stored: StoredEvent, name: str) -> str | None:
    fv = stored.envelope.field_value(name)
    if fv is not None and fv.kind == "string":
        return fv.value
    return None


def compose_help_request(
    stored: StoredEvent, pseudonym: str, activity_id: str, base_url: str, recipient: str
) -> NotificationMessage:
    """Build the tutor notification: question, learner address, deep link with
    until=<seq> so the teacher sees the session up to the request."""
    question = _field_string(stored, "question_text") or "(no question text)"
    learner_email = _field_string(stored, "learner_email")
    link = (
        f"{base_url.rstrip('/')}/activities/{activity_id}"
        f"/sessions/{stored.session_id}?until={stored.seq}"
    )
    body_lines = [
        f"A learner ({pseudonym}) asked for help"
        + (f" in exercise '{stored.envelope.exercise}'." if stored.envelope.exercise else "."),
        "",
        "Question:",
        question,
        "",
        f"Reply address: {learner_email}" if learner_email else "(no reply address provided)",
        "",
        "Session up to the request:",
        link,
    ]
    attachments = []
    snapshot = stored.envelope.field_value("snapshot")
    if snapshot is not None and snapshot.kind == "blob":
        attachments.append(Attachment("snapshot", snapshot.media or "application/octet-stream", snapshot.value))
    return NotificationMessage(
        to=recipient,
        subject=f"[{activity_id}] Help request from {pseudonym}",
        body="\n".join(body_lines),
        attachments=tuple(attachments),
    )


def send_mail_action(
    stored: StoredEvent,
    binding: TriggerBinding,
    base_url: str,
    mail: MailGateway,
    store: EventStore,
    *,
    default_recipient: str | None = None,
    dead_letter_dir: str | Path | None = None,
) -> TriggerOutcome:
    """Send the help-request mail, then scrub learner_email from the store.

    The scrub happens after the gateway acknowledges; if sending fails
    terminally the scrub happens anyway and the message goes to the
    dead-letter directory.
    """
    session = store.get_session(stored.session_id)
    recipient = binding.param("recipient") or default_recipient
    if recipient is None:
        return TriggerOutcome(binding, "failed", "no recipient configured")
    message = compose_help_request(
        stored, session.pseudonym.digits, session.activity_id, base_url, recipient
    )
    key = f"{stored.session_id}-{stored.seq:06d}"
    had_email = _field_string(stored, "learner_email") is not None

    failure = ""
    for _ in range(1 + RETRY_BUDGET):
        try:
            mail.send(message, key)
            failure = ""
            break
        except GatewayError as exc:
            failure = str(exc)
    if failure and dead_letter_dir is not None:
        dead = Path(dead_letter_dir)
        dead.mkdir(parents=True, exist_ok=True)
        (dead / f"{key}.eml").write_text(format_outbox_message(message), encoding="utf-8")
    if had_email:
        store.apply_redaction(stored.session_id, stored.seq, ["learner_email"])
    if failure:
        return TriggerOutcome(binding, "failed", f"gateway failed after retry: {failure}")
    return TriggerOutcome(binding, "sent", message.to)


#: Registry of trigger actions; only send_mail ships, new kinds register here.
ACTIONS = {"send_mail": send_mail_action}


def dispatch(
    stored: StoredEvent,
    bindings,
    mail: MailGateway,
    store: EventStore,
    *,
    base_url: str,
    default_recipient: str | None = None,
    dead_letter_dir: str | Path | None = None,
    actions: Mapping = ACTIONS,
) -> list[TriggerOutcome]:
    """Run every binding whose pattern matches the stored event, in binding
    order. Must be called only after the event is durably persisted; failures
    never roll the event back."""
    outcomes: list[TriggerOutcome] = []
    for binding in bindings:
        if not match_type(stored.envelope.event_type, binding.event_type_pattern):
            continue
        action = actions.get(binding.kind)
        if action is None:
            outcomes.append(TriggerOutcome(binding, "failed", f"unknown trigger kind {binding.kind!r}"))
            continue
        outcomes.append(
            action(
                stored,
                binding,
                base_url,
                mail,
                store,
                default_recipient=default_recipient,
                dead_letter_dir=dead_letter_dir,
            )
        )
    return outcomes


class TriggerDispatcher:
    """Runs dispatch on a worker pool, strictly after append acknowledge, and
    exactly once per stored event within this process lifetime."""

    def __init__(
        self,
        store: EventStore,
        mail: MailGateway,
        base_url: str,
        activities: Mapping[str, "ActivityConfig"],
        dead_letter_dir: str | Path | None = None,
        workers: int = 2,
    ):
        self._store = store
        self._mail = mail
        self._base_url = base_url
        self._activities = activities
        self._dead_letter_dir = dead_letter_dir
        self._pool = ThreadPoolExecutor(max_workers=workers, thread_name_prefix="trigger")
        self._seen: set[tuple[str, int]] = set()
        self._lock = threading.Lock()

    def _claim(self, stored: StoredEvent) -> bool:
        key = (stored.session_id, stored.seq)
        with self._lock:
            if key in self._seen:
                return False
            self._seen.add(key)
            return True

    def _run(self, stored: StoredEvent) -> list[TriggerOutcome]:
        session = self._store.get_session(stored.session_id)
        cfg = self._activities.get(session.activity_id)
        if cfg is None or not cfg.trigger_bindings:
            return []
        default = cfg.teacher_principals[0] if cfg.teacher_principals else None
        return dispatch(
            stored,
            cfg.trigger_bindings,
            self._mail,
            self._store,
            base_url=self._base_url,
            default_recipient=default,
            dead_letter_dir=self._dead_letter_dir,
        )

    def submit(self, stored: StoredEvent) -> Future | None:
        """Queue async dispatch; returns None if this event was already claimed."""
        if not self._claim(stored):
            return None
        return self._pool.submit(self._run, stored)

    def dispatch_sync(self, stored: StoredEvent) -> list[TriggerOutcome]:
        """Inline dispatch with the same exactly-once guarantee (tests)."""
        if not self._claim(stored):
            return []
        return self._run(stored)

    def shutdown(self, wait: bool = True) -> None:
        self._pool.shutdown(wait=wait)

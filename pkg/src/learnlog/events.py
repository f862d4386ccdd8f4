"""Event taxonomy: typed field values, envelopes, kind schemas, validation, redaction.

Everything here is an immutable value and every operation is a pure function;
serialization lives in the wire module and persistence in the store module.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, replace
from datetime import datetime

from .timefmt import as_utc_ms

DEFAULT_MAX_BLOB_BYTES = 2 * 1024 * 1024
DEFAULT_MAX_EVENT_BYTES = 4 * 1024 * 1024

KINDS = ("string", "number", "date", "blob", "kvlist")

#: Event type tokens: lowercase dot-separated words, e.g. "action" or "cominm.rewrite".
TYPE_TOKEN = re.compile(r"[a-z][a-z0-9_]*(?:\.[a-z][a-z0-9_]*)*\Z")

# XML 1.0 Char production (sans surrogates); text outside it cannot travel the wire.
_XML_TEXT = re.compile(
    "\\A[\x09\x0a\x0d\x20-\ud7ff\ue000-\ufffd\U00010000-\U0010ffff]*\\Z"
)

#: Verdict values the feedback pipeline interprets. "partial" counts as an
#: attempt but as neither success nor failure; unknown verdicts behave the same.
FEEDBACK_VERDICTS = ("success", "failure", "partial")


def is_wire_text(text: str) -> bool:
    return bool(_XML_TEXT.match(text))


@dataclass(frozen=True)
class FieldValue:
    """One typed value in an event's field bag.

    kind is one of ``string | number | date | blob | kvlist``; value holds
    UTF-8 text, an IEEE-754 double, a UTC instant (ms precision), bytes, or an
    ordered tuple of (key, FieldValue) pairs. Blob values carry a media type.
    """

    kind: str
    value: str | float | datetime | bytes | tuple[tuple[str, FieldValue], ...]
    media: str | None = None

    @staticmethod
    def string(text: str) -> FieldValue:
        return FieldValue("string", text)

    @staticmethod
    def number(x: float) -> FieldValue:
        return FieldValue("number", float(x))

    @staticmethod
    def date(dt: datetime) -> FieldValue:
        return FieldValue("date", as_utc_ms(dt))

    @staticmethod
    def blob(data: bytes, media: str) -> FieldValue:
        return FieldValue("blob", bytes(data), media)

    @staticmethod
    def kvlist(pairs) -> FieldValue:
        return FieldValue("kvlist", tuple((k, v) for k, v in pairs))


@dataclass(frozen=True)
class EventEnvelope:
    """One semantic log event as submitted by a learning tool.

    The session id and server-side sequence number are assigned at storage
    time and live on StoredEvent, not here.
    """

    event_type: str
    client_timestamp: datetime
    exercise: str = ""
    fields: tuple[tuple[str, FieldValue], ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "client_timestamp", as_utc_ms(self.client_timestamp))
        object.__setattr__(self, "fields", tuple((n, v) for n, v in self.fields))

    def field_value(self, name: str) -> FieldValue | None:
        for n, v in self.fields:
            if n == name:
                return v
        return None


@dataclass(frozen=True)
class StoredEvent:
    """An envelope as persisted: bound to a session, sequenced, server-stamped."""

    envelope: EventEnvelope
    session_id: str
    seq: int
    server_timestamp: datetime
    redactions: tuple[str, ...] = ()


@dataclass(frozen=True)
class ValidatedEvent:
    """An envelope that passed validate(); the only thing the store accepts."""

    envelope: EventEnvelope


@dataclass(frozen=True)
class EventKindSchema:
    """Required (and optional) fields for one event type."""

    event_type: str
    required_fields: tuple[tuple[str, str], ...]
    description: str = ""
    optional_fields: tuple[tuple[str, str], ...] = ()


#: The built-in taxonomy; tools extend it with their own dotted types, which
#: pass validation whenever they are structurally well-formed.
BUILTIN_SCHEMAS: tuple[EventKindSchema, ...] = (
    EventKindSchema("action", (("action_name", "string"),), "user manipulation described as text"),
    EventKindSchema("image", (("image", "blob"),), "graphic snapshot of the tool state"),
    EventKindSchema("question", (("question_text", "string"),), "question typed by the learner"),
    EventKindSchema(
        "feedback",
        (("verdict", "string"), ("message", "string")),
        "automatic assessment outcome",
    ),
    EventKindSchema(
        "helprequest",
        (("question_text", "string"), ("learner_email", "string")),
        "tutor help request; triggers the send-mail workflow",
        optional_fields=(("snapshot", "blob"),),
    ),
)


class ValidationError(Exception):
    """Structural rejection of an envelope.

    code is one of bad_type_token, missing_field, wrong_kind, oversize,
    duplicate_field; field_name names the offender where applicable.
    """

    def __init__(self, code: str, field_name: str | None = None):
        self.code = code
        self.field_name = field_name
        super().__init__(code if field_name is None else f"{code}: {field_name}")


def _check_value(name: str, fv: FieldValue, max_blob_bytes: int) -> None:
    if fv.kind == "string":
        if not isinstance(fv.value, str) or not is_wire_text(fv.value):
            raise ValidationError("wrong_kind", name)
    elif fv.kind == "number":
        if isinstance(fv.value, bool) or not isinstance(fv.value, (int, float)):
            raise ValidationError("wrong_kind", name)
        if not math.isfinite(fv.value):
            raise ValidationError("wrong_kind", name)
    elif fv.kind == "date":
        if not isinstance(fv.value, datetime) or fv.value.tzinfo is None:
            raise ValidationError("wrong_kind", name)
    elif fv.kind == "blob":
        if not isinstance(fv.value, bytes):
            raise ValidationError("wrong_kind", name)
        if not isinstance(fv.media, str) or not fv.media or not is_wire_text(fv.media):
            raise ValidationError("wrong_kind", name)
        if len(fv.value) > max_blob_bytes:
            raise ValidationError("oversize", name)
    elif fv.kind == "kvlist":
        seen: set[str] = set()
        for key, sub in fv.value:
            if not isinstance(key, str) or not is_wire_text(key):
                raise ValidationError("wrong_kind", name)
            if key in seen:
                raise ValidationError("duplicate_field", key)
            seen.add(key)
            _check_value(key, sub, max_blob_bytes)
    else:
        raise ValidationError("wrong_kind", name)


def validate(
    envelope: EventEnvelope,
    schemas: tuple[EventKindSchema, ...] = BUILTIN_SCHEMAS,
    *,
    max_blob_bytes: int = DEFAULT_MAX_BLOB_BYTES,
    max_event_bytes: int = DEFAULT_MAX_EVENT_BYTES,
) -> ValidatedEvent:
    """Check an envelope against the type grammar, size limits, and its schema.

    Event types without a registered schema are accepted when structurally
    well-formed, so tools can ship refined types without a server change.
    Deterministic: equal inputs always yield the same verdict.
    """
    if not TYPE_TOKEN.match(envelope.event_type):
        raise ValidationError("bad_type_token", envelope.event_type)
    if not is_wire_text(envelope.exercise):
        raise ValidationError("wrong_kind", "exercise")

    seen: set[str] = set()
    for name, fv in envelope.fields:
        if not isinstance(name, str) or not is_wire_text(name) or not name:
            raise ValidationError("wrong_kind", name)
        if name in seen:
            raise ValidationError("duplicate_field", name)
        seen.add(name)
        _check_value(name, fv, max_blob_bytes)

    schema = next((s for s in schemas if s.event_type == envelope.event_type), None)
    if schema is not None:
        for req_name, req_kind in schema.required_fields:
            fv = envelope.field_value(req_name)
            if fv is None:
                raise ValidationError("missing_field", req_name)
            if fv.kind != req_kind:
                raise ValidationError("wrong_kind", req_name)
        for opt_name, opt_kind in schema.optional_fields:
            fv = envelope.field_value(opt_name)
            if fv is not None and fv.kind != opt_kind:
                raise ValidationError("wrong_kind", opt_name)

    # Size limit is defined against the canonical wire encoding.
    from . import wire

    if wire.encoded_size(envelope) > max_event_bytes:
        raise ValidationError("oversize")
    return ValidatedEvent(envelope)


def match_type(event_type: str, pattern: str) -> bool:
    """Exact token match, or prefix match for patterns ending in ".*".

    "p.*" matches "p" itself and any "p.<suffix>". Raises ValueError for an
    invalid pattern.
    """
    if pattern.endswith(".*"):
        prefix = pattern[:-2]
        if not TYPE_TOKEN.match(prefix):
            raise ValueError(f"invalid type pattern: {pattern!r}")
        return event_type == prefix or event_type.startswith(prefix + ".")
    if not TYPE_TOKEN.match(pattern):
        raise ValueError(f"invalid type pattern: {pattern!r}")
    return event_type == pattern


def redact(stored: StoredEvent, field_names) -> StoredEvent:
    """Remove the named fields and record them in redactions. Idempotent;
    redacting an absent field is a no-op that is still recorded."""
    names = list(field_names)
    if not names:
        return stored
    drop = set(names)
    recorded = list(stored.redactions)
    for n in names:
        if n not in recorded:
            recorded.append(n)
    kept = tuple((n, v) for n, v in stored.envelope.fields if n not in drop)
    return replace(
        stored,
        envelope=replace(stored.envelope, fields=kept),
        redactions=tuple(recorded),
    )

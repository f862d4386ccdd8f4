"""Canonical XML wire codec for event envelopes (the ingestion format).

encode() emits one canonical byte form per envelope: fixed attribute order,
explicit end tags, no insignificant whitespace, numeric character references
for characters an XML parser would otherwise normalize. decode() tolerates
attribute reordering and insignificant whitespace and canonicalizes on
re-encode. The grammar is documented bit-exactly in docs/wire-format.md.
"""

from __future__ import annotations

import base64
import re
import xml.etree.ElementTree as ET
from datetime import datetime

from .events import EventEnvelope, FieldValue, is_wire_text
from .timefmt import format_instant, parse_instant


class DecodeError(Exception):
    """Wire-level rejection; code is one of malformed_xml, unknown_kind,
    bad_timestamp, bad_base64, bad_number, duplicate_field."""

    def __init__(self, code: str, detail: str = ""):
        self.code = code
        self.detail = detail
        super().__init__(f"{code}: {detail}" if detail else code)


def _esc_text(text: str) -> str:
    # CR must be a character reference or the parser folds it away.
    return (
        text.replace("&", "&amp;")
        .replace("<", "&lt;")
        .replace(">", "&gt;")
        .replace("\r", "&#13;")
    )


def _esc_attr(text: str) -> str:
    # Tab/LF/CR in attribute values survive only as character references.
    return (
        text.replace("&", "&amp;")
        .replace("<", "&lt;")
        .replace(">", "&gt;")
        .replace('"', "&quot;")
        .replace("\t", "&#9;")
        .replace("\n", "&#10;")
        .replace("\r", "&#13;")
    )


def _require_wire_text(text: str, where: str) -> str:
    if not is_wire_text(text):
        raise ValueError(f"{where} is not XML-representable text")
    return text


def format_number(x: float) -> str:
    """Shortest decimal that round-trips to the same IEEE-754 double."""
    return repr(float(x))


def _encode_field(name: str, fv: FieldValue) -> str:
    head = f'<field name="{_esc_attr(_require_wire_text(name, "field name"))}" kind="{fv.kind}"'
    if fv.kind == "string":
        body = _esc_text(_require_wire_text(fv.value, f"field {name!r}"))
    elif fv.kind == "number":
        body = format_number(fv.value)
    elif fv.kind == "date":
        body = format_instant(fv.value)
    elif fv.kind == "blob":
        head += f' media="{_esc_attr(_require_wire_text(fv.media, "media type"))}"'
        body = base64.b64encode(fv.value).decode("ascii")
    elif fv.kind == "kvlist":
        body = "".join(_encode_field(k, v) for k, v in fv.value)
    else:
        raise ValueError(f"unknown field kind: {fv.kind!r}")
    return f"{head}>{body}</field>"


def encode(envelope: EventEnvelope) -> bytes:
    """Serialize a valid envelope to its canonical wire document.

    Deterministic: equal envelopes yield byte-identical output.
    """
    parts = [
        f'<event type="{_esc_attr(envelope.event_type)}"'
        f' ts="{format_instant(envelope.client_timestamp)}"'
        f' exercise="{_esc_attr(_require_wire_text(envelope.exercise, "exercise"))}">'
    ]
    parts.extend(_encode_field(name, fv) for name, fv in envelope.fields)
    parts.append("</event>")
    return "".join(parts).encode("utf-8")


def encoded_size(envelope: EventEnvelope) -> int:
    return len(encode(envelope))


_NUMBER = re.compile(r"[+-]?(?:[0-9]+(?:\.[0-9]*)?|\.[0-9]+)(?:[eE][+-]?[0-9]+)?\Z")
_WS = re.compile(r"[ \t\r\n]*\Z")


def _is_blank(text: str | None) -> bool:
    return text is None or bool(_WS.match(text))


def _parse_timestamp(raw: str) -> datetime:
    try:
        return parse_instant(raw)
    except ValueError as exc:
        raise DecodeError("bad_timestamp", str(exc)) from None


def _decode_value(elem: ET.Element, kind: str, name: str) -> FieldValue:
    if kind == "kvlist":
        if not _is_blank(elem.text):
            raise DecodeError("malformed_xml", f"text content inside kvlist field {name!r}")
        return FieldValue("kvlist", _decode_fields(elem))
    if len(elem) > 0:
        raise DecodeError("malformed_xml", f"child elements inside {kind} field {name!r}")
    text = elem.text or ""
    if kind == "string":
        return FieldValue("string", text)
    if kind == "number":
        raw = text.strip()
        if not _NUMBER.match(raw):
            raise DecodeError("bad_number", raw)
        value = float(raw)
        if value in (float("inf"), float("-inf")):
            raise DecodeError("bad_number", raw)
        return FieldValue("number", value)
    if kind == "date":
        return FieldValue("date", _parse_timestamp(text.strip()))
    if kind == "blob":
        media = elem.get("media")
        if media is None:
            raise DecodeError("malformed_xml", f"blob field {name!r} without media attribute")
        raw = re.sub(r"\s+", "", text)
        try:
            data = base64.b64decode(raw, validate=True)
        except (ValueError, TypeError):
            raise DecodeError("bad_base64", name) from None
        return FieldValue("blob", data, media)
    raise DecodeError("unknown_kind", kind)


def _decode_fields(parent: ET.Element) -> tuple[tuple[str, FieldValue], ...]:
    fields: list[tuple[str, FieldValue]] = []
    seen: set[str] = set()
    for child in parent:
        if child.tag != "field":
            raise DecodeError("malformed_xml", f"unexpected element <{child.tag}>")
        if not _is_blank(child.tail):
            raise DecodeError("malformed_xml", "text content between fields")
        name = child.get("name")
        if name is None:
            raise DecodeError("malformed_xml", "field without name attribute")
        kind = child.get("kind")
        if kind is None:
            raise DecodeError("malformed_xml", f"field {name!r} without kind attribute")
        if name in seen:
            raise DecodeError("duplicate_field", name)
        seen.add(name)
        fields.append((name, _decode_value(child, kind, name)))
    return tuple(fields)


def decode(doc: bytes | str) -> EventEnvelope:
    """Parse a wire document back into an envelope.

    Rejects anything outside the grammar with a DecodeError and never returns
    a partial result. decode(encode(e)) == e for every valid envelope.
    """
    try:
        root = ET.fromstring(doc)
    except ET.ParseError as exc:
        raise DecodeError("malformed_xml", str(exc)) from None
    if root.tag != "event":
        raise DecodeError("malformed_xml", f"root element <{root.tag}>, expected <event>")
    event_type = root.get("type")
    if event_type is None:
        raise DecodeError("malformed_xml", "event without type attribute")
    ts_raw = root.get("ts")
    if ts_raw is None:
        raise DecodeError("malformed_xml", "event without ts attribute")
    if not _is_blank(root.text):
        raise DecodeError("malformed_xml", "text content inside <event>")
    return EventEnvelope(
        event_type=event_type,
        client_timestamp=_parse_timestamp(ts_raw),
        exercise=root.get("exercise", ""),
        fields=_decode_fields(root),
    )

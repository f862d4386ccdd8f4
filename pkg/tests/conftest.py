"""Shared fixtures: deterministic envelope generators and activity configs.

Also prints one PASS/FAIL line per acceptance criterion when the acceptance
module ran (see pytest_terminal_summary at the bottom).
"""

from __future__ import annotations

import hashlib
import random
from datetime import datetime, timedelta, timezone

import pytest

from learnlog import ActivityConfig, EventEnvelope, FieldValue
from learnlog.triggers import TriggerBinding

TEST_SALT = bytes.fromhex("000102030405060708090a0b0c0d0e0f")
TEST_KEY = bytes.fromhex("aa" * 32)
ORIGIN = "https://lms.example.edu"
TEACHER = "teacher@example.edu"

BASE_TS = datetime(2012, 1, 15, 10, 0, tzinfo=timezone.utc)


def independent_hmac_sha256(key: bytes, msg: bytes) -> bytes:
    """RFC 2104 from raw SHA-256; the oracle for everything the package signs."""
    block = 64
    if len(key) > block:
        key = hashlib.sha256(key).digest()
    key = key + b"\x00" * (block - len(key))
    ipad = bytes(b ^ 0x36 for b in key)
    opad = bytes(b ^ 0x5C for b in key)
    return hashlib.sha256(opad + hashlib.sha256(ipad + msg).digest()).digest()


def make_activity(
    activity_id: str = "geometry_ws11",
    teachers: tuple[str, ...] = (TEACHER,),
    with_trigger: bool = True,
    exercises: tuple[str, ...] = ("ex01", "ex02", "ex03"),
) -> ActivityConfig:
    bindings = (
        (TriggerBinding(activity_id=activity_id, event_type_pattern="helprequest"),)
        if with_trigger
        else ()
    )
    return ActivityConfig(
        activity_id=activity_id,
        course_label="Basic Mathematics WS 2011/12",
        application_key=TEST_KEY,
        host_whitelist=(ORIGIN,),
        pseudonym_salt=TEST_SALT,
        teacher_principals=teachers,
        trigger_bindings=bindings,
        exercise_order=exercises,
    )


@pytest.fixture
def activity() -> ActivityConfig:
    return make_activity()


# --- random envelope generation (seeded, shared by codec fuzz and store fixtures)

_TEXT_CHARS = (
    "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789 "
    "<>&\"'\t\n\r.,;:!?-_/()[]{}"
    "äöüßéèñ漢字€\U0001f600퟿"
)

_MEDIA_TYPES = ("image/png", "image/jpeg", "application/octet-stream", "text/plain")


def random_text(rng: random.Random, max_len: int = 20) -> str:
    return "".join(rng.choice(_TEXT_CHARS) for _ in range(rng.randrange(max_len + 1)))


def random_token(rng: random.Random) -> str:
    def segment() -> str:
        head = rng.choice("abcdefghijklmnopqrstuvwxyz")
        tail = "".join(
            rng.choice("abcdefghijklmnopqrstuvwxyz0123456789_")
            for _ in range(rng.randrange(6))
        )
        return head + tail

    return ".".join(segment() for _ in range(rng.randrange(1, 4)))


def random_number(rng: random.Random) -> float:
    pick = rng.randrange(6)
    if pick == 0:
        return 0.0
    if pick == 1:
        return float(rng.randrange(-(10**9), 10**9))
    if pick == 2:
        return rng.uniform(-1e6, 1e6)
    if pick == 3:
        return rng.random() * 10 ** rng.randrange(-300, 300)
    if pick == 4:
        return -rng.random()
    return rng.uniform(-1.0, 1.0) * 2 ** rng.randrange(-60, 60)


def random_instant(rng: random.Random) -> datetime:
    return BASE_TS + timedelta(
        days=rng.randrange(-3650, 3650),
        seconds=rng.randrange(86400),
        microseconds=rng.randrange(1000) * 1000,
    )


def random_field_value(rng: random.Random, depth: int = 0) -> FieldValue:
    kinds = ["string", "number", "date", "blob"]
    if depth < 3:
        kinds.append("kvlist")
    kind = rng.choice(kinds)
    if kind == "string":
        return FieldValue.string(random_text(rng))
    if kind == "number":
        return FieldValue.number(random_number(rng))
    if kind == "date":
        return FieldValue.date(random_instant(rng))
    if kind == "blob":
        return FieldValue.blob(rng.randbytes(rng.randrange(48)), rng.choice(_MEDIA_TYPES))
    pairs = []
    used = set()
    for _ in range(rng.randrange(4)):
        key = random_text(rng, 8) or "k"
        if key in used:
            continue
        used.add(key)
        pairs.append((key, random_field_value(rng, depth + 1)))
    return FieldValue.kvlist(pairs)


def random_envelope(rng: random.Random) -> EventEnvelope:
    fields = []
    used = set()
    for _ in range(rng.randrange(7)):
        name = random_text(rng, 10) or "f"
        if name in used:
            continue
        used.add(name)
        fields.append((name, random_field_value(rng)))
    return EventEnvelope(
        event_type=random_token(rng),
        client_timestamp=random_instant(rng),
        exercise=random_text(rng, 12),
        fields=tuple(fields),
    )


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    results = []
    for outcome in ("passed", "failed", "error"):
        for report in terminalreporter.stats.get(outcome, []):
            if getattr(report, "when", "call") != "call":
                continue
            if "test_acceptance" not in report.nodeid:
                continue
            name = report.nodeid.split("::")[-1]
            results.append((name, outcome == "passed"))
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for name, ok in results:
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {name}")

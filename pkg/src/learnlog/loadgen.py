"""Seeded synthetic dataset generator.

Produces exact requested totals (users, sessions, events, help requests) over
the five built-in event types, with per-exercise feedback verdicts following a
declining success curve: heavy, mostly successful traffic on early exercises,
sparse and failing attempts on late ones. A fixed seed yields a bit-identical
dataset in direct-store mode; against an HTTP target the server assigns its
own clock and session ids, so only the totals are reproducible there.
"""

from __future__ import annotations

import json
import random
import secrets
import urllib.request
from dataclasses import dataclass, field
from datetime import datetime, timedelta, timezone
from urllib.parse import urlencode

from . import wire
from .auth import ActivityConfig, VerifiedLaunch, create_session, sign_launch
from .events import EventEnvelope, FieldValue, validate
from .store import EventStore
from .timefmt import format_instant, utc_now

DEFAULT_EXERCISES = tuple(f"ex{i:02d}" for i in range(1, 13))

_ACTION_TEMPLATES = (
    "created point P{a} in domain {d}",
    "linked P{a} to P{b}",
    "moved point P{a}",
    "selected rule {d}",
    "rewrote term on line {d}",
    "opened hint panel",
    "reset the exercise",
)

_QUESTION_TEMPLATES = (
    "why is step {d} not accepted?",
    "is there another way to link P{a}?",
    "what does the marker on line {d} mean?",
)

_HELP_TEMPLATES = (
    "I am stuck after step {d}, why is this wrong?",
    "the feedback says failure but I cannot see the mistake",
    "how do I finish this exercise from here?",
)

_FEEDBACK_MESSAGES = {
    "success": ("all conditions satisfied", "proof complete", "correct mapping"),
    "failure": ("base case missing", "mapping is not injective", "term does not match"),
    "partial": ("induction step incomplete", "one pair still unlinked"),
}

# Tiny valid-enough PNG header + seeded noise; stands in for a screenshot.
_PNG_MAGIC = b"\x89PNG\r\n\x1a\n"


@dataclass(frozen=True)
class LoadProfile:
    users: int = 156
    sessions: int = 965
    events: int = 24655
    help_requests: int = 11
    seed: int = 1
    exercises: tuple[str, ...] = DEFAULT_EXERCISES
    start: datetime = datetime(2011, 11, 1, 8, 0, tzinfo=timezone.utc)
    span_days: int = 120
    success_base: float = 0.85
    success_decay: float = 0.08

    def __post_init__(self) -> None:
        if self.sessions < self.users:
            raise ValueError("need at least one session per user (sessions >= users)")
        if self.help_requests > self.events:
            raise ValueError("help_requests cannot exceed events")
        if self.users == 0 and self.sessions > 0:
            raise ValueError("sessions without users")
        if self.events > 0 and self.sessions == 0:
            raise ValueError("events without sessions")


@dataclass(frozen=True)
class PlannedEvent:
    ts: datetime
    envelope: EventEnvelope


@dataclass(frozen=True)
class PlannedSession:
    user_ref: str
    learner_email: str
    started_at: datetime
    events: tuple[PlannedEvent, ...] = field(default_factory=tuple)


def _exercise_weights(count: int) -> list[float]:
    # Early exercises draw most attempts; involvement decays geometrically.
    return [0.72**i for i in range(count)]


def _pick_verdict(rng: random.Random, exercise_index: int, profile: LoadProfile) -> str:
    p_success = max(0.05, profile.success_base - profile.success_decay * exercise_index)
    roll = rng.random()
    if roll < p_success:
        return "success"
    if rng.random() < 0.8:
        return "failure"
    return "partial"


def _fill(template: str, rng: random.Random) -> str:
    return template.format(
        a=rng.randrange(1, 9), b=rng.randrange(1, 9), d=rng.randrange(1, 6)
    )


def _make_envelope(
    rng: random.Random,
    ts: datetime,
    exercise: str,
    exercise_index: int,
    is_help: bool,
    learner_email: str,
    profile: LoadProfile,
) -> EventEnvelope:
    if is_help:
        fields = [
            ("question_text", FieldValue.string(_fill(rng.choice(_HELP_TEMPLATES), rng))),
            ("learner_email", FieldValue.string(learner_email)),
        ]
        if rng.random() < 0.5:
            fields.append(
                ("snapshot", FieldValue.blob(_PNG_MAGIC + rng.randbytes(24), "image/png"))
            )
        return EventEnvelope("helprequest", ts, exercise, tuple(fields))
    kind = rng.choices(
        ("action", "feedback", "question", "image"), weights=(62, 28, 6, 4)
    )[0]
    if kind == "action":
        fields = [("action_name", FieldValue.string(_fill(rng.choice(_ACTION_TEMPLATES), rng)))]
    elif kind == "feedback":
        verdict = _pick_verdict(rng, exercise_index, profile)
        fields = [
            ("verdict", FieldValue.string(verdict)),
            ("message", FieldValue.string(rng.choice(_FEEDBACK_MESSAGES[verdict]))),
        ]
    elif kind == "question":
        fields = [("question_text", FieldValue.string(_fill(rng.choice(_QUESTION_TEMPLATES), rng)))]
    else:
        fields = [("image", FieldValue.blob(_PNG_MAGIC + rng.randbytes(32), "image/png"))]
    return EventEnvelope(kind, ts, exercise, tuple(fields))


def plan(profile: LoadProfile) -> list[PlannedSession]:
    """Deterministic dataset plan: exact totals, seeded content."""
    rng = random.Random(profile.seed)
    owners = list(range(profile.users))
    owners += [rng.randrange(profile.users) for _ in range(profile.sessions - profile.users)]

    counts = [0] * profile.sessions
    for _ in range(profile.events):
        counts[rng.randrange(profile.sessions)] += 1

    help_slots: set[tuple[int, int]] = set()
    if profile.help_requests:
        offsets = [0] * profile.sessions
        total = 0
        for i, c in enumerate(counts):
            offsets[i] = total
            total += c
        chosen = rng.sample(range(profile.events), profile.help_requests)
        for global_slot in chosen:
            lo, hi = 0, profile.sessions - 1
            while lo < hi:
                mid = (lo + hi + 1) // 2
                if offsets[mid] <= global_slot:
                    lo = mid
                else:
                    hi = mid - 1
            help_slots.add((lo, global_slot - offsets[lo]))

    planned: list[PlannedSession] = []
    weights = _exercise_weights(len(profile.exercises))
    for i in range(profile.sessions):
        user = owners[i]
        started = profile.start + timedelta(
            seconds=rng.randrange(profile.span_days * 24 * 3600)
        )
        exercise_index = rng.choices(range(len(profile.exercises)), weights=weights)[0]
        learner_email = f"student{user:04d}@students.example.edu"
        events = []
        ts = started
        for slot in range(counts[i]):
            ts = ts + timedelta(seconds=rng.randrange(3, 180))
            if rng.random() < 0.12:  # occasionally move to another exercise
                exercise_index = rng.choices(range(len(profile.exercises)), weights=weights)[0]
            exercise = profile.exercises[exercise_index]
            events.append(
                PlannedEvent(
                    ts,
                    _make_envelope(
                        rng, ts, exercise, exercise_index,
                        (i, slot) in help_slots, learner_email, profile,
                    ),
                )
            )
        planned.append(
            PlannedSession(
                user_ref=f"user-{user:04d}@lms.example.edu",
                learner_email=learner_email,
                started_at=started,
                events=tuple(events),
            )
        )
    return planned


def populate_store(
    store: EventStore, cfg: ActivityConfig, profile: LoadProfile
) -> dict[str, int]:
    """Write the planned dataset straight into a store; session ids and server
    timestamps come from the seeded plan, so exports are byte-identical per seed."""
    rng = random.Random(profile.seed ^ 0x5EED)
    store.register_activity(cfg.activity_id)
    planned = plan(profile)
    for ps in planned:
        verified = VerifiedLaunch(
            activity_id=cfg.activity_id,
            user_ref=ps.user_ref,
            issued_at=ps.started_at,
            origin=cfg.host_whitelist[0],
            opt_out=False,
        )
        session = create_session(
            verified, cfg, ps.started_at, id_factory=lambda: f"{rng.getrandbits(128):032x}"
        )
        store.add_session(session)
        for ev in ps.events:
            store.append(session.session_id, validate(ev.envelope), now=ev.ts)
    return store.activity_totals(cfg.activity_id)


def populate_http(
    base_url: str, cfg: ActivityConfig, profile: LoadProfile
) -> dict[str, int]:
    """Drive a running server over HTTP: signed launches, one XML document per
    event POST. Launch timestamps must be fresh, so the synthetic timeline is
    compressed to the server's wall clock."""
    base = base_url.rstrip("/")
    totals = {"users": 0, "sessions": 0, "events": 0, "help_requests": 0}
    seen_users: set[str] = set()
    for ps in plan(profile):
        issued_at = utc_now()
        nonce = secrets.token_hex(16)
        origin = cfg.host_whitelist[0]
        signature = sign_launch(
            cfg.activity_id, ps.user_ref, issued_at, nonce, origin, False,
            cfg.application_key,
        )
        form = {
            "user_ref": ps.user_ref,
            "issued_at": format_instant(issued_at),
            "nonce": nonce,
            "origin": origin,
            "opt_out": "false",
            "signature": signature,
        }
        req = urllib.request.Request(
            f"{base}/activities/{cfg.activity_id}/sessions",
            data=urlencode(form).encode("ascii"),
            headers={"Content-Type": "application/x-www-form-urlencoded"},
        )
        with urllib.request.urlopen(req) as resp:
            session_id = json.loads(resp.read())["session_id"]
        seen_users.add(ps.user_ref)
        totals["sessions"] += 1
        for ev in ps.events:
            doc = wire.encode(ev.envelope)
            post = urllib.request.Request(
                f"{base}/sessions/{session_id}/events",
                data=doc,
                headers={"Content-Type": "application/xml"},
            )
            with urllib.request.urlopen(post):
                pass
            totals["events"] += 1
            if ev.envelope.event_type == "helprequest":
                totals["help_requests"] += 1
    totals["users"] = len(seen_users)
    return totals

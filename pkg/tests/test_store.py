from __future__ import annotations

import json
import random
import threading
from datetime import datetime, timedelta

import pytest

from learnlog import (
    DISCARDED,
    AggregateFilter,
    EventEnvelope,
    EventStore,
    FieldValue,
    Pseudonym,
    Session,
    match_type,
    validate,
)
from learnlog.store import CorruptLog, CorruptStream, UnknownActivity, UnknownSession
from tests.conftest import BASE_TS

ACTIVITY = "geometry_ws11"


def make_session(sid: str, pseudonym: str = "000000000001", opt_out: bool = False,
                 started: datetime = BASE_TS, activity: str = ACTIVITY) -> Session:
    return Session(
        session_id=sid,
        activity_id=activity,
        pseudonym=Pseudonym(pseudonym),
        started_at=started,
        opt_out=opt_out,
    )


def action(text="did something", exercise="ex01", ts=BASE_TS) -> EventEnvelope:
    return EventEnvelope("action", ts, exercise, (("action_name", FieldValue.string(text)),))


def feedback(verdict, exercise="ex01", ts=BASE_TS) -> EventEnvelope:
    return EventEnvelope(
        "feedback",
        ts,
        exercise,
        (
            ("verdict", FieldValue.string(verdict)),
            ("message", FieldValue.string("msg")),
        ),
    )


def fresh_store() -> EventStore:
    store = EventStore.in_memory()
    store.register_activity(ACTIVITY)
    return store


def test_append_assigns_gap_free_seqs():
    store = fresh_store()
    store.add_session(make_session("s1"))
    seqs = [store.append("s1", validate(action()), now=BASE_TS).seq for _ in range(3)]
    assert seqs == [1, 2, 3]


def test_append_unknown_session():
    store = fresh_store()
    with pytest.raises(UnknownSession):
        store.append("nope", validate(action()))


def test_opt_out_append_discarded_and_invisible():
    store = fresh_store()
    store.add_session(make_session("s1", opt_out=True))
    assert store.append("s1", validate(action()), now=BASE_TS) is DISCARDED
    assert store.session_events("s1") == []
    assert store.count_events(AggregateFilter(activity_id=ACTIVITY)) == 0
    assert store.list_users(ACTIVITY) == []
    assert store.list_sessions(ACTIVITY) == []
    assert store.activity_totals(ACTIVITY)["sessions"] == 0
    assert store.opt_out_stats(ACTIVITY) == (1, 1)


def test_session_events_until_prefix():
    store = fresh_store()
    store.add_session(make_session("s1"))
    for i in range(5):
        store.append("s1", validate(action(f"step {i}")), now=BASE_TS)
    assert [e.seq for e in store.session_events("s1", until=3)] == [1, 2, 3]
    assert store.session_events("s1", until=0) == []
    assert [e.seq for e in store.session_events("s1")] == [1, 2, 3, 4, 5]


def test_server_timestamp_non_decreasing_with_backwards_clock():
    store = fresh_store()
    store.add_session(make_session("s1"))
    store.append("s1", validate(action()), now=BASE_TS + timedelta(seconds=10))
    store.append("s1", validate(action()), now=BASE_TS)  # clock jumped back
    events = store.session_events("s1")
    assert events[1].server_timestamp >= events[0].server_timestamp


def test_list_users_groups_and_sorts():
    store = fresh_store()
    store.add_session(make_session("s1", pseudonym="000000000001", started=BASE_TS))
    store.add_session(
        make_session("s2", pseudonym="000000000001", started=BASE_TS + timedelta(hours=1))
    )
    store.add_session(
        make_session("s3", pseudonym="000000000002", started=BASE_TS + timedelta(hours=2))
    )
    rows = store.list_users(ACTIVITY)
    assert [(r.pseudonym, r.session_count) for r in rows] == [
        ("000000000002", 1),
        ("000000000001", 2),
    ]


def test_list_users_unknown_activity():
    store = fresh_store()
    with pytest.raises(UnknownActivity):
        store.list_users("missing")
    assert store.list_users(ACTIVITY) == []


def test_list_users_ten_by_three_fixture():
    store = fresh_store()
    expected = {}
    for u in range(10):
        digits = f"{u:012d}"
        for k in range(3):
            sid = f"s{u}_{k}"
            store.add_session(
                make_session(sid, pseudonym=digits, started=BASE_TS + timedelta(minutes=u * 3 + k))
            )
        expected[digits] = 3
    rows = store.list_users(ACTIVITY)
    assert len(rows) == 10
    assert {r.pseudonym: r.session_count for r in rows} == expected


def test_list_sessions_pagination_most_recent_first():
    store = fresh_store()
    for i in range(5):
        store.add_session(
            make_session(f"s{i}", started=BASE_TS + timedelta(minutes=i))
        )
        store.append(f"s{i}", validate(action()), now=BASE_TS + timedelta(minutes=i))
    rows = store.list_sessions(ACTIVITY, offset=0, limit=1)
    assert rows[0].session_id == "s4"
    assert rows[0].event_count == 1
    assert store.list_sessions(ACTIVITY, offset=10, limit=5) == []
    everything = store.list_sessions(ACTIVITY)
    assert [r.session_id for r in everything] == ["s4", "s3", "s2", "s1", "s0"]
    by_user = store.list_sessions(ACTIVITY, pseudonym="000000000001")
    assert len(by_user) == 5


def test_count_events_empty_store():
    store = fresh_store()
    assert store.count_events(AggregateFilter(activity_id=ACTIVITY)) == 0
    assert store.count_events(AggregateFilter(activity_id="unregistered")) == 0


def test_aggregate_filter_validates_range():
    with pytest.raises(ValueError):
        AggregateFilter(activity_id=ACTIVITY, start=BASE_TS, end=BASE_TS - timedelta(seconds=1))


def test_exercise_stats_counts_verdicts():
    store = fresh_store()
    store.add_session(make_session("s1"))
    for verdict in ("success", "failure", "partial"):
        store.append("s1", validate(feedback(verdict, exercise="ex01")), now=BASE_TS)
    stats = store.exercise_stats(ACTIVITY)
    cell = stats[("000000000001", "ex01")]
    assert (cell.attempts, cell.successes, cell.failures) == (3, 1, 1)
    assert ("000000000001", "ex02") not in stats


def test_timeline_single_event():
    store = fresh_store()
    store.add_session(make_session("s1"))
    store.append("s1", validate(action()), now=BASE_TS)
    buckets = store.timeline(ACTIVITY, "day")
    assert len(buckets) == 1
    assert (buckets[0].event_count, buckets[0].session_count) == (1, 1)
    assert buckets[0].bucket_start == BASE_TS.replace(hour=0, minute=0, second=0, microsecond=0)


def test_timeline_empty_range():
    store = fresh_store()
    store.add_session(make_session("s1"))
    store.append("s1", validate(action()), now=BASE_TS)
    assert store.timeline(ACTIVITY, "day", start=BASE_TS, end=BASE_TS) == []


def test_events_by_type_pattern_and_paging():
    store = fresh_store()
    store.add_session(make_session("s1"))
    store.append("s1", validate(action()), now=BASE_TS)
    store.append(
        "s1",
        validate(
            EventEnvelope(
                "cominm.rewrite", BASE_TS, "ex01", (("term", FieldValue.string("n+1")),)
            )
        ),
        now=BASE_TS,
    )
    store.append(
        "s1",
        validate(
            EventEnvelope(
                "cominm.submit", BASE_TS, "ex01", ()
            )
        ),
        now=BASE_TS,
    )
    assert len(store.events_by_type(ACTIVITY, "cominm.*")) == 2
    assert len(store.events_by_type(ACTIVITY, "action")) == 1
    assert store.events_by_type(ACTIVITY, "question") == []
    paged = store.events_by_type(ACTIVITY, "cominm.*", offset=1, limit=5)
    assert len(paged) == 1


# --- randomized fixtures vs brute-force oracles ---------------------------------

VERDICTS = ("success", "failure", "partial")


def build_random_fixture(store, rng, n_users=20, n_sessions=40, n_events=400):
    """Insert a random dataset; return the independent source-of-truth list
    [(session, [stored-shape dicts])] built while generating, not from reads."""
    source = []
    for i in range(n_sessions):
        digits = f"{rng.randrange(n_users):012d}"
        started = BASE_TS + timedelta(minutes=rng.randrange(10000))
        session = make_session(f"s{i:03d}", pseudonym=digits, started=started)
        store.add_session(session)
        events = []
        ts = started
        for _ in range(rng.randrange(2 * n_events // n_sessions + 1)):
            ts = ts + timedelta(seconds=rng.randrange(1, 500))
            kind = rng.choice(("action", "feedback", "question", "custom.thing"))
            exercise = rng.choice(("ex01", "ex02", "ex03", ""))
            if kind == "feedback":
                env = feedback(rng.choice(VERDICTS), exercise=exercise, ts=ts)
            elif kind == "question":
                env = EventEnvelope(
                    "question", ts, exercise, (("question_text", FieldValue.string("q?")),)
                )
            elif kind == "custom.thing":
                env = EventEnvelope("custom.thing", ts, exercise, ())
            else:
                env = action("a", exercise=exercise, ts=ts)
            result = store.append(session.session_id, validate(env), now=ts)
            events.append({"seq": result.seq, "ts": ts, "env": env})
        source.append((session, events))
    return source


def oracle_count(source, flt: AggregateFilter) -> int:
    total = 0
    for session, events in source:
        if session.activity_id != flt.activity_id:
            continue
        for ev in events:
            if flt.pseudonym is not None and session.pseudonym.digits != flt.pseudonym:
                continue
            if flt.event_type_pattern is not None and not match_type(
                ev["env"].event_type, flt.event_type_pattern
            ):
                continue
            if flt.exercise is not None and ev["env"].exercise != flt.exercise:
                continue
            if flt.start is not None and ev["ts"] < flt.start:
                continue
            if flt.end is not None and ev["ts"] >= flt.end:
                continue
            total += 1
    return total


def oracle_matrix(source):
    out = {}
    for session, events in source:
        for ev in events:
            env = ev["env"]
            if not (env.event_type == "feedback" or env.event_type.startswith("feedback.")):
                continue
            key = (session.pseudonym.digits, env.exercise)
            attempts, succ, fail, last = out.get(key, (0, 0, 0, None))
            verdict = env.field_value("verdict")
            v = verdict.value if verdict is not None else ""
            out[key] = (
                attempts + 1,
                succ + (v == "success"),
                fail + (v == "failure"),
                ev["ts"] if last is None else max(last, ev["ts"]),
            )
    return out


def oracle_users(source):
    out = {}
    for session, events in source:
        last = max((ev["ts"] for ev in events), default=session.started_at)
        count, prev = out.get(session.pseudonym.digits, (0, last))
        out[session.pseudonym.digits] = (count + 1, max(prev, last))
    return out


def _floor(ts, bucket):
    day = ts.replace(hour=0, minute=0, second=0, microsecond=0)
    if bucket == "hour":
        return ts.replace(minute=0, second=0, microsecond=0)
    if bucket == "day":
        return day
    return day - timedelta(days=day.weekday())


def oracle_timeline(source, bucket, start=None, end=None):
    agg = {}
    for session, events in source:
        for ev in events:
            if start is not None and ev["ts"] < start:
                continue
            if end is not None and ev["ts"] >= end:
                continue
            key = _floor(ev["ts"], bucket)
            count, sessions = agg.get(key, (0, set()))
            sessions.add(session.session_id)
            agg[key] = (count + 1, sessions)
    return {k: (c, len(s)) for k, (c, s) in agg.items()}


def test_aggregates_match_oracle_on_random_fixtures():
    rng = random.Random(4242)
    for round_no in range(5):
        store = fresh_store()
        source = build_random_fixture(store, rng)

        filters = [
            AggregateFilter(activity_id=ACTIVITY),
            AggregateFilter(activity_id=ACTIVITY, event_type_pattern="feedback"),
            AggregateFilter(activity_id=ACTIVITY, event_type_pattern="custom.*"),
            AggregateFilter(activity_id=ACTIVITY, exercise="ex02"),
            AggregateFilter(activity_id=ACTIVITY, pseudonym=f"{rng.randrange(20):012d}"),
            AggregateFilter(
                activity_id=ACTIVITY,
                start=BASE_TS + timedelta(minutes=1000),
                end=BASE_TS + timedelta(minutes=7000),
            ),
            AggregateFilter(
                activity_id=ACTIVITY,
                event_type_pattern="feedback.*",
                exercise="ex01",
                start=BASE_TS,
                end=BASE_TS + timedelta(minutes=9000),
            ),
        ]
        for flt in filters:
            assert store.count_events(flt) == oracle_count(source, flt)

        stats = store.exercise_stats(ACTIVITY)
        expected = oracle_matrix(source)
        assert set(stats) == set(expected)
        for key, (attempts, succ, fail, last) in expected.items():
            cell = stats[key]
            assert (cell.attempts, cell.successes, cell.failures, cell.last_attempt_at) == (
                attempts, succ, fail, last,
            )

        users = store.list_users(ACTIVITY)
        expected_users = oracle_users(source)
        assert {r.pseudonym: (r.session_count, r.last_active) for r in users} == expected_users
        assert [r.last_active for r in users] == sorted(
            [r.last_active for r in users], reverse=True
        )

        for bucket in ("hour", "day", "week"):
            got = {
                b.bucket_start: (b.event_count, b.session_count)
                for b in store.timeline(ACTIVITY, bucket)
            }
            assert got == oracle_timeline(source, bucket)


# --- durability -------------------------------------------------------------------

def test_file_backend_survives_reopen_without_close(tmp_path):
    path = tmp_path / "events.log"
    store = EventStore.open(str(path))
    store.register_activity(ACTIVITY)
    store.add_session(make_session("s1"))
    for i in range(10):
        store.append("s1", validate(action(f"step {i}")), now=BASE_TS)
    # crash: no close(), reopen the same file
    reopened = EventStore.open(str(path))
    events = reopened.session_events("s1")
    assert [e.seq for e in events] == list(range(1, 11))
    assert events[3].envelope.field_value("action_name").value == "step 3"
    assert reopened.get_session("s1").pseudonym.digits == "000000000001"


def test_file_backend_tolerates_torn_final_write(tmp_path):
    path = tmp_path / "events.log"
    store = EventStore.open(str(path))
    store.register_activity(ACTIVITY)
    store.add_session(make_session("s1"))
    store.append("s1", validate(action()), now=BASE_TS)
    store.close()
    with open(path, "ab") as fh:
        fh.write(b'{"t":"event","session_id":"s1","se')  # torn, no newline
    reopened = EventStore.open(str(path))
    assert len(reopened.session_events("s1")) == 1


def test_file_backend_rejects_mid_file_corruption(tmp_path):
    path = tmp_path / "events.log"
    store = EventStore.open(str(path))
    store.register_activity(ACTIVITY)
    store.add_session(make_session("s1"))
    store.append("s1", validate(action()), now=BASE_TS)
    store.close()
    data = path.read_bytes().split(b"\n")
    data[0] = b"garbage{{{"
    path.write_bytes(b"\n".join(data))
    with pytest.raises(CorruptLog):
        EventStore.open(str(path))


def test_redaction_persists_and_leaves_no_trace(tmp_path):
    path = tmp_path / "events.log"
    store = EventStore.open(str(path))
    store.register_activity(ACTIVITY)
    store.add_session(make_session("s1"))
    env = EventEnvelope(
        "helprequest",
        BASE_TS,
        "ex01",
        (
            ("question_text", FieldValue.string("help?")),
            ("learner_email", FieldValue.string("learner@students.example.edu")),
        ),
    )
    store.append("s1", validate(env), now=BASE_TS)
    scrubbed = store.apply_redaction("s1", 1, ["learner_email"])
    assert scrubbed.envelope.field_value("learner_email") is None
    assert scrubbed.redactions == ("learner_email",)
    again = store.apply_redaction("s1", 1, ["learner_email"])
    assert again == scrubbed
    store.close()

    # redaction compacts the log: no trace of the address anywhere on disk
    assert b"learner@students.example.edu" not in path.read_bytes()

    reopened = EventStore.open(str(path))
    stored = reopened.session_events("s1")[0]
    assert stored.envelope.field_value("learner_email") is None
    assert stored.redactions == ("learner_email",)
    export = "\n".join(reopened.export_all(ACTIVITY))
    assert "learner@students.example.edu" not in export


def test_concurrent_appends_across_sessions_gap_free():
    store = fresh_store()
    n_sessions, per_session = 8, 50
    for i in range(n_sessions):
        store.add_session(make_session(f"s{i}"))

    def worker(sid):
        for k in range(per_session):
            store.append(sid, validate(action(f"e{k}")), now=BASE_TS)

    threads = [threading.Thread(target=worker, args=(f"s{i}",)) for i in range(n_sessions)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    for i in range(n_sessions):
        seqs = [e.seq for e in store.session_events(f"s{i}")]
        assert seqs == list(range(1, per_session + 1))


# --- export / import ------------------------------------------------------------------

def populated_store(rng=None):
    store = fresh_store()
    rng = rng or random.Random(11)
    build_random_fixture(store, rng, n_users=5, n_sessions=10, n_events=80)
    return store


def test_export_import_round_trip_identity():
    store = populated_store()
    lines = list(store.export_all(ACTIVITY))
    rebuilt = EventStore.import_stream(lines)
    assert list(rebuilt.export_all(ACTIVITY)) == lines  # byte-identical re-export
    for row in store.list_sessions(ACTIVITY):
        orig = store.session_events(row.session_id)
        copy = rebuilt.session_events(row.session_id)
        assert orig == copy
        assert rebuilt.get_session(row.session_id) == store.get_session(row.session_id)
    assert rebuilt.activity_totals(ACTIVITY) == store.activity_totals(ACTIVITY)


def test_export_import_preserves_redactions():
    store = fresh_store()
    store.add_session(make_session("s1"))
    env = EventEnvelope(
        "helprequest",
        BASE_TS,
        "ex01",
        (
            ("question_text", FieldValue.string("help?")),
            ("learner_email", FieldValue.string("x@y.de")),
        ),
    )
    store.append("s1", validate(env), now=BASE_TS)
    store.apply_redaction("s1", 1, ["learner_email"])
    rebuilt = EventStore.import_stream(list(store.export_all(ACTIVITY)))
    stored = rebuilt.session_events("s1")[0]
    assert stored.redactions == ("learner_email",)
    assert stored.envelope.field_value("learner_email") is None


def test_import_truncated_stream_rejected():
    store = populated_store()
    lines = list(store.export_all(ACTIVITY))
    with pytest.raises(CorruptStream):
        EventStore.import_stream(lines[:-1])  # missing end marker
    with pytest.raises(CorruptStream) as exc:
        EventStore.import_stream(lines[: len(lines) // 2])
    assert exc.value.position >= 1


def test_import_garbage_line_reports_position():
    store = populated_store()
    lines = list(store.export_all(ACTIVITY))
    lines[2] = "{broken json"
    with pytest.raises(CorruptStream) as exc:
        EventStore.import_stream(lines)
    assert exc.value.position == 3


def test_import_records_after_end_rejected():
    store = populated_store()
    lines = list(store.export_all(ACTIVITY))
    lines.append(lines[1])
    with pytest.raises(CorruptStream):
        EventStore.import_stream(lines)


def test_import_into_file_backend(tmp_path):
    store = populated_store()
    lines = list(store.export_all(ACTIVITY))
    path = tmp_path / "rebuilt.log"
    rebuilt = EventStore.import_stream(lines, path=str(path))
    rebuilt.close()
    reopened = EventStore.open(str(path))
    assert list(reopened.export_all(ACTIVITY)) == lines


def test_export_unknown_activity():
    store = fresh_store()
    with pytest.raises(UnknownActivity):
        list(store.export_all("missing"))

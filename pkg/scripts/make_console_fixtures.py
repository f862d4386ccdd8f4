#!/usr/bin/env python3
"""Regenerate frontend test fixtures: real API responses over a seeded
loadgen dataset, with help requests dispatched so redaction state is the
steady state the console actually sees. Deterministic; safe to re-run."""

import json
import sys
import tempfile
from datetime import timedelta
from pathlib import Path

from fastapi.testclient import TestClient

from learnlog import EventStore, issue_viewer_token
from learnlog.config import MailSettings, ServiceConfig
from learnlog.loadgen import LoadProfile, populate_store
from learnlog.server import create_app
from learnlog.triggers import OutboxGateway, TriggerDispatcher

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "tests"))
from conftest import make_activity  # noqa: E402

OUT = Path(__file__).resolve().parent.parent / "frontend" / "test" / "fixtures"
ACTIVITY = "geometry_ws11"
SECRET = b"fixture-secret"
PROFILE = LoadProfile(users=6, sessions=14, events=120, help_requests=3, seed=20120115)
NOW = PROFILE.start + timedelta(days=PROFILE.span_days)


def main() -> None:
    OUT.mkdir(parents=True, exist_ok=True)
    tmp = Path(tempfile.mkdtemp(prefix="console-fixtures-"))
    activity = make_activity(exercises=tuple(f"ex{i:02d}" for i in range(1, 13)))

    store = EventStore.in_memory()
    populate_store(store, activity, PROFILE)

    # run the send-mail workflow so learner addresses are in post-dispatch state
    outbox = OutboxGateway(tmp / "outbox")
    dispatcher = TriggerDispatcher(
        store, outbox, "http://localhost:8800", {ACTIVITY: activity}, workers=1
    )
    for stored in store.events_by_type(ACTIVITY, "helprequest"):
        dispatcher.dispatch_sync(stored)
    dispatcher.shutdown()

    cfg = ServiceConfig(
        base_url="http://localhost:8800",
        config_dir=str(tmp),
        identity_secret=SECRET,
        mail=MailSettings(mode="outbox", outbox_dir=str(tmp / "outbox")),
    )
    app = create_app(cfg, activities={ACTIVITY: activity}, store=store, clock=lambda: NOW)
    client = TestClient(app)
    token = issue_viewer_token("teacher@example.edu", NOW + timedelta(days=1), SECRET)
    headers = {"Authorization": f"Bearer {token}"}

    def save(name: str, path: str, with_auth: bool = True) -> dict:
        resp = client.get(path, headers=headers if with_auth else {})
        assert resp.status_code == 200, (path, resp.status_code, resp.text)
        data = resp.json()
        (OUT / f"{name}.json").write_text(json.dumps(data, indent=2) + "\n")
        return data

    save("dashboard", f"/activities/{ACTIVITY}/dashboard")
    save("users", f"/activities/{ACTIVITY}/users")
    sessions = save("sessions", f"/activities/{ACTIVITY}/sessions")
    save("exercise_matrix", f"/activities/{ACTIVITY}/summary/exercises")
    save("timeline", f"/activities/{ACTIVITY}/summary/timeline?bucket=week")
    help_events = save("help_inbox", f"/activities/{ACTIVITY}/events?type=helprequest")

    help_sid = help_events["events"][0]["session_id"]
    help_seq = help_events["events"][0]["seq"]
    save("session_detail", f"/activities/{ACTIVITY}/sessions/{help_sid}")
    save("session_detail_until", f"/activities/{ACTIVITY}/sessions/{help_sid}?until={help_seq}")
    mylog_sid = sessions["sessions"][0]["session_id"]
    save("mylog", f"/mylog/{mylog_sid}", with_auth=False)

    # strings that must never surface in the console DOM
    plan_emails = sorted(
        {f"student{u:04d}@students.example.edu" for u in range(PROFILE.users)}
    )
    (OUT / "forbidden.json").write_text(
        json.dumps(
            {
                "learner_emails": plan_emails,
                "user_refs": [f"user-{u:04d}@lms.example.edu" for u in range(PROFILE.users)],
            },
            indent=2,
        )
        + "\n"
    )
    print(f"fixtures written to {OUT}")


if __name__ == "__main__":
    main()

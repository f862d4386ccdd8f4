from __future__ import annotations

import json

import pytest
from click.testing import CliRunner

from learnlog.cli import main
from learnlog.store import EventStore
from tests.test_config import write_activity

ACTIVITY = "geometry_ws11"


@pytest.fixture
def runner():
    return CliRunner()


def run_loadgen(runner, tmp_path, data_name="events.log", **kw):
    activity_xml = write_activity(tmp_path)
    data = tmp_path / data_name
    args = [
        "loadgen",
        "--users", str(kw.get("users", 4)),
        "--sessions", str(kw.get("sessions", 8)),
        "--events", str(kw.get("events", 60)),
        "--help-requests", str(kw.get("help_requests", 2)),
        "--seed", str(kw.get("seed", 9)),
        "--target", str(data),
        "--activity-config", str(activity_xml),
    ]
    result = runner.invoke(main, args)
    assert result.exit_code == 0, result.output
    return data, result


def test_loadgen_direct_store(runner, tmp_path):
    data, result = run_loadgen(runner, tmp_path)
    assert "users=4 sessions=8 events=60 help_requests=2" in result.output
    store = EventStore.open(str(data))
    assert store.activity_totals(ACTIVITY) == {
        "users": 4, "sessions": 8, "events": 60, "help_requests": 2,
    }
    store.close()


def test_export_then_import_round_trip(runner, tmp_path):
    data, _ = run_loadgen(runner, tmp_path)
    out = tmp_path / "dump.jsonl"
    result = runner.invoke(
        main, ["export", "--activity", ACTIVITY, "--out", str(out), "--data", str(data)]
    )
    assert result.exit_code == 0, result.output
    assert out.exists()

    rebuilt_path = tmp_path / "rebuilt.log"
    result = runner.invoke(
        main, ["import", "--in", str(out), "--data", str(rebuilt_path)]
    )
    assert result.exit_code == 0, result.output

    original = EventStore.open(str(data))
    rebuilt = EventStore.open(str(rebuilt_path))
    assert list(rebuilt.export_all(ACTIVITY)) == list(original.export_all(ACTIVITY))
    original.close()
    rebuilt.close()


def test_import_refuses_existing_store(runner, tmp_path):
    data, _ = run_loadgen(runner, tmp_path)
    out = tmp_path / "dump.jsonl"
    runner.invoke(main, ["export", "--activity", ACTIVITY, "--out", str(out), "--data", str(data)])
    result = runner.invoke(main, ["import", "--in", str(out), "--data", str(data)])
    assert result.exit_code != 0
    assert "refusing" in result.output


def test_import_corrupt_stream_fails_with_position(runner, tmp_path):
    data, _ = run_loadgen(runner, tmp_path)
    out = tmp_path / "dump.jsonl"
    runner.invoke(main, ["export", "--activity", ACTIVITY, "--out", str(out), "--data", str(data)])
    lines = out.read_text().splitlines()
    out.write_text("\n".join(lines[:-1]) + "\n")  # drop the end marker
    target = tmp_path / "x.log"
    result = runner.invoke(main, ["import", "--in", str(out), "--data", str(target)])
    assert result.exit_code != 0
    assert "corrupt stream" in result.output
    assert not target.exists()  # no partial store left behind


def test_export_unknown_activity_fails(runner, tmp_path):
    data, _ = run_loadgen(runner, tmp_path)
    result = runner.invoke(
        main, ["export", "--activity", "missing", "--out", str(tmp_path / "o"), "--data", str(data)]
    )
    assert result.exit_code != 0


def test_serve_rejects_bad_config(runner, tmp_path):
    bad = tmp_path / "service.json"
    bad.write_text(json.dumps({"base_url": "not-absolute", "config_dir": str(tmp_path)}))
    result = runner.invoke(main, ["serve", "--config", str(bad)])
    assert result.exit_code != 0
    assert "base_url" in result.output or "identity" in result.output

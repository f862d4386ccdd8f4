"""Command line entry points: serve, loadgen, export, import."""

from __future__ import annotations

import sys
from pathlib import Path

import click

from .config import ConfigError, load_activity_file, load_service_config
from .loadgen import LoadProfile, populate_http, populate_store
from .store import CorruptStream, EventStore, StoreError


@click.group()
def main() -> None:
    """Pseudonymous action-logging service for web-based learning tools."""


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
def serve(config_path: str) -> None:
    """Run the HTTP service."""
    import uvicorn

    from .server import create_app

    try:
        cfg = load_service_config(config_path)
        app = create_app(cfg)
    except ConfigError as exc:
        raise click.ClickException(str(exc))
    uvicorn.run(app, host=cfg.listen_host, port=cfg.listen_port)


@main.command()
@click.option("--users", default=156, show_default=True)
@click.option("--sessions", default=965, show_default=True)
@click.option("--events", default=24655, show_default=True)
@click.option("--help-requests", default=11, show_default=True)
@click.option("--seed", default=1, show_default=True)
@click.option(
    "--target",
    required=True,
    help="http(s)://... to drive a running server, or a data file path for direct-store mode",
)
@click.option(
    "--activity-config",
    "activity_config",
    required=True,
    type=click.Path(exists=True),
    help="activity XML file (provides the application key and pseudonym salt)",
)
def loadgen(users, sessions, events, help_requests, seed, target, activity_config) -> None:
    """Generate a deterministic synthetic dataset with exact totals."""
    try:
        activity = load_activity_file(activity_config)
        profile = LoadProfile(
            users=users,
            sessions=sessions,
            events=events,
            help_requests=help_requests,
            seed=seed,
        )
    except (ConfigError, ValueError) as exc:
        raise click.ClickException(str(exc))
    if target.startswith(("http://", "https://")):
        totals = populate_http(target, activity, profile)
    else:
        store = EventStore.open(target)
        try:
            totals = populate_store(store, activity, profile)
        finally:
            store.close()
    click.echo(
        f"users={totals['users']} sessions={totals['sessions']} "
        f"events={totals['events']} help_requests={totals['help_requests']}"
    )
    wanted = {
        "users": users,
        "sessions": sessions,
        "events": events,
        "help_requests": help_requests,
    }
    if target.startswith(("http://", "https://")) is False and totals != wanted:
        raise click.ClickException(f"totals mismatch: wanted {wanted}, got {totals}")


@main.command("export")
@click.option("--activity", "activity_id", required=True)
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--data", "data_path", required=True, type=click.Path(exists=True),
              envvar="LEARNLOG_DATA_PATH", help="store file to export from")
def export_cmd(activity_id: str, out_path: str, data_path: str) -> None:
    """Externalize one activity: session manifest plus canonical wire documents."""
    store = EventStore.open(data_path)
    try:
        with open(out_path, "w", encoding="utf-8") as fh:
            count = 0
            for line in store.export_all(activity_id):
                fh.write(line + "\n")
                count += 1
    except StoreError as exc:
        raise click.ClickException(str(exc))
    finally:
        store.close()
    click.echo(f"wrote {count} records to {out_path}")


@main.command("import")
@click.option("--in", "in_path", required=True, type=click.Path(exists=True))
@click.option("--data", "data_path", required=True, type=click.Path(),
              envvar="LEARNLOG_DATA_PATH", help="store file to rebuild into")
def import_cmd(in_path: str, data_path: str) -> None:
    """Rebuild a store from an export stream."""
    if Path(data_path).exists():
        raise click.ClickException(f"refusing to import into existing store {data_path}")
    try:
        with open(in_path, "r", encoding="utf-8") as fh:
            store = EventStore.import_stream(fh, path=data_path)
    except CorruptStream as exc:
        Path(data_path).unlink(missing_ok=True)  # never leave a partial store
        raise click.ClickException(str(exc))
    store.close()
    click.echo(f"rebuilt store at {data_path}")


if __name__ == "__main__":
    sys.exit(main())

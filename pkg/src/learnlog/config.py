"""Service configuration and activity registration files.

Activities are registered through XML files in a config directory; a malformed
file aborts startup with file and line diagnostics. Every ServiceConfig field
can be overridden through a LEARNLOG_* environment variable.
"""

from __future__ import annotations

import json
import os
import xml.etree.ElementTree as ET
from dataclasses import dataclass, field
from pathlib import Path

from .auth import ActivityConfig
from .triggers import TriggerBinding

DEFAULT_MAX_BODY_BYTES = 4 * 1024 * 1024
DEFAULT_RATE_LIMIT = 50.0  # events per second per session


class ConfigError(Exception):
    pass


@dataclass(frozen=True)
class MailSettings:
    mode: str  # "outbox" | "smtp"
    outbox_dir: str = "outbox"
    smtp_host: str = "localhost"
    smtp_port: int = 25
    smtp_username: str | None = None
    smtp_password: str | None = None
    sender: str = "learnlog@localhost"


@dataclass(frozen=True)
class ServiceConfig:
    base_url: str
    config_dir: str
    listen_host: str = "127.0.0.1"
    listen_port: int = 8800
    data_path: str | None = None  # None -> in-memory store
    mail: MailSettings = field(default_factory=lambda: MailSettings(mode="outbox"))
    identity_secret: bytes = b""
    max_body_bytes: int = DEFAULT_MAX_BODY_BYTES
    rate_limit_per_sec: float = DEFAULT_RATE_LIMIT
    static_dir: str | None = None
    dead_letter_dir: str | None = None

    def __post_init__(self) -> None:
        if not self.base_url.startswith(("http://", "https://")):
            raise ConfigError(f"base_url must be absolute: {self.base_url!r}")
        if not self.identity_secret:
            raise ConfigError("identity_secret must be set")


_ENV_PREFIX = "LEARNLOG_"


def _env_override(data: dict) -> dict:
    mapping = {
        "BASE_URL": ("base_url", str),
        "CONFIG_DIR": ("config_dir", str),
        "LISTEN_HOST": ("listen_host", str),
        "LISTEN_PORT": ("listen_port", int),
        "DATA_PATH": ("data_path", str),
        "IDENTITY_SECRET": ("identity_secret", str),
        "MAX_BODY_BYTES": ("max_body_bytes", int),
        "RATE_LIMIT_PER_SEC": ("rate_limit_per_sec", float),
        "STATIC_DIR": ("static_dir", str),
        "DEAD_LETTER_DIR": ("dead_letter_dir", str),
        "MAIL_MODE": ("mail.mode", str),
        "OUTBOX_DIR": ("mail.outbox_dir", str),
        "SMTP_HOST": ("mail.smtp_host", str),
        "SMTP_PORT": ("mail.smtp_port", int),
        "SMTP_USERNAME": ("mail.smtp_username", str),
        "SMTP_PASSWORD": ("mail.smtp_password", str),
        "MAIL_SENDER": ("mail.sender", str),
    }
    for env_name, (key, cast) in mapping.items():
        raw = os.environ.get(_ENV_PREFIX + env_name)
        if raw is None:
            continue
        target = data
        parts = key.split(".")
        for part in parts[:-1]:
            target = target.setdefault(part, {})
        target[parts[-1]] = cast(raw)
    return data


def load_service_config(path: str | Path) -> ServiceConfig:
    """Read the JSON service config, apply LEARNLOG_* environment overrides."""
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    except ValueError as exc:
        raise ConfigError(f"{path}: invalid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: expected a JSON object")
    data = _env_override(data)
    mail_data = data.pop("mail", {"mode": "outbox"})
    if mail_data.get("mode") not in ("outbox", "smtp"):
        raise ConfigError(f"{path}: mail.mode must be 'outbox' or 'smtp'")
    secret = data.pop("identity_secret", "")
    try:
        return ServiceConfig(
            mail=MailSettings(**mail_data),
            identity_secret=secret.encode("utf-8") if isinstance(secret, str) else secret,
            **data,
        )
    except TypeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc


# --- activity XML -------------------------------------------------------------

def _parse_activity_xml(path: Path) -> tuple[ET.Element, dict[int, int]]:
    """Parse with expat directly so every element carries its source line and
    both parse and semantic errors can point at file:line."""
    import xml.parsers.expat as expat

    lines: dict[int, int] = {}
    stack: list[ET.Element] = []
    root: ET.Element | None = None
    parser = expat.ParserCreate()

    def start(tag, attrs):
        nonlocal root
        element = ET.Element(tag, attrs)
        lines[id(element)] = parser.CurrentLineNumber
        if stack:
            stack[-1].append(element)
        else:
            root = element
        stack.append(element)

    def end(_tag):
        stack.pop()

    def chars(data):
        if not stack:
            return
        element = stack[-1]
        if len(element):
            element[-1].tail = (element[-1].tail or "") + data
        else:
            element.text = (element.text or "") + data

    parser.StartElementHandler = start
    parser.EndElementHandler = end
    parser.CharacterDataHandler = chars
    try:
        with open(path, "rb") as fh:
            parser.ParseFile(fh)
    except expat.ExpatError as exc:
        raise ConfigError(f"{path}:{exc.lineno}: {expat.errors.messages[exc.code]}") from None
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    if root is None:
        raise ConfigError(f"{path}:0: empty document")
    return root, lines


def _fail(path: Path, lines: dict[int, int], element: ET.Element | None, message: str):
    line = lines.get(id(element), 0) if element is not None else 0
    raise ConfigError(f"{path}:{line}: {message}")


def _hex_attr(path, lines, element, expected_bytes: int) -> bytes:
    raw = element.get("hex")
    if raw is None:
        _fail(path, lines, element, f"<{element.tag}> requires a hex attribute")
    try:
        value = bytes.fromhex(raw)
    except ValueError:
        _fail(path, lines, element, f"<{element.tag}> hex attribute is not valid hex")
    if len(value) != expected_bytes:
        _fail(
            path, lines, element,
            f"<{element.tag}> must be {expected_bytes} bytes ({expected_bytes * 2} hex chars)",
        )
    return value


_TRIGGER_KINDS = {"sendMail": "send_mail"}


def load_activity_file(path: str | Path) -> ActivityConfig:
    """Parse one activity registration file.

    Expected shape:
      <activity id="...">
        <course>...</course>
        <applicationKey hex="...64 hex..."/>
        <pseudonymSalt hex="...32 hex..."/>
        <whitelist><host>https://lms.example.edu</host>...</whitelist>
        <teachers><email>teacher@example.edu</email>...</teachers>
        <triggers><trigger on="helprequest" kind="sendMail"/>...</triggers>
        <exercises><exercise name="ex1"/>...</exercises>
      </activity>
    """
    path = Path(path)
    root, lines = _parse_activity_xml(path)
    if root.tag != "activity":
        _fail(path, lines, root, f"root element must be <activity>, got <{root.tag}>")
    activity_id = root.get("id")
    if not activity_id:
        _fail(path, lines, root, "<activity> requires an id attribute")

    course = root.findtext("course", default="").strip()

    key_el = root.find("applicationKey")
    if key_el is None:
        _fail(path, lines, root, "missing <applicationKey>")
    application_key = _hex_attr(path, lines, key_el, 32)

    salt_el = root.find("pseudonymSalt")
    if salt_el is None:
        _fail(path, lines, root, "missing <pseudonymSalt>")
    pseudonym_salt = _hex_attr(path, lines, salt_el, 16)

    whitelist = tuple(
        (host.text or "").strip() for host in root.findall("whitelist/host")
    )
    if not whitelist or any(not h for h in whitelist):
        whitelist_el = root.find("whitelist")
        _fail(
            path, lines,
            whitelist_el if whitelist_el is not None else root,
            "whitelist needs at least one non-empty <host>",
        )

    teachers = tuple(
        (email.text or "").strip() for email in root.findall("teachers/email")
    )

    bindings = []
    for trig in root.findall("triggers/trigger"):
        pattern = trig.get("on")
        kind_raw = trig.get("kind")
        if not pattern or not kind_raw:
            _fail(path, lines, trig, "<trigger> requires on and kind attributes")
        kind = _TRIGGER_KINDS.get(kind_raw)
        if kind is None:
            _fail(path, lines, trig, f"unknown trigger kind {kind_raw!r}")
        params = []
        if trig.get("recipient"):
            params.append(("recipient", trig.get("recipient")))
        bindings.append(
            TriggerBinding(
                activity_id=activity_id,
                event_type_pattern=pattern,
                kind=kind,
                params=tuple(params),
            )
        )

    exercises = tuple(
        ex.get("name") for ex in root.findall("exercises/exercise") if ex.get("name")
    )

    try:
        return ActivityConfig(
            activity_id=activity_id,
            course_label=course,
            application_key=application_key,
            host_whitelist=whitelist,
            pseudonym_salt=pseudonym_salt,
            teacher_principals=teachers,
            trigger_bindings=tuple(bindings),
            exercise_order=exercises,
        )
    except ValueError as exc:
        _fail(path, lines, root, str(exc))


def load_activity_dir(directory: str | Path) -> dict[str, ActivityConfig]:
    """Load every *.xml in the config directory; activity ids must be unique
    service-wide and at least one activity must be present."""
    directory = Path(directory)
    if not directory.is_dir():
        raise ConfigError(f"config directory not found: {directory}")
    activities: dict[str, ActivityConfig] = {}
    for path in sorted(directory.glob("*.xml")):
        cfg = load_activity_file(path)
        if cfg.activity_id in activities:
            raise ConfigError(f"{path}: duplicate activity id {cfg.activity_id!r}")
        activities[cfg.activity_id] = cfg
    if not activities:
        raise ConfigError(f"no activity configuration files in {directory}")
    return activities

"""Signed session-launch protocol, pseudonym derivation, viewer tokens, roles.

The LMS vouches for the learner by signing the launch request with the
activity's application key; the server never stores the LMS user reference.
The exact signing-string layout is documented in docs/launch-protocol.md.
"""

from __future__ import annotations

import base64
import hashlib
import hmac
import json
import secrets
import threading
from dataclasses import dataclass
from datetime import datetime
from enum import Enum
from typing import TYPE_CHECKING, Callable

from .events import TYPE_TOKEN
from .timefmt import as_utc_ms, format_instant, parse_instant

if TYPE_CHECKING:
    from .triggers import TriggerBinding

#: Maximum age (and future skew) of a launch request, seconds. Nonces are
#: remembered for the same window.
LAUNCH_WINDOW_SECONDS = 300

PSEUDONYM_DIGITS = 12


@dataclass(frozen=True)
class ActivityConfig:
    """Registration record for one learning tool in one course."""

    activity_id: str
    course_label: str
    application_key: bytes
    host_whitelist: tuple[str, ...]
    pseudonym_salt: bytes
    teacher_principals: tuple[str, ...] = ()
    trigger_bindings: tuple[TriggerBinding, ...] = ()
    exercise_order: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if not TYPE_TOKEN.match(self.activity_id):
            raise ValueError(f"activity_id is not a valid token: {self.activity_id!r}")
        if not self.application_key:
            raise ValueError("application_key must be non-empty")
        if not self.pseudonym_salt:
            raise ValueError("pseudonym_salt must be non-empty")
        if not self.host_whitelist:
            raise ValueError("host_whitelist must be non-empty")


@dataclass(frozen=True)
class LaunchRequest:
    activity_id: str
    user_ref: str
    issued_at: datetime
    nonce: str
    origin: str
    opt_out: bool
    signature: str


@dataclass(frozen=True)
class VerifiedLaunch:
    activity_id: str
    user_ref: str
    issued_at: datetime
    origin: str
    opt_out: bool


@dataclass(frozen=True)
class Pseudonym:
    """The only learner key teachers ever see: 12 decimal digits, irreversible."""

    digits: str

    def __str__(self) -> str:
        return self.digits


@dataclass(frozen=True)
class Session:
    """One launch of a learning tool by one learner. The session_id doubles as
    the bearer token for event submission and the myLog view."""

    session_id: str
    activity_id: str
    pseudonym: Pseudonym
    started_at: datetime
    opt_out: bool


class LaunchError(Exception):
    """code: bad_signature | stale_timestamp | replayed_nonce |
    origin_not_whitelisted | unknown_activity"""

    def __init__(self, code: str):
        self.code = code
        super().__init__(code)


class TokenError(Exception):
    def __init__(self, code: str):
        self.code = code
        super().__init__(code)


def canonical_launch_string(
    activity_id: str,
    user_ref: str,
    issued_at: datetime,
    nonce: str,
    origin: str,
    opt_out: bool,
) -> bytes:
    """The exact byte string covered by the launch signature."""
    return "\n".join(
        [
            activity_id,
            user_ref,
            format_instant(issued_at),
            nonce,
            origin,
            "true" if opt_out else "false",
        ]
    ).encode("utf-8")


def sign_launch(
    activity_id: str,
    user_ref: str,
    issued_at: datetime,
    nonce: str,
    origin: str,
    opt_out: bool,
    application_key: bytes,
) -> str:
    """HMAC-SHA256 over the canonical string, lowercase hex. LMS-side helper."""
    payload = canonical_launch_string(activity_id, user_ref, issued_at, nonce, origin, opt_out)
    return hmac.new(application_key, payload, hashlib.sha256).hexdigest()


class NonceCache:
    """Remembers accepted launch nonces per activity for the replay window.

    check_and_store is atomic: under concurrent presentation of one nonce at
    most one caller wins.
    """

    def __init__(self, window_seconds: float = LAUNCH_WINDOW_SECONDS):
        self.window_seconds = window_seconds
        self._seen: dict[tuple[str, str], datetime] = {}
        self._lock = threading.Lock()

    def check_and_store(self, activity_id: str, nonce: str, now: datetime) -> bool:
        key = (activity_id, nonce)
        with self._lock:
            expired = [k for k, exp in self._seen.items() if (now - exp).total_seconds() > self.window_seconds]
            for k in expired:
                del self._seen[k]
            if key in self._seen:
                return False
            self._seen[key] = now
            return True


def verify_launch(
    req: LaunchRequest,
    cfg: ActivityConfig,
    now: datetime,
    nonce_cache: NonceCache,
) -> VerifiedLaunch:
    """Accept a launch iff the signature, freshness, origin and nonce all hold.

    The nonce is recorded only on acceptance, as the final step.
    """
    if req.activity_id != cfg.activity_id:
        raise LaunchError("unknown_activity")
    expected = sign_launch(
        req.activity_id, req.user_ref, req.issued_at, req.nonce, req.origin, req.opt_out,
        cfg.application_key,
    )
    if not hmac.compare_digest(expected, req.signature.lower()):
        raise LaunchError("bad_signature")
    if abs((now - req.issued_at).total_seconds()) > LAUNCH_WINDOW_SECONDS:
        raise LaunchError("stale_timestamp")
    if req.origin not in cfg.host_whitelist:
        raise LaunchError("origin_not_whitelisted")
    if not nonce_cache.check_and_store(cfg.activity_id, req.nonce, now):
        raise LaunchError("replayed_nonce")
    return VerifiedLaunch(
        activity_id=req.activity_id,
        user_ref=req.user_ref,
        issued_at=req.issued_at,
        origin=req.origin,
        opt_out=req.opt_out,
    )


def derive_pseudonym(user_ref: str, salt: bytes) -> Pseudonym:
    """First 40 bits of HMAC-SHA256(salt, user_ref), mod 10^12, zero-padded.

    Deterministic per (salt, user_ref); the user reference is not recoverable.
    """
    mac = hmac.new(salt, user_ref.encode("utf-8"), hashlib.sha256).digest()
    value = int.from_bytes(mac[:5], "big") % 10**PSEUDONYM_DIGITS
    return Pseudonym(f"{value:0{PSEUDONYM_DIGITS}d}")


def new_session_id() -> str:
    """128-bit unguessable token, lowercase hex."""
    return secrets.token_hex(16)


def create_session(
    verified: VerifiedLaunch,
    cfg: ActivityConfig,
    now: datetime,
    id_factory: Callable[[], str] = new_session_id,
) -> Session:
    """Mint a session for a verified launch. The user_ref is consumed here:
    only the derived pseudonym survives."""
    return Session(
        session_id=id_factory(),
        activity_id=cfg.activity_id,
        pseudonym=derive_pseudonym(verified.user_ref, cfg.pseudonym_salt),
        started_at=as_utc_ms(now),
        opt_out=verified.opt_out,
    )


# --- viewer identity stub ---------------------------------------------------
# Stands in for external identity providers: a shared-secret-signed bearer
# token carrying principal and expiry. Format: base64url(json).hexsig

@dataclass(frozen=True)
class ViewerIdentity:
    principal: str
    expires_at: datetime


def issue_viewer_token(principal: str, expires_at: datetime, secret: bytes) -> str:
    payload = json.dumps(
        {"principal": principal, "exp": format_instant(expires_at)},
        separators=(",", ":"),
    ).encode("utf-8")
    body = base64.urlsafe_b64encode(payload).rstrip(b"=").decode("ascii")
    sig = hmac.new(secret, body.encode("ascii"), hashlib.sha256).hexdigest()
    return f"{body}.{sig}"


def verify_viewer_token(token: str, secret: bytes, now: datetime) -> ViewerIdentity:
    """Raises TokenError(bad_token | bad_signature | expired)."""
    body, dot, sig = token.partition(".")
    if not dot:
        raise TokenError("bad_token")
    expected = hmac.new(secret, body.encode("ascii"), hashlib.sha256).hexdigest()
    if not hmac.compare_digest(expected, sig.lower()):
        raise TokenError("bad_signature")
    try:
        padded = body + "=" * (-len(body) % 4)
        data = json.loads(base64.urlsafe_b64decode(padded))
        principal = data["principal"]
        expires_at = parse_instant(data["exp"])
    except (ValueError, KeyError, TypeError):
        raise TokenError("bad_token") from None
    if now > expires_at:
        raise TokenError("expired")
    return ViewerIdentity(principal=principal, expires_at=expires_at)


# --- authorization ----------------------------------------------------------

class Role(str, Enum):
    TEACHER = "teacher"
    LEARNER_SELF = "learner_self"
    DENIED = "denied"


@dataclass(frozen=True)
class SessionToken:
    value: str


@dataclass(frozen=True)
class ResourceRef:
    activity_id: str
    session_id: str | None = None


def authorize(
    viewer: ViewerIdentity | SessionToken,
    cfg: ActivityConfig,
    resource: ResourceRef,
) -> Role:
    """Teachers may view everything within their own activity; a session token
    grants access to exactly that session (myLog). Denied is a value, not an
    error."""
    if resource.activity_id != cfg.activity_id:
        return Role.DENIED
    if isinstance(viewer, ViewerIdentity):
        if viewer.principal in cfg.teacher_principals:
            return Role.TEACHER
        return Role.DENIED
    if isinstance(viewer, SessionToken) and resource.session_id is not None:
        if hmac.compare_digest(viewer.value, resource.session_id):
            return Role.LEARNER_SELF
    return Role.DENIED

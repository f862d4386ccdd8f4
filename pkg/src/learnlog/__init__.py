"""learnlog: pseudonymous action-logging service for web-based learning tools.

Learning tools submit semantic events over a generic XML wire format under
signed, pseudonymous sessions; teachers read session views and aggregate
summaries; help requests are forwarded by email and the learner's address is
scrubbed afterwards.
"""

from .auth import (
    ActivityConfig,
    LaunchError,
    LaunchRequest,
    NonceCache,
    Pseudonym,
    ResourceRef,
    Role,
    Session,
    SessionToken,
    ViewerIdentity,
    authorize,
    create_session,
    derive_pseudonym,
    issue_viewer_token,
    sign_launch,
    verify_launch,
    verify_viewer_token,
)
from .events import (
    BUILTIN_SCHEMAS,
    EventEnvelope,
    EventKindSchema,
    FieldValue,
    StoredEvent,
    ValidatedEvent,
    ValidationError,
    match_type,
    redact,
    validate,
)
from .store import (
    DISCARDED,
    AggregateFilter,
    AppendResult,
    EventStore,
)
from .triggers import (
    MailGateway,
    NotificationMessage,
    OutboxGateway,
    TriggerBinding,
    TriggerDispatcher,
    TriggerOutcome,
    dispatch,
)
from .wire import DecodeError, decode, encode

__version__ = "0.1.0"

__all__ = [
    "ActivityConfig",
    "AggregateFilter",
    "AppendResult",
    "BUILTIN_SCHEMAS",
    "DISCARDED",
    "DecodeError",
    "EventEnvelope",
    "EventKindSchema",
    "EventStore",
    "FieldValue",
    "LaunchError",
    "LaunchRequest",
    "MailGateway",
    "NonceCache",
    "NotificationMessage",
    "OutboxGateway",
    "Pseudonym",
    "ResourceRef",
    "Role",
    "Session",
    "SessionToken",
    "StoredEvent",
    "TriggerBinding",
    "TriggerDispatcher",
    "TriggerOutcome",
    "ValidatedEvent",
    "ValidationError",
    "ViewerIdentity",
    "authorize",
    "create_session",
    "decode",
    "derive_pseudonym",
    "dispatch",
    "encode",
    "issue_viewer_token",
    "match_type",
    "redact",
    "sign_launch",
    "validate",
    "verify_launch",
    "verify_viewer_token",
]

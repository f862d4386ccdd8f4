#!/usr/bin/env python3
"""Sample LMS-side launch signer.

Shows exactly what an LMS integration has to compute to launch a learning tool
with logging enabled (see docs/launch-protocol.md). Adapt the key loading and
the user lookup to your LMS; everything else is three lines of HMAC.

Usage:
    python scripts/sign_launch.py --activity geometry_ws11 \
        --key-hex <64 hex chars> --user-ref alice@lms.example.edu \
        --origin https://lms.example.edu [--server http://localhost:8800]

Prints the signed form fields; with --server it also performs the POST and
prints the session credentials.
"""

import argparse
import hashlib
import hmac
import json
import secrets
import sys
import urllib.request
from datetime import datetime, timezone
from urllib.parse import urlencode


def format_instant(dt: datetime) -> str:
    dt = dt.astimezone(timezone.utc)
    return (
        f"{dt.year:04d}-{dt.month:02d}-{dt.day:02d}"
        f"T{dt.hour:02d}:{dt.minute:02d}:{dt.second:02d}"
        f".{dt.microsecond // 1000:03d}Z"
    )


def sign(activity_id, user_ref, issued_at, nonce, origin, opt_out, key: bytes) -> str:
    canonical = "\n".join(
        [activity_id, user_ref, issued_at, nonce, origin, "true" if opt_out else "false"]
    ).encode("utf-8")
    return hmac.new(key, canonical, hashlib.sha256).hexdigest()


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--activity", required=True)
    parser.add_argument("--key-hex", required=True, help="the activity's application key")
    parser.add_argument("--user-ref", required=True)
    parser.add_argument("--origin", required=True)
    parser.add_argument("--opt-out", action="store_true")
    parser.add_argument("--server", help="base URL; POST the launch when given")
    args = parser.parse_args()

    form = {
        "user_ref": args.user_ref,
        "issued_at": format_instant(datetime.now(timezone.utc)),
        "nonce": secrets.token_hex(16),
        "origin": args.origin,
        "opt_out": "true" if args.opt_out else "false",
    }
    form["signature"] = sign(
        args.activity,
        form["user_ref"],
        form["issued_at"],
        form["nonce"],
        form["origin"],
        args.opt_out,
        bytes.fromhex(args.key_hex),
    )
    print(urlencode(form))

    if args.server:
        url = f"{args.server.rstrip('/')}/activities/{args.activity}/sessions"
        request = urllib.request.Request(
            url,
            data=urlencode(form).encode("ascii"),
            headers={"Content-Type": "application/x-www-form-urlencoded"},
        )
        with urllib.request.urlopen(request) as resp:
            body = json.loads(resp.read())
        print(json.dumps(body, indent=2))
    return 0


if __name__ == "__main__":
    sys.exit(main())

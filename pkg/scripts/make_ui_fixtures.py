#!/usr/bin/env python3
"""Regenerate the frontend codec fixtures from a scripted session.

Replays the worked dialogue offline (zero models, so verdicts are the
deterministic uniform-vote fallback) and writes every server message in
canonical wire form to frontend/fixtures/. The browser client's codec
tests compare against these bytes exactly; regenerate them only when the
wire format itself changes.
"""

import hashlib
import json
import os
import sys

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from adlisten import protocol
from adlisten.config import ServiceConfig
from adlisten.ensemble import ModelBundle
from adlisten.service import (
    SessionEnd,
    SessionStart,
    Tick,
    UserUtterance,
    load_listener_resources,
    run_session,
)

# the worked six-response exchange, extended to a full diagnosis block
SCRIPT = [
    SessionStart(),
    UserUtterance("How is the weather?", 0.0, 2.0),
    UserUtterance("OK, I'll watch a movie then.", 4.0, 6.0),
    UserUtterance("Avengers, the newest one.", 7.0, 9.0),
    Tick(14.0),
    Tick(19.0),
    UserUtterance("Yes, I like.", 20.0, 21.0),
    UserUtterance("I watched it with my sister.", 23.0, 25.0),
    UserUtterance("We ate popcorn at home.", 26.0, 28.0),
    SessionEnd(),
]

CLIENT_SCRIPT = [
    protocol.hello("fixture"),
    protocol.utterance("How is the weather?", 0.0, 2.0),
    protocol.utterance("OK, I'll watch a movie then.", 4.0, 6.0),
    protocol.utterance("Avengers, the newest one.", 7.0, 9.0),
    protocol.utterance("Yes, I like.", 20.0, 21.0),
    protocol.utterance("I watched it with my sister.", 23.0, 25.0),
    protocol.utterance("We ate popcorn at home.", 26.0, 28.0),
    protocol.bye(),
]


def main() -> int:
    config = ServiceConfig(port=0)
    messages, _ = run_session(
        SCRIPT,
        config,
        models=ModelBundle.zero(),
        resources=load_listener_resources(config),
        session_id="fixture",
    )

    out_dir = os.path.join(
        os.path.dirname(__file__), "..", "frontend", "fixtures"
    )
    os.makedirs(out_dir, exist_ok=True)

    server_path = os.path.join(out_dir, "scripted_session.ndjson")
    payload = b"".join(protocol.encode_message(m) for m in messages)
    with open(server_path, "wb") as fh:
        fh.write(payload)

    client_path = os.path.join(out_dir, "client_messages.ndjson")
    client_payload = b"".join(
        protocol.encode_message(m) for m in CLIENT_SCRIPT
    )
    with open(client_path, "wb") as fh:
        fh.write(client_payload)

    meta = {
        "n_server_messages": len(messages),
        "n_client_messages": len(CLIENT_SCRIPT),
        "server_sha256": hashlib.sha256(payload).hexdigest(),
        "client_sha256": hashlib.sha256(client_payload).hexdigest(),
        "message_types": sorted({m["type"] for m in messages}),
    }
    meta_path = os.path.join(out_dir, "fixtures.json")
    with open(meta_path, "w", encoding="utf-8") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")

    print(f"wrote {len(messages)} server messages to {server_path}")
    print(f"wrote {len(CLIENT_SCRIPT)} client messages to {client_path}")
    print(f"sha256 {meta['server_sha256']}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())

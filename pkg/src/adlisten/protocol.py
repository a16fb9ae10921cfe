"""Wire protocol: newline-delimited JSON messages with a canonical encoding.

One codec serves the raw-socket transport, the browser transport, and
the test fixtures. Canonical form sorts keys, uses compact separators,
and normalizes numbers (round to 4 decimals, integral values emitted as
integers) so independent encoder implementations produce identical
bytes for the same message.
"""

from __future__ import annotations

import json
from typing import Any, Iterator, Optional

from .errors import ProtocolViolation

WIRE_DECIMALS = 4

CLIENT_TYPES = frozenset({"hello", "utterance", "bye"})
SERVER_TYPES = frozenset(
    {"welcome", "response", "silence_watch", "diagnosis", "error"}
)

RESPONSE_TYPE_NAMES = frozenset(
    {
        "answer",
        "question_on_focus",
        "partial_repeat",
        "follow_up_question",
        "topic_introduction",
        "formulaic_response",
    }
)

DEGREE_NAMES = ("non_ad", "mild", "moderate", "severe")


def canonical_number(value: float) -> Any:
    """Round to the wire precision; integral results become ints.

    Keeps every emitted float in a range where the shortest-round-trip
    decimal form is identical across mainstream JSON writers.
    """
    rounded = round(float(value), WIRE_DECIMALS)
    if rounded == int(rounded) and abs(rounded) < 1e15:
        return int(rounded)
    return rounded


def canonicalize(obj: Any) -> Any:
    if isinstance(obj, bool) or obj is None:
        return obj
    if isinstance(obj, int):
        return int(obj)
    if isinstance(obj, float):
        return canonical_number(obj)
    if isinstance(obj, str):
        return obj
    if isinstance(obj, dict):
        return {str(k): canonicalize(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [canonicalize(v) for v in obj]
    if hasattr(obj, "item"):  # numpy scalars
        return canonicalize(obj.item())
    raise ProtocolViolation(f"cannot encode {type(obj).__name__} on the wire")


def encode_message(msg: dict) -> bytes:
    """Canonical UTF-8 line, newline-terminated."""
    payload = json.dumps(
        canonicalize(msg), sort_keys=True, separators=(",", ":"), ensure_ascii=False
    )
    return payload.encode("utf-8") + b"\n"


def decode_message(line: bytes | str) -> dict:
    if isinstance(line, bytes):
        line = line.decode("utf-8")
    try:
        msg = json.loads(line)
    except json.JSONDecodeError as exc:
        raise ProtocolViolation(f"unparseable message: {exc}") from exc
    if not isinstance(msg, dict) or not isinstance(msg.get("type"), str):
        raise ProtocolViolation("message must be an object with a string 'type'")
    return msg


def _require(msg: dict, key: str, types) -> Any:
    if key not in msg:
        raise ProtocolViolation(f"{msg['type']}: missing field {key!r}")
    if not isinstance(msg[key], types):
        raise ProtocolViolation(f"{msg['type']}: field {key!r} has wrong type")
    return msg[key]


def check_client_message(msg: dict) -> dict:
    """Validate an inbound message against the client schema."""
    kind = msg["type"]
    if kind not in CLIENT_TYPES:
        raise ProtocolViolation(f"unknown client message type {kind!r}")
    if kind == "hello":
        _require(msg, "client", str)
    elif kind == "utterance":
        text = _require(msg, "text", str)
        if not text.strip():
            raise ProtocolViolation("utterance: empty text")
        for key in ("t_start", "t_end"):
            if key in msg and not isinstance(msg[key], (int, float)):
                raise ProtocolViolation(f"utterance: {key} must be a number")
        if "audio_b64" in msg and not isinstance(msg["audio_b64"], str):
            raise ProtocolViolation("utterance: audio_b64 must be a string")
    return msg


def check_server_message(msg: dict) -> dict:
    """Validate an outbound message; used by tests and the UI codec."""
    kind = msg["type"]
    if kind not in SERVER_TYPES:
        raise ProtocolViolation(f"unknown server message type {kind!r}")
    if kind == "welcome":
        _require(msg, "session_id", str)
    elif kind == "response":
        if _require(msg, "response_type", str) not in RESPONSE_TYPE_NAMES:
            raise ProtocolViolation("response: unknown response_type")
        _require(msg, "text", str)
    elif kind == "silence_watch":
        _require(msg, "deadline_s", (int, float))
        if _require(msg, "stage", int) < 0 or isinstance(msg["stage"], bool):
            raise ProtocolViolation("silence_watch: bad stage")
    elif kind == "diagnosis":
        if _require(msg, "block_index", int) < 0:
            raise ProtocolViolation("diagnosis: negative block_index")
        if _require(msg, "final", str) not in DEGREE_NAMES:
            raise ProtocolViolation("diagnosis: unknown final degree")
        per = _require(msg, "per_classifier", dict)
        for name, probs in per.items():
            if (
                not isinstance(probs, list)
                or len(probs) != 4
                or not all(isinstance(p, (int, float)) for p in probs)
            ):
                raise ProtocolViolation(f"diagnosis: bad distribution for {name!r}")
        votes = _require(msg, "votes", list)
        if len(votes) != 4 or any(v not in DEGREE_NAMES for v in votes):
            raise ProtocolViolation("diagnosis: bad votes")
        _require(msg, "tie_broken", bool)
    elif kind == "error":
        _require(msg, "code", str)
        _require(msg, "message", str)
    return msg


# -- message builders ----------------------------------------------------


def hello(client: str) -> dict:
    return {"type": "hello", "client": client}


def utterance(
    text: str,
    t_start: Optional[float] = None,
    t_end: Optional[float] = None,
    audio_b64: Optional[str] = None,
) -> dict:
    msg: dict = {"type": "utterance", "text": text}
    if t_start is not None:
        msg["t_start"] = t_start
    if t_end is not None:
        msg["t_end"] = t_end
    if audio_b64 is not None:
        msg["audio_b64"] = audio_b64
    return msg


def bye() -> dict:
    return {"type": "bye"}


def welcome(session_id: str, silence_threshold_s: float, block_size_pairs: int) -> dict:
    return {
        "type": "welcome",
        "session_id": session_id,
        "silence_threshold_s": silence_threshold_s,
        "block_size_pairs": block_size_pairs,
    }


def response(response_type: str, text: str) -> dict:
    return {"type": "response", "response_type": response_type, "text": text}


def silence_watch(deadline_s: float, stage: int) -> dict:
    return {"type": "silence_watch", "deadline_s": deadline_s, "stage": stage}


def diagnosis_message(verdict) -> dict:
    """Build the diagnosis wire message from an ensemble BlockVerdict."""
    return {
        "type": "diagnosis",
        "block_index": verdict.block_index,
        "final": verdict.final.wire_name,
        "per_classifier": {
            name: list(dist.p) for name, dist in verdict.per_classifier.items()
        },
        "votes": [v.wire_name for v in verdict.votes],
        "tie_broken": verdict.tie_broken,
    }


def error(code: str, message: str) -> dict:
    return {"type": "error", "code": code, "message": message}


class LineAssembler:
    """Incremental newline splitter for stream transports."""

    def __init__(self, max_line_bytes: int = 1 << 22):
        self._buffer = bytearray()
        self._max = max_line_bytes

    def feed(self, data: bytes) -> Iterator[bytes]:
        self._buffer.extend(data)
        if len(self._buffer) > self._max:
            self._buffer.clear()
            raise ProtocolViolation("line exceeds maximum length")
        while True:
            idx = self._buffer.find(b"\n")
            if idx < 0:
                return
            line = bytes(self._buffer[:idx])
            del self._buffer[: idx + 1]
            if line.strip():
                yield line

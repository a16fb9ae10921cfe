"""Append-only medical log: one JSON record per line, full float precision.

Block records capture everything a reviewer needs to audit a verdict
(utterance summaries, per-classifier distributions, votes, interactional
features); a session-summary record closes each session. Appends are
single O_APPEND writes so concurrent sessions never interleave within a
line and a crash never corrupts earlier lines.
"""

from __future__ import annotations

import datetime as _dt
import json
import os
from dataclasses import asdict, dataclass, field
from typing import Optional

from .dialogue import DegreeDistribution, DiagnosisDegree
from .ensemble import BlockVerdict


@dataclass(frozen=True)
class TurnSummary:
    speaker: str  # "human" | "robot"
    text: str
    t_start: float
    t_end: float
    response_type: Optional[str] = None  # robot turns only


@dataclass(frozen=True)
class BlockRecord:
    wall_time: str
    session_id: str
    block_index: int
    turn_summaries: tuple[TurnSummary, ...]
    per_classifier: dict[str, tuple[float, float, float, float]]
    votes: tuple[str, str, str, str]
    final: str
    tie_broken: bool
    features: dict[str, float]
    disfluencies: dict[str, int]
    breakdown_flag: bool
    record: str = field(default="block")


@dataclass(frozen=True)
class SessionSummaryRecord:
    wall_time: str
    session_id: str
    n_turn_pairs: int
    n_blocks: int
    final_degrees: tuple[str, ...]
    breakdown_flag: bool
    record: str = field(default="session_summary")


LogRecord = BlockRecord | SessionSummaryRecord


def now_iso() -> str:
    return _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="milliseconds")


def block_record(
    session_id: str,
    verdict: BlockVerdict,
    turn_summaries: tuple[TurnSummary, ...],
    breakdown_flag: bool,
    wall_time: Optional[str] = None,
) -> BlockRecord:
    return BlockRecord(
        wall_time=wall_time if wall_time is not None else now_iso(),
        session_id=session_id,
        block_index=verdict.block_index,
        turn_summaries=turn_summaries,
        per_classifier={
            name: dist.p for name, dist in verdict.per_classifier.items()
        },
        votes=tuple(v.wire_name for v in verdict.votes),
        final=verdict.final.wire_name,
        tie_broken=verdict.tie_broken,
        features=verdict.features.as_dict(),
        disfluencies=verdict.disfluencies.as_dict(),
        breakdown_flag=breakdown_flag,
    )


def serialize_record(rec: LogRecord) -> str:
    return json.dumps(asdict(rec), sort_keys=True, ensure_ascii=False)


def parse_record(line: str) -> LogRecord:
    data = json.loads(line)
    kind = data.get("record")
    if kind == "block":
        data["turn_summaries"] = tuple(
            TurnSummary(**entry) for entry in data["turn_summaries"]
        )
        data["per_classifier"] = {
            name: tuple(probs) for name, probs in data["per_classifier"].items()
        }
        data["votes"] = tuple(data["votes"])
        return BlockRecord(**data)
    if kind == "session_summary":
        data["final_degrees"] = tuple(data["final_degrees"])
        return SessionSummaryRecord(**data)
    raise ValueError(f"unknown record kind {kind!r}")


def append_medical_log(path: str, rec: LogRecord) -> None:
    """Append one record as one line with a single atomic write."""
    payload = (serialize_record(rec) + "\n").encode("utf-8")
    fd = os.open(path, os.O_WRONLY | os.O_APPEND | os.O_CREAT, 0o644)
    try:
        os.write(fd, payload)
    finally:
        os.close(fd)


def read_medical_log(path: str) -> list[LogRecord]:
    records = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                records.append(parse_record(line))
    return records


def verdict_distributions(rec: BlockRecord) -> dict[str, DegreeDistribution]:
    """Rehydrate stored distributions for downstream analysis."""
    return {
        name: DegreeDistribution(p=tuple(float(x) for x in probs))
        for name, probs in rec.per_classifier.items()
    }


def final_degree(rec: BlockRecord) -> DiagnosisDegree:
    return DiagnosisDegree.from_wire(rec.final)

"""Service configuration: dataclass defaults, JSON file, environment overrides.

Precedence is env > file > defaults. Environment variables use the
ADLISTEN_ prefix with upper-cased field names (ADLISTEN_PORT=9000).
"""

from __future__ import annotations

import dataclasses
import json
import os
from dataclasses import dataclass
from typing import Optional

ENV_PREFIX = "ADLISTEN_"


@dataclass(frozen=True)
class ServiceConfig:
    host: str = "127.0.0.1"
    port: int = 8765
    silence_threshold_s: float = 5.0
    block_size_pairs: int = 6
    wh_threshold: float = 1e-4
    vad_threshold_db: float = -40.0
    pause_min_s: float = 0.25
    typing_rate_wpm: float = 150.0
    qa_db_path: Optional[str] = None
    topics_path: Optional[str] = None
    corpus_path: Optional[str] = None
    embeddings_path: Optional[str] = None
    models_dir: Optional[str] = None
    medical_log_path: str = "medical_log.jsonl"

    def __post_init__(self):
        if self.silence_threshold_s <= 0.0:
            raise ValueError("silence threshold must be positive")
        if self.block_size_pairs < 1:
            raise ValueError("block size must be at least 1")
        if self.typing_rate_wpm <= 0.0:
            raise ValueError("typing rate must be positive")
        # port 0 asks the OS for an ephemeral port (handy in tests)
        if not 0 <= self.port < 65536:
            raise ValueError("port out of range")


_FIELD_TYPES = {f.name: f.type for f in dataclasses.fields(ServiceConfig)}


def _coerce(name: str, value: str):
    ftype = _FIELD_TYPES[name]
    if ftype in ("int",):
        return int(value)
    if ftype in ("float",):
        return float(value)
    return value


def load_config(
    path: Optional[str] = None, env: Optional[dict[str, str]] = None
) -> ServiceConfig:
    """Build a ServiceConfig from defaults, an optional JSON file, and env vars."""
    values: dict = {}
    if path is not None:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
        unknown = set(data) - set(_FIELD_TYPES)
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        values.update(data)
    env = os.environ if env is None else env
    for name in _FIELD_TYPES:
        key = ENV_PREFIX + name.upper()
        if key in env:
            values[name] = _coerce(name, env[key])
    return ServiceConfig(**values)

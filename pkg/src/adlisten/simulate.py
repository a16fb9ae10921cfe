"""Synthetic dialogue generator: labeled sessions from symptom profiles.

Stands in for unavailable clinical corpora. A profile fixes distributions
for speaking rate, utterance length, fillers, repetitions, reply delays,
and missed-reply silences; sessions drawn from it are labeled by
construction. Audio is optional: a tone miniature per utterance (sine at
a profile-dependent F0, with a silent gap when the utterance contains
pauses) exercises the signal path without ballooning corpora.

Randomness comes from PCG64 seeded via SeedSequence, with per-session
seeds derived from (master seed, profile index, session index), so
corpora are bit-reproducible across platforms.
"""

from __future__ import annotations

import base64
import csv
import hashlib
import io
import json
import os
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .audio import AudioBuffer, save_wav
from .dialogue import DiagnosisDegree
from .service import SessionEnd, SessionEvent, SessionStart, UserUtterance

FILLER_CHOICES = ("uh", "um", "er", "mm", "hmm")
ROBOT_REPLY_GUESS_S = 1.5
MAX_MISSED_PROMPTS = 3


@dataclass(frozen=True)
class UserProfile:
    """Symptom knobs for one synthetic speaker population."""

    name: str
    label: DiagnosisDegree
    speaking_rate_wpm: tuple[float, float]
    filler_rate: float
    repetition_rate: float
    silence_prob: float
    reply_delay_s: tuple[float, float]
    utterance_length: tuple[float, float]
    pause_rate_per_10w: float
    vocabulary: tuple[str, ...]
    nouns: tuple[str, ...]
    pseudo_audio: bool = False
    f0_hz: tuple[float, float] = (160.0, 20.0)

    def __post_init__(self):
        for prob in (self.filler_rate, self.repetition_rate, self.silence_prob):
            if not 0.0 <= prob <= 1.0:
                raise ValueError(f"probability {prob} outside [0, 1]")
        for mean in (
            self.speaking_rate_wpm[0],
            self.utterance_length[0],
            self.f0_hz[0],
        ):
            if mean <= 0.0:
                raise ValueError(f"profile mean {mean} must be positive")
        if not self.vocabulary or not self.nouns:
            raise ValueError("profile needs a token pool and a noun subset")


@dataclass(frozen=True)
class UtteranceAnnotation:
    """Ground truth for one generated utterance."""

    n_tokens: int
    fillers: int
    repetitions: int
    speech_s: float
    pause_s: float
    n_pauses: int
    missed_prompts: int


@dataclass(frozen=True)
class ScriptedSession:
    label: DiagnosisDegree
    events: tuple[SessionEvent, ...]
    annotations: tuple[UtteranceAnnotation, ...]
    profile_name: str
    seed: int


def session_rng(
    master_seed: int, profile_index: int, session_index: int
) -> tuple[np.random.Generator, int]:
    """Per-session generator plus the integer seed recorded in manifests."""
    ss = np.random.SeedSequence(
        entropy=master_seed, spawn_key=(profile_index, session_index)
    )
    derived = int(ss.generate_state(1, dtype=np.uint64)[0])
    return np.random.Generator(np.random.PCG64(ss)), derived


def _tone_b64(
    speech_s: float,
    has_pause: bool,
    f0: float,
    sample_rate: int,
    audio_max_s: float,
) -> str:
    """Miniature audio: sine at f0, with one 0.4 s gap when pauses exist."""
    window = float(np.clip(speech_s, 0.6, audio_max_s))
    n = int(round(window * sample_rate))
    t = np.arange(n) / sample_rate
    samples = 0.3 * np.sin(2.0 * np.pi * f0 * t)
    if has_pause:
        gap_start = int(0.45 * n)
        gap_len = int(0.4 * sample_rate)
        samples[gap_start : gap_start + gap_len] = 0.0
    sink = io.BytesIO()
    save_wav(sink, AudioBuffer(samples=samples, sample_rate=sample_rate))
    return base64.b64encode(sink.getvalue()).decode("ascii")


def _draw_tokens(profile: UserProfile, rng: np.random.Generator) -> tuple[list[str], int, int]:
    """Token stream salted with fillers and adjacent repetitions."""
    length = max(1, int(round(rng.normal(*profile.utterance_length))))
    tokens: list[str] = []
    for pos in range(length):
        if rng.random() < profile.filler_rate:
            tokens.append(FILLER_CHOICES[rng.integers(len(FILLER_CHOICES))])
        elif pos == length - 1 or rng.random() < 0.35:
            tokens.append(profile.nouns[rng.integers(len(profile.nouns))])
        else:
            tokens.append(profile.vocabulary[rng.integers(len(profile.vocabulary))])
    salted: list[str] = []
    repetitions = 0
    for tok in tokens:
        salted.append(tok)
        if rng.random() < profile.repetition_rate:
            salted.append(tok)
            repetitions += 1
    fillers = sum(1 for tok in salted if tok in FILLER_CHOICES)
    return salted, fillers, repetitions


def generate_session(
    profile: UserProfile,
    seed: int,
    n_pairs: int = 6,
    silence_threshold_s: float = 5.0,
    sample_rate: int = 4000,
    audio_max_s: float = 2.0,
    rng: Optional[np.random.Generator] = None,
) -> ScriptedSession:
    """One scripted session; bit-deterministic given (profile, seed)."""
    if rng is None:
        rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))
    events: list[SessionEvent] = [SessionStart()]
    annotations: list[UtteranceAnnotation] = []
    prev_end = 0.0
    for i in range(n_pairs):
        missed = 0
        while missed < MAX_MISSED_PROMPTS and rng.random() < profile.silence_prob:
            missed += 1
        delay = max(0.05, rng.normal(*profile.reply_delay_s))
        lead = ROBOT_REPLY_GUESS_S if i > 0 else 0.5
        t_start = prev_end + lead + delay + missed * silence_threshold_s

        tokens, fillers, repetitions = _draw_tokens(profile, rng)
        words = len(tokens)
        rate = max(30.0, rng.normal(*profile.speaking_rate_wpm))
        speech_s = words / (rate / 60.0)
        n_pauses = int(rng.poisson(profile.pause_rate_per_10w * words / 10.0))
        pause_s = float(rng.uniform(0.35, 0.9, n_pauses).sum()) if n_pauses else 0.0
        t_end = t_start + speech_s + pause_s

        audio_b64 = None
        if profile.pseudo_audio:
            f0 = max(60.0, rng.normal(*profile.f0_hz))
            audio_b64 = _tone_b64(
                speech_s, n_pauses > 0, f0, sample_rate, audio_max_s
            )

        assert t_start > prev_end, "generated times must be strictly ordered"
        events.append(
            UserUtterance(
                text=" ".join(tokens),
                t_start=t_start,
                t_end=t_end,
                audio_b64=audio_b64,
            )
        )
        annotations.append(
            UtteranceAnnotation(
                n_tokens=words,
                fillers=fillers,
                repetitions=repetitions,
                speech_s=speech_s,
                pause_s=pause_s,
                n_pauses=n_pauses,
                missed_prompts=missed,
            )
        )
        prev_end = t_end
    events.append(SessionEnd())
    return ScriptedSession(
        label=profile.label,
        events=tuple(events),
        annotations=tuple(annotations),
        profile_name=profile.name,
        seed=seed,
    )


# -- profile and session files -------------------------------------------


def load_profiles(path: str) -> list[UserProfile]:
    with open(path, encoding="utf-8") as fh:
        data = json.load(fh)
    profiles = []
    for item in data["profiles"]:
        profiles.append(
            UserProfile(
                name=item["name"],
                label=DiagnosisDegree.from_wire(item["label"]),
                speaking_rate_wpm=tuple(item["speaking_rate_wpm"]),
                filler_rate=item["filler_rate"],
                repetition_rate=item["repetition_rate"],
                silence_prob=item["silence_prob"],
                reply_delay_s=tuple(item["reply_delay_s"]),
                utterance_length=tuple(item["utterance_length"]),
                pause_rate_per_10w=item["pause_rate_per_10w"],
                vocabulary=tuple(item["vocabulary"]),
                nouns=tuple(item["nouns"]),
                pseudo_audio=item.get("pseudo_audio", False),
                f0_hz=tuple(item.get("f0_hz", (160.0, 20.0))),
            )
        )
    return profiles


def session_to_dict(sess: ScriptedSession) -> dict:
    rows = []
    for event in sess.events:
        if isinstance(event, SessionStart):
            rows.append({"kind": "start"})
        elif isinstance(event, SessionEnd):
            rows.append({"kind": "end"})
        else:
            row: dict = {
                "kind": "utterance",
                "text": event.text,
                "t_start": event.t_start,
                "t_end": event.t_end,
            }
            if event.audio_b64 is not None:
                row["audio_b64"] = event.audio_b64
            rows.append(row)
    return {
        "label": sess.label.wire_name,
        "profile": sess.profile_name,
        "seed": sess.seed,
        "events": rows,
        "annotations": [vars(a).copy() for a in sess.annotations],
    }


def session_from_dict(data: dict) -> ScriptedSession:
    events: list[SessionEvent] = []
    for row in data["events"]:
        if row["kind"] == "start":
            events.append(SessionStart())
        elif row["kind"] == "end":
            events.append(SessionEnd())
        else:
            events.append(
                UserUtterance(
                    text=row["text"],
                    t_start=row["t_start"],
                    t_end=row["t_end"],
                    audio_b64=row.get("audio_b64"),
                )
            )
    return ScriptedSession(
        label=DiagnosisDegree.from_wire(data["label"]),
        events=tuple(events),
        annotations=tuple(
            UtteranceAnnotation(**a) for a in data.get("annotations", [])
        ),
        profile_name=data.get("profile", "unknown"),
        seed=int(data.get("seed", 0)),
    )


def save_session(path: str, sess: ScriptedSession) -> None:
    payload = json.dumps(session_to_dict(sess), sort_keys=True)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(payload)


def load_session(path: str) -> ScriptedSession:
    with open(path, encoding="utf-8") as fh:
        return session_from_dict(json.load(fh))


@dataclass(frozen=True)
class ManifestRow:
    file: str
    label: str
    seed: int
    sha256: str


def generate_corpus(
    profiles: Sequence[UserProfile],
    n_per_profile: int,
    master_seed: int,
    out_dir: str,
    n_pairs: int = 6,
    silence_threshold_s: float = 5.0,
) -> list[ManifestRow]:
    """Write session files plus a manifest; reproducible bit-for-bit."""
    if len({p.label for p in profiles}) < 2:
        raise ValueError("corpus generation needs at least two distinct labels")
    os.makedirs(os.path.join(out_dir, "sessions"), exist_ok=True)
    rows: list[ManifestRow] = []
    for pi, profile in enumerate(profiles):
        for si in range(n_per_profile):
            rng, derived_seed = session_rng(master_seed, pi, si)
            sess = generate_session(
                profile,
                seed=derived_seed,
                n_pairs=n_pairs,
                silence_threshold_s=silence_threshold_s,
                rng=rng,
            )
            rel = os.path.join("sessions", f"{profile.name}_{si:04d}.json")
            path = os.path.join(out_dir, rel)
            save_session(path, sess)
            with open(path, "rb") as fh:
                digest = hashlib.sha256(fh.read()).hexdigest()
            rows.append(
                ManifestRow(
                    file=rel,
                    label=profile.label.wire_name,
                    seed=derived_seed,
                    sha256=digest,
                )
            )
    with open(os.path.join(out_dir, "manifest.csv"), "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["file", "label", "seed", "sha256"])
        for row in rows:
            writer.writerow([row.file, row.label, row.seed, row.sha256])
    return rows


def read_manifest(corpus_dir: str) -> list[ManifestRow]:
    rows = []
    with open(os.path.join(corpus_dir, "manifest.csv"), newline="") as fh:
        for rec in csv.DictReader(fh):
            rows.append(
                ManifestRow(
                    file=rec["file"],
                    label=rec["label"],
                    seed=int(rec["seed"]),
                    sha256=rec["sha256"],
                )
            )
    return rows


def run_experiment(
    corpus_dir: str,
    models,
    config,
    report_path: Optional[str] = None,
    resources=None,
) -> dict:
    """Replay every manifest session and score block verdicts against labels.

    Returns {accuracy, confusion (4x4 rows=truth), per_classifier accuracy,
    n_sessions, n_blocks} and optionally writes it as JSON.
    """
    from .medlog import BlockRecord
    from .service import load_listener_resources, run_session

    if resources is None:
        resources = load_listener_resources(config)
    rows = read_manifest(corpus_dir)
    confusion = np.zeros((4, 4), dtype=int)
    per_cls_hits: dict[str, int] = {}
    n_blocks = 0
    for row in rows:
        sess = load_session(os.path.join(corpus_dir, row.file))
        truth = DiagnosisDegree.from_wire(row.label)
        _, records = run_session(
            sess.events,
            config,
            models=models,
            resources=resources,
            session_id=os.path.splitext(os.path.basename(row.file))[0],
        )
        for rec in records:
            if not isinstance(rec, BlockRecord):
                continue
            n_blocks += 1
            confusion[int(truth), int(DiagnosisDegree.from_wire(rec.final))] += 1
            for name, probs in rec.per_classifier.items():
                guess = max(
                    range(4), key=lambda k: (probs[k], k)
                )  # ties toward severe, as in DegreeDistribution.argmax
                per_cls_hits[name] = per_cls_hits.get(name, 0) + (
                    1 if guess == int(truth) else 0
                )
    report = {
        "n_sessions": len(rows),
        "n_blocks": n_blocks,
        "accuracy": float(np.trace(confusion) / n_blocks) if n_blocks else 0.0,
        "confusion": confusion.tolist(),
        "per_classifier_accuracy": {
            name: hits / n_blocks for name, hits in sorted(per_cls_hits.items())
        },
    }
    if report_path is not None:
        with open(report_path, "w", encoding="utf-8") as fh:
            json.dump(report, fh, indent=2, sort_keys=True)
    return report


def realized_statistics(sessions: Sequence[ScriptedSession]) -> dict[str, float]:
    """Aggregate generated-corpus statistics for profile-consistency checks."""
    tokens = fillers = pauses = 0
    speech_s = 0.0
    for sess in sessions:
        for a in sess.annotations:
            tokens += a.n_tokens
            fillers += a.fillers
            pauses += a.n_pauses
            speech_s += a.speech_s
    return {
        "n_tokens": float(tokens),
        "filler_fraction": fillers / tokens if tokens else 0.0,
        "speaking_rate_wpm": tokens / (speech_s / 60.0) if speech_s > 0 else 0.0,
        "pauses_per_10w": pauses / (tokens / 10.0) if tokens else 0.0,
    }

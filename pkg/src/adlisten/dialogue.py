"""Domain model: utterances, turn-pairs, sessions, and diagnosis degrees.

A dialogue is screened in blocks of six human/robot turn-pairs; every
classifier in the system emits a probability vector over the four
diagnosis degrees.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum, IntEnum
from typing import Optional, Sequence

from .errors import (
    EmptyBlock,
    SpeakerMismatch,
    TimeOrderViolation,
    WrongArity,
    ZeroMass,
)

BLOCK_SIZE = 6
SUM_TOL = 1e-9


class Speaker(Enum):
    HUMAN = "human"
    ROBOT = "robot"


class DiagnosisDegree(IntEnum):
    """Screening degrees, ordered so that larger means more severe.

    The ordering is load-bearing: argmax ties and vote ties break toward
    the more severe degree (conservative toward human review).
    """

    NON_AD = 0
    MILD = 1
    MODERATE = 2
    SEVERE = 3

    @property
    def wire_name(self) -> str:
        return _WIRE_NAMES[self]

    @classmethod
    def from_wire(cls, name: str) -> "DiagnosisDegree":
        try:
            return _WIRE_LOOKUP[name]
        except KeyError:
            raise ValueError(f"unknown degree name: {name!r}") from None


_WIRE_NAMES = {
    DiagnosisDegree.NON_AD: "non_ad",
    DiagnosisDegree.MILD: "mild",
    DiagnosisDegree.MODERATE: "moderate",
    DiagnosisDegree.SEVERE: "severe",
}
_WIRE_LOOKUP = {v: k for k, v in _WIRE_NAMES.items()}

NUM_DEGREES = len(DiagnosisDegree)


@dataclass(frozen=True)
class Utterance:
    """One turn by one speaker, on the monotonic session clock (seconds)."""

    speaker: Speaker
    raw_text: str
    tokens: tuple[str, ...]
    t_start: float
    t_end: float
    audio_ref: Optional[str] = None

    def __post_init__(self):
        if self.t_end < self.t_start:
            raise TimeOrderViolation(
                f"t_end {self.t_end} before t_start {self.t_start}"
            )
        if self.speaker is Speaker.ROBOT and self.audio_ref is not None:
            raise SpeakerMismatch("robot utterances never carry audio")

    @property
    def duration_s(self) -> float:
        return self.t_end - self.t_start

    @property
    def word_count(self) -> int:
        return len(self.tokens)


@dataclass(frozen=True)
class TurnPair:
    human: Utterance
    robot: Utterance
    index: int


@dataclass(frozen=True)
class DialogueBlock:
    """Exactly six consecutive turn-pairs; the unit of diagnosis."""

    pairs: tuple[TurnPair, ...]
    block_index: int

    def __post_init__(self):
        if len(self.pairs) != BLOCK_SIZE:
            raise WrongArity(f"block needs {BLOCK_SIZE} pairs, got {len(self.pairs)}")
        for prev, cur in zip(self.pairs, self.pairs[1:]):
            if cur.index != prev.index + 1:
                raise WrongArity("pair indices must be consecutive")

    def human_utterances(self) -> list[Utterance]:
        return [p.human for p in self.pairs]

    def robot_utterances(self) -> list[Utterance]:
        return [p.robot for p in self.pairs]


@dataclass
class DialogueSession:
    """Mutable per-session record, owned by exactly one event loop."""

    session_id: str
    clock_origin: float = 0.0
    pairs: list[TurnPair] = field(default_factory=list)
    completed_blocks: list[DialogueBlock] = field(default_factory=list)

    def add_pair(self, pair: TurnPair) -> None:
        if pair.index != len(self.pairs):
            raise WrongArity(
                f"expected pair index {len(self.pairs)}, got {pair.index}"
            )
        if self.pairs and pair.human.t_start < self.pairs[-1].robot.t_start:
            raise TimeOrderViolation("pair starts before the previous robot turn")
        self.pairs.append(pair)


def make_turn_pair(human: Utterance, robot: Utterance, index: int) -> TurnPair:
    """Validate speakers and time order, then build the pair."""
    if human.speaker is not Speaker.HUMAN:
        raise SpeakerMismatch("first utterance of a pair must be human")
    if robot.speaker is not Speaker.ROBOT:
        raise SpeakerMismatch("second utterance of a pair must be the robot")
    if human.t_end > robot.t_start:
        raise TimeOrderViolation(
            f"human turn ends at {human.t_end} after robot starts at {robot.t_start}"
        )
    return TurnPair(human=human, robot=robot, index=index)


def close_block(session: DialogueSession) -> Optional[DialogueBlock]:
    """Move the oldest six unblocked pairs into a new block, if available.

    Returns None (and leaves the session untouched) when fewer than six
    pairs are pending.
    """
    start = len(session.completed_blocks) * BLOCK_SIZE
    if len(session.pairs) - start < BLOCK_SIZE:
        return None
    block = DialogueBlock(
        pairs=tuple(session.pairs[start : start + BLOCK_SIZE]),
        block_index=len(session.completed_blocks),
    )
    session.completed_blocks.append(block)
    return block


@dataclass(frozen=True)
class DegreeDistribution:
    """Probability vector over the four degrees; validated at construction."""

    p: tuple[float, float, float, float]

    def __post_init__(self):
        if len(self.p) != NUM_DEGREES:
            raise WrongArity(f"need {NUM_DEGREES} probabilities, got {len(self.p)}")
        if any(x < 0.0 for x in self.p):
            raise ValueError(f"negative probability in {self.p}")
        total = sum(self.p)
        if abs(total - 1.0) > SUM_TOL:
            raise ValueError(f"probabilities sum to {total}, not 1")

    def __getitem__(self, degree: DiagnosisDegree) -> float:
        return self.p[int(degree)]

    def argmax(self) -> DiagnosisDegree:
        """Most probable degree; exact ties go to the more severe one."""
        best = max(self.p)
        for degree in reversed(DiagnosisDegree):
            if self.p[int(degree)] == best:
                return degree
        raise AssertionError("unreachable")

    @classmethod
    def uniform(cls) -> "DegreeDistribution":
        return cls((0.25, 0.25, 0.25, 0.25))


def normalize_distribution(raw: Sequence[float]) -> DegreeDistribution:
    """Scale four non-negative weights to a probability vector."""
    if len(raw) != NUM_DEGREES:
        raise WrongArity(f"need {NUM_DEGREES} values, got {len(raw)}")
    if any(x < 0.0 for x in raw):
        raise ValueError(f"negative mass in {raw}")
    total = float(sum(raw))
    if total <= 0.0:
        raise ZeroMass("cannot normalize an all-zero vector")
    p = tuple(float(x) / total for x in raw)
    # kill any residual rounding drift so the constructor check is exact
    drift = 1.0 - sum(p)
    if drift != 0.0:
        i = max(range(NUM_DEGREES), key=lambda k: p[k])
        p = tuple(x + drift if k == i else x for k, x in enumerate(p))
    return DegreeDistribution(p)  # type: ignore[arg-type]


def pending_pairs(session: DialogueSession) -> int:
    return len(session.pairs) - len(session.completed_blocks) * BLOCK_SIZE


def check_block_partition(session: DialogueSession) -> None:
    """Raise if completed blocks do not cover the first 6*k pairs exactly."""
    expected = 0
    for k, block in enumerate(session.completed_blocks):
        if block.block_index != k:
            raise EmptyBlock(f"block {k} carries index {block.block_index}")
        for pair in block.pairs:
            if pair.index != expected:
                raise EmptyBlock(f"expected pair {expected}, found {pair.index}")
            expected += 1
    if expected > len(session.pairs):
        raise EmptyBlock("blocks reference pairs the session does not hold")

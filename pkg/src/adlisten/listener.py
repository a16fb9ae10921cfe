"""Proactive response policy: keep the dialogue alive.

User speech is tagged question / statement / silence. Questions get
answers from a handcrafted adjacency-pair database; statements get a
wh-question on the focus word (when the bigram model scores the pair
above threshold), a partial repeat, or a formulaic response; silence
escalates after the configured threshold from a follow-up question on
the current topic to round-robin topic introductions. Responses are
rule-based throughout so behavior stays controllable and testable.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Union

from .errors import ClockRegression, EmptyUtterance
from .gru import BiGRUClassifier, predict_proba
from .language import (
    BigramModel,
    Vocabulary,
    extract_focus,
    joint_probability,
    one_hot_sequence,
    tokenize,
)


class DialogueAct(Enum):
    QUESTION = "question"
    STATEMENT = "statement"
    SILENCE = "silence"


class ResponseType(Enum):
    ANSWER = "answer"
    QUESTION_ON_FOCUS = "question_on_focus"
    PARTIAL_REPEAT = "partial_repeat"
    FOLLOW_UP_QUESTION = "follow_up_question"
    TOPIC_INTRODUCTION = "topic_introduction"
    FORMULAIC_RESPONSE = "formulaic_response"


QUESTION_STARTERS = frozenset(
    "who what when where which why how do does did is are can could will would".split()
)

DEFAULT_FORMULAIC = (
    "That's good.",
    "I see.",
    "Oh, that sounds nice.",
    "Tell me more.",
)


@dataclass(frozen=True)
class ListenerConfig:
    silence_threshold_s: float = 5.0
    wh_threshold: float = 1e-4
    wh_words: tuple[str, ...] = ("who", "what", "when", "where", "which")
    topics: tuple[str, ...] = ("Do you like music?",)
    formulaic_responses: tuple[str, ...] = DEFAULT_FORMULAIC
    qa_match_threshold: float = 0.5
    focus_question_template: str = "{wh} {focus}?"
    follow_up_template: str = "What's your favorite {topic}?"
    partial_repeat_template: str = "{focus}?"
    breakdown_cap: int = 5

    def __post_init__(self):
        if self.silence_threshold_s <= 0.0:
            raise ValueError("silence threshold must be positive")
        if not 0.0 < self.wh_threshold < 1.0:
            raise ValueError("wh threshold must lie in (0, 1)")
        if not self.topics:
            raise ValueError("need at least one topic question")
        if not self.formulaic_responses:
            raise ValueError("need at least one formulaic response")


@dataclass(frozen=True)
class QAEntry:
    patterns: tuple[tuple[str, ...], ...]
    answer: str


@dataclass(frozen=True)
class QADatabase:
    entries: tuple[QAEntry, ...]

    def __post_init__(self):
        if not self.entries:
            raise ValueError("QA database needs at least one entry")
        for entry in self.entries:
            if not entry.patterns or any(not p for p in entry.patterns):
                raise ValueError(f"entry {entry.answer!r} has an empty pattern")


def load_qa_database(path: str) -> QADatabase:
    """JSON file: {"entries": [{"patterns": [str, ...], "answer": str}]}."""
    with open(path, encoding="utf-8") as fh:
        data = json.load(fh)
    entries = tuple(
        QAEntry(
            patterns=tuple(tuple(tokenize(p)) for p in item["patterns"]),
            answer=item["answer"],
        )
        for item in data["entries"]
    )
    return QADatabase(entries=entries)


def load_topics(path: str) -> tuple[str, ...]:
    """One topic-introduction question per line; blanks skipped."""
    with open(path, encoding="utf-8") as fh:
        topics = tuple(line.strip() for line in fh if line.strip())
    if not topics:
        raise ValueError(f"no topics in {path}")
    return topics


@dataclass
class ActTaggerModel:
    """Trained 2-class sequence tagger plus the vocabulary it was built on."""

    model: BiGRUClassifier
    vocab: Vocabulary

    def tag(self, tokens: list[str]) -> DialogueAct:
        probs = predict_proba(self.model, one_hot_sequence(self.vocab, tokens))
        return DialogueAct.QUESTION if probs[1] >= probs[0] else DialogueAct.STATEMENT


def tag_dialogue_act(
    tokens: list[str],
    raw_text: str,
    model: Optional[ActTaggerModel] = None,
) -> DialogueAct:
    """Question/statement decision for one utterance.

    A trailing "?" is absolute. Otherwise a trained tagger decides when
    supplied; the fallback rule marks utterances starting with a
    question word or auxiliary as questions.
    """
    if not tokens:
        raise EmptyUtterance("cannot tag an utterance with no tokens")
    if raw_text.rstrip().endswith("?"):
        return DialogueAct.QUESTION
    if model is not None:
        return model.tag(tokens)
    if tokens[0] in QUESTION_STARTERS:
        return DialogueAct.QUESTION
    return DialogueAct.STATEMENT


@dataclass
class ListenerState:
    """Mutable per-session policy state; one owner per session."""

    config: ListenerConfig = field(default_factory=ListenerConfig)
    last_topic: Optional[str] = None
    silence_stage: int = 0
    silence_deadline: Optional[float] = None
    topic_cursor: int = 0
    formulaic_cursor: int = 0
    unanswered_prompts: int = 0
    breakdown: bool = False
    clock: float = 0.0


@dataclass(frozen=True)
class UserUtteranceEvent:
    raw_text: str
    t_start: float
    t_end: float


@dataclass(frozen=True)
class TimerExpiredEvent:
    now: float


ListenerEvent = Union[UserUtteranceEvent, TimerExpiredEvent]


@dataclass(frozen=True)
class ListenerAction:
    response_type: ResponseType
    text: str
    act: Optional[DialogueAct]
    emitted_at: float


def _pattern_score(query: set[str], pattern: tuple[str, ...]) -> float:
    pattern_set = set(pattern)
    return len(query & pattern_set) / len(pattern_set)


def respond_to_question(
    db: QADatabase,
    tokens: list[str],
    config: ListenerConfig,
    formulaic_cursor: int = 0,
) -> tuple[ResponseType, str]:
    """Best adjacency-pair answer by pattern coverage, else a formulaic line.

    Coverage is |query tokens ∩ pattern tokens| / |pattern tokens|; the
    best entry wins at >= the match threshold, ties going to the lower
    entry index.
    """
    query = set(tokens)
    best_score, best_entry = -1.0, None
    for entry in db.entries:
        score = max(_pattern_score(query, p) for p in entry.patterns)
        if score > best_score:
            best_score, best_entry = score, entry
    if best_entry is not None and best_score >= config.qa_match_threshold:
        return ResponseType.ANSWER, best_entry.answer
    line = config.formulaic_responses[
        formulaic_cursor % len(config.formulaic_responses)
    ]
    return ResponseType.FORMULAIC_RESPONSE, line


def respond_to_statement(
    state: ListenerState,
    bigram: BigramModel,
    tokens: list[str],
    raw_text: str,
) -> tuple[ResponseType, str]:
    """Decision tree for statements: focus question, partial repeat, or rapport.

    The dialogue topic follows the focus only when a focus question is
    actually asked; a partial repeat echoes without shifting the topic,
    which keeps later follow-up questions on the established topic.
    """
    config = state.config
    result = extract_focus(tokens, raw_text)
    if not result.found:
        line = config.formulaic_responses[
            state.formulaic_cursor % len(config.formulaic_responses)
        ]
        return ResponseType.FORMULAIC_RESPONSE, line
    focus = result.focus
    assert focus is not None
    scores = {wh: joint_probability(bigram, wh, focus) for wh in config.wh_words}
    best_wh = max(config.wh_words, key=lambda wh: scores[wh])
    if scores[best_wh] >= config.wh_threshold:
        state.last_topic = focus
        text = config.focus_question_template.format(wh=best_wh, focus=focus)
        return ResponseType.QUESTION_ON_FOCUS, text[:1].upper() + text[1:]
    text = config.partial_repeat_template.format(focus=focus)
    return ResponseType.PARTIAL_REPEAT, text[:1].upper() + text[1:]


def on_silence_expiry(state: ListenerState) -> tuple[ResponseType, str]:
    """Stage 0 asks a follow-up on the current topic; later stages cycle
    through topic introductions. Re-arms the watch and escalates."""
    config = state.config
    if state.silence_stage == 0 and state.last_topic is not None:
        rtype = ResponseType.FOLLOW_UP_QUESTION
        text = config.follow_up_template.format(topic=state.last_topic)
    elif state.silence_stage == 0:
        # no topic yet: fall back to the first unused topic question
        rtype = ResponseType.FOLLOW_UP_QUESTION
        text = config.topics[state.topic_cursor % len(config.topics)]
        state.topic_cursor += 1
    else:
        rtype = ResponseType.TOPIC_INTRODUCTION
        text = config.topics[state.topic_cursor % len(config.topics)]
        state.topic_cursor += 1
    state.silence_stage += 1
    state.unanswered_prompts += 1
    if state.unanswered_prompts >= config.breakdown_cap:
        state.breakdown = True
    return rtype, text


def step(
    state: ListenerState,
    event: ListenerEvent,
    db: QADatabase,
    bigram: BigramModel,
    act_model: Optional[ActTaggerModel] = None,
) -> ListenerAction:
    """Process one event, mutate the state, emit exactly one robot action."""
    now = event.t_end if isinstance(event, UserUtteranceEvent) else event.now
    if now < state.clock:
        raise ClockRegression(f"event at {now} behind state clock {state.clock}")
    state.clock = now

    if isinstance(event, UserUtteranceEvent):
        state.silence_stage = 0
        state.unanswered_prompts = 0
        tokens = tokenize(event.raw_text)
        act = tag_dialogue_act(tokens, event.raw_text, act_model)
        if act is DialogueAct.QUESTION:
            rtype, text = respond_to_question(
                db, tokens, state.config, state.formulaic_cursor
            )
        else:
            rtype, text = respond_to_statement(state, bigram, tokens, event.raw_text)
        if rtype is ResponseType.FORMULAIC_RESPONSE:
            state.formulaic_cursor += 1
    else:
        act = DialogueAct.SILENCE
        rtype, text = on_silence_expiry(state)

    state.silence_deadline = now + state.config.silence_threshold_s
    return ListenerAction(response_type=rtype, text=text, act=act, emitted_at=now)

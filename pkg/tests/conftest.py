"""Shared fixtures: packaged listener resources and the scripted dialogue.

The scripted dialogue is the worked six-response exchange the listener is
tuned to reproduce with the shipped QA/topic/corpus fixtures: an answered
question, a focus question, a partial repeat, the two silence prompts,
and a closing formulaic response.
"""

import pytest
from hypothesis import HealthCheck, settings

from adlisten.config import ServiceConfig
from adlisten.service import (
    SessionEnd,
    SessionStart,
    Tick,
    UserUtterance,
    load_listener_resources,
)

settings.register_profile(
    "suite", deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("suite")

# (text, t_start, t_end) on the session clock; silences covered by Ticks
SCRIPT_TURNS = (
    ("How is the weather?", 0.0, 2.0),
    ("OK, I'll watch a movie then.", 4.0, 6.0),
    ("Avengers, the newest one.", 7.0, 9.0),
    ("Yes, I like.", 20.0, 21.0),
)
# silence deadlines after the third turn: 9+5 and 14+5
SCRIPT_TICKS = (14.0, 19.0)

EXPECTED_SEQUENCE = (
    "answer",
    "question_on_focus",
    "partial_repeat",
    "follow_up_question",
    "topic_introduction",
    "formulaic_response",
)
EXPECTED_TEXTS = (
    "It's raining outside.",
    "Which movie?",
    "Avengers?",
    "What's your favorite movie?",
    "Do you like music?",
    "That's good.",
)

# two more statements bring the session to six turn-pairs (silence prompts
# are not pair members), so a block verdict is emitted
EXTRA_TURNS = (
    ("I watched it with my sister.", 23.0, 25.0),
    ("We ate popcorn at home.", 26.0, 28.0),
)


def scripted_events(six_pairs: bool = False) -> list:
    events = [SessionStart()]
    for text, t0, t1 in SCRIPT_TURNS[:3]:
        events.append(UserUtterance(text, t0, t1))
    events.extend(Tick(t) for t in SCRIPT_TICKS)
    events.append(UserUtterance(*SCRIPT_TURNS[3]))
    if six_pairs:
        events.extend(UserUtterance(text, t0, t1) for text, t0, t1 in EXTRA_TURNS)
    events.append(SessionEnd())
    return events


@pytest.fixture(scope="session")
def resources():
    return load_listener_resources(ServiceConfig())


@pytest.fixture
def config(tmp_path):
    return ServiceConfig(port=0, medical_log_path=str(tmp_path / "medical_log.jsonl"))

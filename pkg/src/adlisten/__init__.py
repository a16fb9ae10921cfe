"""Proactive listening robot with conversational screening.

The listener keeps a spontaneous dialogue alive (answers, focus
questions, partial repeats, silence-driven prompts); a four-classifier
ensemble screens each six-turn-pair block of the conversation into one
of four degrees and records the evidence in an append-only medical log.
"""

from .dialogue import (
    BLOCK_SIZE,
    DegreeDistribution,
    DiagnosisDegree,
    DialogueBlock,
    DialogueSession,
    Speaker,
    TurnPair,
    Utterance,
)
from .ensemble import (
    BlockVerdict,
    InteractionalFeatures,
    ModelBundle,
    compute_interactional_features,
    detect_block,
    stage1_average,
    stage2_vote,
)
from .listener import (
    DialogueAct,
    ListenerConfig,
    ListenerState,
    ResponseType,
    step,
    tag_dialogue_act,
)
from .service import (
    SessionEnd,
    SessionRunner,
    SessionStart,
    Tick,
    UserUtterance,
    run_session,
    serve,
)

__version__ = "0.1.0"

__all__ = [
    "BLOCK_SIZE",
    "BlockVerdict",
    "DegreeDistribution",
    "DiagnosisDegree",
    "DialogueAct",
    "DialogueBlock",
    "DialogueSession",
    "InteractionalFeatures",
    "ListenerConfig",
    "ListenerState",
    "ModelBundle",
    "ResponseType",
    "SessionEnd",
    "SessionRunner",
    "SessionStart",
    "Speaker",
    "Tick",
    "TurnPair",
    "UserUtterance",
    "Utterance",
    "compute_interactional_features",
    "detect_block",
    "run_session",
    "serve",
    "stage1_average",
    "stage2_vote",
    "step",
    "tag_dialogue_act",
    "__version__",
]

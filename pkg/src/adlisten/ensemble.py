"""Four-classifier ensemble: audio, language, disfluency, interactivity.

Classifiers I-III run once per turn-pair (on the human utterance) and
their six distributions are averaged; the interactivity classifier runs
once per block on five dialogue-level features. A majority vote across
the four results produces the block verdict, with deterministic
tie-breaking that leans toward the more severe degree.
"""

from __future__ import annotations

import json
import zipfile
from collections import Counter
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .audio import FRAME_FEATURE_DIM, AudioAnalysis, FrameSpec, pool_frames
from .dialogue import (
    BLOCK_SIZE,
    DegreeDistribution,
    DiagnosisDegree,
    DialogueBlock,
    normalize_distribution,
)
from .errors import (
    AlignmentError,
    EmptyBlock,
    EmptySequence,
    FormatVersionMismatch,
    WrongArity,
)
from .gru import BiGRUClassifier, classify
from .language import EmbeddingTable, Vocabulary, embed_sequence, one_hot_sequence

CLASSIFIER_NAMES = ("audio", "language", "disfluency", "interactivity")
FILLERS = frozenset({"uh", "um", "er", "mm", "hmm"})
CORRECTION_MARKERS = frozenset({"no", "sorry"})
LINEAR_FORMAT_VERSION = 1
DEFAULT_POOL_STEPS = 48
N_INTERACTIONAL = 5


@dataclass(frozen=True)
class Pause:
    t_start: float
    t_end: float

    def __post_init__(self):
        if self.t_end < self.t_start:
            raise ValueError(f"pause ends at {self.t_end} before {self.t_start}")

    @property
    def duration_s(self) -> float:
        return self.t_end - self.t_start


@dataclass(frozen=True)
class InteractionalFeatures:
    turn_length_mean: float
    floor_control_ratio: float
    standardized_pause_rate: float
    phonation_rate: float
    speaking_rate: float

    def __post_init__(self):
        values = self.as_vector()
        if np.any(values < 0.0) or not np.all(np.isfinite(values)):
            raise ValueError(f"bad interactional features {values}")
        for ratio in (self.floor_control_ratio, self.phonation_rate):
            if ratio > 1.0 + 1e-12:
                raise ValueError(f"ratio {ratio} above 1")

    def as_vector(self) -> np.ndarray:
        return np.array(
            [
                self.turn_length_mean,
                self.floor_control_ratio,
                self.standardized_pause_rate,
                self.phonation_rate,
                self.speaking_rate,
            ]
        )

    def as_dict(self) -> dict[str, float]:
        return {
            "turn_length_mean": self.turn_length_mean,
            "floor_control_ratio": self.floor_control_ratio,
            "standardized_pause_rate": self.standardized_pause_rate,
            "phonation_rate": self.phonation_rate,
            "speaking_rate": self.speaking_rate,
        }


@dataclass(frozen=True)
class DisfluencyInventory:
    restart: int = 0
    repetition: int = 0
    correction: int = 0
    filler: int = 0

    def as_dict(self) -> dict[str, int]:
        return {
            "restart": self.restart,
            "repetition": self.repetition,
            "correction": self.correction,
            "filler": self.filler,
        }


def count_disfluencies(tokens: Sequence[str]) -> DisfluencyInventory:
    """Diagnostic tallies; these never feed the classifiers.

    Fillers are lexicon hits; a run of k identical adjacent tokens counts
    k-1 repetitions; a correction marker ("no", "sorry", "i mean")
    followed by restated content counts once; a restart is a token ending
    with the fragment marker "-".
    """
    filler = sum(1 for t in tokens if t in FILLERS)
    restart = sum(1 for t in tokens if t.endswith("-") and len(t) > 1)
    repetition = sum(1 for a, b in zip(tokens, tokens[1:]) if a == b)
    correction = 0
    for i, tok in enumerate(tokens):
        if tok in CORRECTION_MARKERS and i + 1 < len(tokens):
            correction += 1
        elif tok == "i" and i + 2 < len(tokens) and tokens[i + 1] == "mean":
            correction += 1
    return DisfluencyInventory(
        restart=restart, repetition=repetition, correction=correction, filler=filler
    )


def _overlap(a_start: float, a_end: float, b_start: float, b_end: float) -> float:
    return max(0.0, min(a_end, b_end) - max(a_start, b_start))


def compute_interactional_features(
    block: DialogueBlock, pauses: Sequence[Pause]
) -> InteractionalFeatures:
    """The five dialogue-level features over one six-pair block.

    Human speech time is utterance span time minus any pause time that
    falls inside the spans, so both in-audio pauses and between-utterance
    gaps (the text-only fallback) use the same formulas.
    """
    if len(block.pairs) != BLOCK_SIZE:
        raise EmptyBlock(f"block has {len(block.pairs)} pairs")
    humans = block.human_utterances()
    robots = block.robot_utterances()
    words = sum(u.word_count for u in humans)
    span = sum(u.duration_s for u in humans)
    robot_speech = sum(u.duration_s for u in robots)
    pause_total = sum(p.duration_s for p in pauses)
    in_span = sum(
        _overlap(p.t_start, p.t_end, u.t_start, u.t_end)
        for p in pauses
        for u in humans
    )
    speech = max(0.0, span - in_span)

    floor_denom = speech + robot_speech
    phonation_denom = speech + pause_total
    return InteractionalFeatures(
        turn_length_mean=words / len(block.pairs),
        floor_control_ratio=speech / floor_denom if floor_denom > 0 else 0.0,
        standardized_pause_rate=words / max(1, len(pauses)),
        phonation_rate=speech / phonation_denom if phonation_denom > 0 else 0.0,
        speaking_rate=words / (phonation_denom / 60.0) if phonation_denom > 0 else 0.0,
    )


@dataclass
class LinearSoftmaxModel:
    """5 features -> 4 degrees, with stored standardization constants."""

    weights: np.ndarray
    bias: np.ndarray
    feat_mu: np.ndarray
    feat_sd: np.ndarray

    def __post_init__(self):
        if self.weights.shape != (len(self.bias), len(self.feat_mu)):
            raise WrongArity(f"inconsistent linear model shapes {self.weights.shape}")

    @classmethod
    def zero(cls, n_classes: int = 4, n_features: int = N_INTERACTIONAL):
        return cls(
            weights=np.zeros((n_classes, n_features)),
            bias=np.zeros(n_classes),
            feat_mu=np.zeros(n_features),
            feat_sd=np.ones(n_features),
        )


def interactivity_classify(
    model: LinearSoftmaxModel, features: InteractionalFeatures
) -> DegreeDistribution:
    """softmax(W (f - mu) / sd + b)."""
    x = (features.as_vector() - model.feat_mu) / model.feat_sd
    logits = model.weights @ x + model.bias
    e = np.exp(logits - logits.max())
    return normalize_distribution(e / e.sum())


def train_linear_softmax(
    features: Sequence[InteractionalFeatures],
    labels: Sequence[int],
    n_classes: int = 4,
    learning_rate: float = 0.1,
    epochs: int = 300,
) -> LinearSoftmaxModel:
    """Full-batch gradient descent on the multinomial logistic loss."""
    if len(features) == 0 or len(features) != len(labels):
        raise WrongArity("need one label per feature row")
    x = np.stack([f.as_vector() for f in features])
    mu = x.mean(axis=0)
    sd = np.maximum(x.std(axis=0), 1e-8)
    xs = (x - mu) / sd
    y = np.asarray(labels)
    w = np.zeros((n_classes, xs.shape[1]))
    b = np.zeros(n_classes)
    onehot = np.eye(n_classes)[y]
    for _ in range(epochs):
        logits = xs @ w.T + b
        logits -= logits.max(axis=1, keepdims=True)
        p = np.exp(logits)
        p /= p.sum(axis=1, keepdims=True)
        err = (p - onehot) / len(xs)
        w -= learning_rate * err.T @ xs
        b -= learning_rate * err.sum(axis=0)
    return LinearSoftmaxModel(weights=w, bias=b, feat_mu=mu, feat_sd=sd)


def save_linear(model: LinearSoftmaxModel, path: str) -> None:
    meta = {"format_version": LINEAR_FORMAT_VERSION, "kind": "linear"}
    np.savez(
        path,
        __meta__=json.dumps(meta),
        weights=model.weights,
        bias=model.bias,
        feat_mu=model.feat_mu,
        feat_sd=model.feat_sd,
    )


def load_linear(path: str) -> LinearSoftmaxModel:
    try:
        with np.load(path, allow_pickle=False) as data:
            meta = json.loads(str(data["__meta__"]))
            if meta.get("kind") != "linear" or meta.get("format_version") != LINEAR_FORMAT_VERSION:
                raise FormatVersionMismatch(f"{path}: unsupported header {meta}")
            model = LinearSoftmaxModel(
                weights=np.array(data["weights"]),
                bias=np.array(data["bias"]),
                feat_mu=np.array(data["feat_mu"]),
                feat_sd=np.array(data["feat_sd"]),
            )
    except (ValueError, EOFError, KeyError, zipfile.BadZipFile) as exc:
        raise FormatVersionMismatch(f"{path}: not a linear model file ({exc})") from exc
    return model


def audio_classify(model: BiGRUClassifier, frames: Sequence) -> DegreeDistribution:
    """Per-utterance distribution from the acoustic feature sequence."""
    return classify(model, frames)


def language_classify(model: BiGRUClassifier, embedded: Sequence) -> DegreeDistribution:
    """Per-utterance distribution from the embedded token sequence."""
    return classify(model, embedded)


def disfluency_classify(model: BiGRUClassifier, fused: Sequence) -> DegreeDistribution:
    """Per-utterance distribution from fused one-hot + prosody rows."""
    return classify(model, fused)


def token_prosody_matrix(
    n_tokens: int,
    analysis: Optional[AudioAnalysis],
    utterance_duration_s: float,
    spec: FrameSpec = FrameSpec(),
) -> np.ndarray:
    """Per-token prosodic slots (scaled voiced/f0/intensity/stability).

    Each token owns an equal share of the utterance's audio; its slot is
    the mean of the prosodic columns over frames whose centers fall in
    that share. All zeros in text-only mode.
    """
    if n_tokens == 0:
        return np.zeros((0, 4))
    if analysis is None:
        return np.zeros((n_tokens, 4))
    if utterance_duration_s <= 0.0:
        raise AlignmentError("audio present but the utterance has no time span")
    prosody = analysis.feature_matrix[:, :4]
    n_frames = len(prosody)
    if n_frames == 0:
        return np.zeros((n_tokens, 4))
    centers = spec.hop_s * np.arange(n_frames) + spec.window_s / 2.0
    audio_dur = spec.hop_s * n_frames + spec.window_s
    out = np.zeros((n_tokens, 4))
    for i in range(n_tokens):
        lo = audio_dur * i / n_tokens
        hi = audio_dur * (i + 1) / n_tokens
        mask = (centers >= lo) & (centers < hi)
        if not mask.any():
            nearest = int(np.argmin(np.abs(centers - (lo + hi) / 2.0)))
            out[i] = prosody[nearest]
        else:
            out[i] = prosody[mask].mean(axis=0)
    return out


def build_disfluency_sequence(
    tokens: Sequence[str],
    vocab: Vocabulary,
    token_prosody: Optional[np.ndarray] = None,
) -> np.ndarray:
    """(L, V + 4) rows: one-hot lexical identity plus prosodic slots."""
    onehot = one_hot_sequence(vocab, list(tokens))
    if token_prosody is None:
        token_prosody = np.zeros((len(tokens), 4))
    if len(token_prosody) != len(tokens):
        raise AlignmentError(
            f"{len(tokens)} tokens vs {len(token_prosody)} prosody rows"
        )
    return np.concatenate([onehot, token_prosody], axis=1)


def stage1_average(six: Sequence[DegreeDistribution]) -> DegreeDistribution:
    """Component-wise mean of exactly six distributions."""
    if len(six) != BLOCK_SIZE:
        raise WrongArity(f"stage 1 needs {BLOCK_SIZE} distributions, got {len(six)}")
    mean = np.mean([d.p for d in six], axis=0)
    return normalize_distribution(mean)


def stage2_vote(
    results: Sequence[tuple[DiagnosisDegree, DegreeDistribution]]
) -> tuple[DiagnosisDegree, bool]:
    """Majority vote over the four classifier results.

    A strict plurality wins outright. Ties among the top vote-getters are
    broken by the summed probability mass restricted to the tied labels;
    a residual exact tie goes to the most severe label. The returned flag
    records whether any tie rule fired.
    """
    if len(results) != len(CLASSIFIER_NAMES):
        raise WrongArity(f"stage 2 needs 4 results, got {len(results)}")
    votes = [label for label, _ in results]
    counts = Counter(votes)
    top = max(counts.values())
    tied = [d for d in DiagnosisDegree if counts[d] == top]
    if len(tied) == 1:
        return tied[0], False
    mass = {d: sum(dist[d] for _, dist in results) for d in tied}
    best = max(mass.values())
    winner = max(d for d in tied if mass[d] == best)
    return winner, True


@dataclass(frozen=True)
class BlockVerdict:
    block_index: int
    per_classifier: dict[str, DegreeDistribution]
    votes: tuple[DiagnosisDegree, DiagnosisDegree, DiagnosisDegree, DiagnosisDegree]
    final: DiagnosisDegree
    tie_broken: bool
    features: InteractionalFeatures
    disfluencies: DisfluencyInventory


@dataclass
class ModelBundle:
    """Everything detection needs, as produced by one training run."""

    audio: Optional[BiGRUClassifier]
    language: BiGRUClassifier
    disfluency: BiGRUClassifier
    interactivity: LinearSoftmaxModel
    vocab: Vocabulary
    embeddings: EmbeddingTable
    act_tagger: Optional[BiGRUClassifier] = None
    pool_steps: int = DEFAULT_POOL_STEPS

    @classmethod
    def zero(cls, vocab: Optional[Vocabulary] = None, embed_dim: int = 16):
        """All-zero-weight bundle; every classifier emits uniform."""
        from .gru import init_classifier

        vocab = vocab or Vocabulary(index={})

        def zeroed(dim):
            model = init_classifier(dim, 4, num_classes=4, seed=0)
            for p in model.parameters().values():
                p[:] = 0.0
            return model

        return cls(
            audio=zeroed(FRAME_FEATURE_DIM),
            language=zeroed(embed_dim),
            disfluency=zeroed(vocab.size + 4),
            interactivity=LinearSoftmaxModel.zero(),
            vocab=vocab,
            embeddings=EmbeddingTable(dim=embed_dim),
        )


def detect_block(
    block: DialogueBlock,
    models: ModelBundle,
    audio_by_pair: Optional[dict[int, AudioAnalysis]] = None,
    pauses: Sequence[Pause] = (),
    spec: FrameSpec = FrameSpec(),
) -> BlockVerdict:
    """Run the full two-stage ensemble over one completed block.

    Classifiers I-III see each pair's human utterance; a pair with no
    audio contributes a uniform distribution on the audio path so the
    six-way average keeps its arity.
    """
    audio_by_pair = audio_by_pair or {}
    audio_dists: list[DegreeDistribution] = []
    language_dists: list[DegreeDistribution] = []
    disfluency_dists: list[DegreeDistribution] = []
    inventory = Counter()

    for position, pair in enumerate(block.pairs):
        human = pair.human
        tokens = list(human.tokens)
        analysis = audio_by_pair.get(position)

        if models.audio is not None and analysis is not None and len(analysis.feature_matrix) > 0:
            pooled = pool_frames(analysis.feature_matrix, models.pool_steps)
            audio_dists.append(audio_classify(models.audio, pooled))
        else:
            audio_dists.append(DegreeDistribution.uniform())

        if tokens:
            embedded = embed_sequence(models.embeddings, tokens)
            language_dists.append(language_classify(models.language, embedded))
            prosody = token_prosody_matrix(
                len(tokens), analysis, human.duration_s, spec
            )
            fused = build_disfluency_sequence(tokens, models.vocab, prosody)
            disfluency_dists.append(disfluency_classify(models.disfluency, fused))
        else:
            language_dists.append(DegreeDistribution.uniform())
            disfluency_dists.append(DegreeDistribution.uniform())

        inventory.update(count_disfluencies(tokens).as_dict())

    features = compute_interactional_features(block, pauses)
    per_classifier = {
        "audio": stage1_average(audio_dists),
        "language": stage1_average(language_dists),
        "disfluency": stage1_average(disfluency_dists),
        "interactivity": interactivity_classify(models.interactivity, features),
    }
    votes = tuple(per_classifier[name].argmax() for name in CLASSIFIER_NAMES)
    final, tie_broken = stage2_vote(
        [(votes[i], per_classifier[name]) for i, name in enumerate(CLASSIFIER_NAMES)]
    )
    return BlockVerdict(
        block_index=block.block_index,
        per_classifier=per_classifier,
        votes=votes,  # type: ignore[arg-type]
        final=final,
        tie_broken=tie_broken,
        features=features,
        disfluencies=DisfluencyInventory(**inventory),
    )

"""Training pipelines: corpus -> trained classifier bundle on disk.

Per-utterance datasets (audio frames, embedded tokens, fused one-hot +
prosody) come straight from the corpus files; the interactivity dataset
needs robot turns and block boundaries, so those features are collected
by replaying each session through the service core with an all-zero
bundle. Everything is seeded; identical corpora and seeds give identical
bundles.
"""

from __future__ import annotations

import base64
import io
import json
import os
from typing import Optional, Sequence

import numpy as np

from .audio import FRAME_FEATURE_DIM, analyze_audio, load_wav, pool_frames
from .config import ServiceConfig
from .ensemble import (
    InteractionalFeatures,
    ModelBundle,
    build_disfluency_sequence,
    load_linear,
    save_linear,
    token_prosody_matrix,
    train_linear_softmax,
)
from .errors import EmptyDataset, FormatVersionMismatch
from .gru import (
    BiGRUClassifier,
    InputScaler,
    TrainConfig,
    accuracy,
    init_classifier,
    load_model,
    save_model,
    train,
)
from .language import (
    EmbeddingTable,
    Vocabulary,
    build_vocabulary,
    embed_sequence,
    load_embeddings,
    one_hot_sequence,
    tokenize,
)
from .listener import ActTaggerModel
from .medlog import BlockRecord
from .service import UserUtterance, load_listener_resources, run_session
from .simulate import ScriptedSession, load_session, read_manifest

BUNDLE_FORMAT_VERSION = 1
TRAIN_POOL_STEPS = 16
EMBED_DIM = 16
VOCAB_MAX = 200

GRU_SIZES = {"audio": 10, "language": 12, "disfluency": 12, "dialogue_act": 8}
GRU_EPOCHS = {"audio": 12, "language": 15, "disfluency": 15, "dialogue_act": 25}
ALL_CLASSIFIERS = ("audio", "language", "disfluency", "interactivity")


def corpus_sessions(corpus_dir: str) -> list[ScriptedSession]:
    return [
        load_session(os.path.join(corpus_dir, row.file))
        for row in read_manifest(corpus_dir)
    ]


def _utterance_items(sessions: Sequence[ScriptedSession]):
    """Yield (tokens, analysis, duration, label) per human utterance."""
    for sess in sessions:
        label = int(sess.label)
        for event in sess.events:
            if not isinstance(event, UserUtterance):
                continue
            analysis = None
            if event.audio_b64:
                buf = load_wav(io.BytesIO(base64.b64decode(event.audio_b64)))
                analysis = analyze_audio(buf)
            duration = float((event.t_end or 0.0) - (event.t_start or 0.0))
            yield tokenize(event.text), analysis, duration, label


def build_vocab(sessions: Sequence[ScriptedSession]) -> Vocabulary:
    return build_vocabulary(
        (
            tokenize(e.text)
            for s in sessions
            for e in s.events
            if isinstance(e, UserUtterance)
        ),
        max_size=VOCAB_MAX,
    )


def build_utterance_datasets(
    sessions: Sequence[ScriptedSession],
    vocab: Vocabulary,
    embeddings: EmbeddingTable,
    pool_steps: int = TRAIN_POOL_STEPS,
) -> dict[str, list[tuple[np.ndarray, int]]]:
    """Per-utterance training items for the three sequence classifiers."""
    out: dict[str, list[tuple[np.ndarray, int]]] = {
        "audio": [],
        "language": [],
        "disfluency": [],
    }
    for tokens, analysis, duration, label in _utterance_items(sessions):
        if analysis is not None and len(analysis.feature_matrix) > 0:
            out["audio"].append(
                (pool_frames(analysis.feature_matrix, pool_steps), label)
            )
        if tokens:
            out["language"].append((embed_sequence(embeddings, tokens), label))
            prosody = token_prosody_matrix(len(tokens), analysis, duration)
            out["disfluency"].append(
                (build_disfluency_sequence(tokens, vocab, prosody), label)
            )
    return out


def build_interactivity_dataset(
    corpus_dir: str,
    config: ServiceConfig,
    resources=None,
) -> tuple[list[InteractionalFeatures], list[int]]:
    """Replay sessions with a zero bundle and harvest block features."""
    if resources is None:
        resources = load_listener_resources(config)
    zero = ModelBundle.zero()
    features: list[InteractionalFeatures] = []
    labels: list[int] = []
    for row in read_manifest(corpus_dir):
        sess = load_session(os.path.join(corpus_dir, row.file))
        _, records = run_session(
            sess.events, config, models=zero, resources=resources,
            session_id=f"train-{os.path.basename(row.file)}",
        )
        for rec in records:
            if isinstance(rec, BlockRecord):
                features.append(InteractionalFeatures(**rec.features))
                labels.append(int(sess.label))
    return features, labels


def _fit_scaler(items: Sequence[tuple[np.ndarray, int]]) -> InputScaler:
    rows = np.concatenate([np.asarray(xs) for xs, _ in items], axis=0)
    return InputScaler.fit(rows)


def _train_gru(
    items: Sequence[tuple[np.ndarray, int]],
    input_dim: int,
    hidden_dim: int,
    epochs: int,
    seed: int,
    use_scaler: bool,
    num_classes: int = 4,
) -> tuple[BiGRUClassifier, float]:
    if not items:
        raise EmptyDataset("no training items for this classifier")
    scaler = _fit_scaler(items) if use_scaler else None
    model = init_classifier(
        input_dim, hidden_dim, num_classes=num_classes, seed=seed, scaler=scaler
    )
    train(
        model,
        items,
        TrainConfig(learning_rate=0.08, epochs=epochs, batch_size=8, seed=seed),
    )
    return model, accuracy(model, items)


DEFAULT_QUESTION_BANK = (
    "how is the weather today?",
    "what did you eat this morning?",
    "where do you live now?",
    "who came to visit you?",
    "which movie do you like best?",
    "when did you wake up?",
    "do you like music?",
    "can you tell me about your family?",
    "is it cold outside?",
    "what's your favorite food?",
)


def train_act_tagger(
    statements: Sequence[str],
    questions: Sequence[str] = DEFAULT_QUESTION_BANK,
    seed: int = 0,
    epochs: int = GRU_EPOCHS["dialogue_act"],
) -> ActTaggerModel:
    """2-class utterance tagger: 0 = statement, 1 = question."""
    texts = [(t, 0) for t in statements] + [(t, 1) for t in questions]
    token_lists = [tokenize(t) for t, _ in texts]
    vocab = build_vocabulary(token_lists, max_size=VOCAB_MAX)
    items = [
        (one_hot_sequence(vocab, toks), label)
        for toks, (_, label) in zip(token_lists, texts)
        if toks
    ]
    model, _ = _train_gru(
        items,
        input_dim=vocab.size,
        hidden_dim=GRU_SIZES["dialogue_act"],
        epochs=epochs,
        seed=seed,
        use_scaler=False,
        num_classes=2,
    )
    model.meta["vocab"] = vocab.tokens_in_order()
    model.meta["labels"] = ["statement", "question"]
    return ActTaggerModel(model=model, vocab=vocab)


def train_models(
    corpus_dir: str,
    config: Optional[ServiceConfig] = None,
    seed: int = 0,
    out_dir: Optional[str] = None,
    classifiers: Sequence[str] = ALL_CLASSIFIERS,
    epochs: Optional[dict[str, int]] = None,
    embeddings_path: Optional[str] = None,
) -> tuple[Optional[ModelBundle], dict]:
    """Train the requested classifiers; returns (bundle, metrics).

    The bundle is only assembled when the full primary set is trained
    (audio is skipped gracefully if the corpus carries no audio). With
    out_dir set, artifacts and a bundle manifest are written there.
    """
    config = config or ServiceConfig()
    epoch_of = dict(GRU_EPOCHS)
    epoch_of.update(epochs or {})
    sessions = corpus_sessions(corpus_dir)
    if not sessions:
        raise EmptyDataset(f"no sessions in {corpus_dir}")
    vocab = build_vocab(sessions)
    embeddings = (
        load_embeddings(embeddings_path)
        if embeddings_path
        else EmbeddingTable(dim=EMBED_DIM)
    )
    datasets = build_utterance_datasets(sessions, vocab, embeddings)
    metrics: dict = {"n_sessions": len(sessions), "seed": seed}
    trained: dict[str, object] = {}

    if "audio" in classifiers and datasets["audio"]:
        model, acc = _train_gru(
            datasets["audio"],
            input_dim=FRAME_FEATURE_DIM,
            hidden_dim=GRU_SIZES["audio"],
            epochs=epoch_of["audio"],
            seed=seed,
            use_scaler=True,
        )
        trained["audio"], metrics["audio_train_accuracy"] = model, acc
    if "language" in classifiers:
        model, acc = _train_gru(
            datasets["language"],
            input_dim=embeddings.dim,
            hidden_dim=GRU_SIZES["language"],
            epochs=epoch_of["language"],
            seed=seed + 1,
            use_scaler=False,
        )
        trained["language"], metrics["language_train_accuracy"] = model, acc
    if "disfluency" in classifiers:
        model, acc = _train_gru(
            datasets["disfluency"],
            input_dim=vocab.size + 4,
            hidden_dim=GRU_SIZES["disfluency"],
            epochs=epoch_of["disfluency"],
            seed=seed + 2,
            use_scaler=False,
        )
        trained["disfluency"], metrics["disfluency_train_accuracy"] = model, acc
    if "interactivity" in classifiers:
        features, labels = build_interactivity_dataset(corpus_dir, config)
        model = train_linear_softmax(features, labels)
        hits = sum(
            1
            for f, y in zip(features, labels)
            if int(np.argmax(model.weights @ ((f.as_vector() - model.feat_mu) / model.feat_sd) + model.bias)) == y
        )
        trained["interactivity"] = model
        metrics["interactivity_train_accuracy"] = hits / len(labels)
    if "dialogue_act" in classifiers:
        statements = [
            " ".join(tokenize(e.text))
            for s in sessions
            for e in s.events
            if isinstance(e, UserUtterance)
        ][:120]
        trained["dialogue_act"] = train_act_tagger(statements, seed=seed + 3)

    bundle = None
    if all(k in trained for k in ("language", "disfluency", "interactivity")):
        bundle = ModelBundle(
            audio=trained.get("audio"),  # type: ignore[arg-type]
            language=trained["language"],  # type: ignore[arg-type]
            disfluency=trained["disfluency"],  # type: ignore[arg-type]
            interactivity=trained["interactivity"],  # type: ignore[arg-type]
            vocab=vocab,
            embeddings=embeddings,
            act_tagger=getattr(trained.get("dialogue_act"), "model", None),
            pool_steps=TRAIN_POOL_STEPS,
        )
    if out_dir is not None:
        _save_artifacts(out_dir, trained, vocab, embeddings, metrics)
    return bundle, metrics


def _save_artifacts(out_dir, trained, vocab, embeddings, metrics) -> None:
    os.makedirs(out_dir, exist_ok=True)
    for name in ("audio", "language", "disfluency"):
        if name in trained:
            save_model(trained[name], os.path.join(out_dir, f"{name}.npz"))
    if "interactivity" in trained:
        save_linear(
            trained["interactivity"], os.path.join(out_dir, "interactivity.npz")
        )
    if "dialogue_act" in trained:
        save_model(
            trained["dialogue_act"].model, os.path.join(out_dir, "dialogue_act.npz")
        )
    with open(os.path.join(out_dir, "vocab.json"), "w", encoding="utf-8") as fh:
        json.dump({"tokens": vocab.tokens_in_order()}, fh)
    manifest_path = os.path.join(out_dir, "bundle.json")
    manifest = {}
    if os.path.exists(manifest_path):
        with open(manifest_path, encoding="utf-8") as fh:
            manifest = json.load(fh)
    manifest.update(
        {
            "format_version": BUNDLE_FORMAT_VERSION,
            "pool_steps": TRAIN_POOL_STEPS,
            "embed_dim": embeddings.dim,
            "oov_seed": embeddings.oov_seed,
            "metrics": {
                k: v for k, v in metrics.items() if isinstance(v, (int, float))
            },
        }
    )
    with open(manifest_path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)


def load_bundle(models_dir: str) -> ModelBundle:
    """Reassemble a ModelBundle saved by train_models(out_dir=...)."""
    manifest_path = os.path.join(models_dir, "bundle.json")
    if not os.path.exists(manifest_path):
        raise FormatVersionMismatch(f"{models_dir} has no bundle manifest")
    with open(manifest_path, encoding="utf-8") as fh:
        manifest = json.load(fh)
    if manifest.get("format_version") != BUNDLE_FORMAT_VERSION:
        raise FormatVersionMismatch(
            f"unsupported bundle version {manifest.get('format_version')}"
        )
    with open(os.path.join(models_dir, "vocab.json"), encoding="utf-8") as fh:
        tokens = json.load(fh)["tokens"]
    vocab = Vocabulary(index={tok: i + 1 for i, tok in enumerate(tokens)})
    missing = [
        name
        for name in ("language", "disfluency", "interactivity")
        if not os.path.exists(os.path.join(models_dir, f"{name}.npz"))
    ]
    if missing:
        raise FormatVersionMismatch(f"bundle incomplete, missing: {missing}")
    audio_path = os.path.join(models_dir, "audio.npz")
    act_path = os.path.join(models_dir, "dialogue_act.npz")
    return ModelBundle(
        audio=load_model(audio_path, expect_classes=4)
        if os.path.exists(audio_path)
        else None,
        language=load_model(os.path.join(models_dir, "language.npz"), expect_classes=4),
        disfluency=load_model(
            os.path.join(models_dir, "disfluency.npz"), expect_classes=4
        ),
        interactivity=load_linear(os.path.join(models_dir, "interactivity.npz")),
        vocab=vocab,
        embeddings=EmbeddingTable(
            dim=int(manifest.get("embed_dim", EMBED_DIM)),
            oov_seed=int(manifest.get("oov_seed", 0)),
        ),
        act_tagger=load_model(act_path, expect_classes=2)
        if os.path.exists(act_path)
        else None,
        pool_steps=int(manifest.get("pool_steps", TRAIN_POOL_STEPS)),
    )


def act_tagger_from_bundle(bundle: ModelBundle) -> Optional[ActTaggerModel]:
    """Wrap the stored 2-class tagger with its vocabulary, if present."""
    if bundle.act_tagger is None:
        return None
    tokens = bundle.act_tagger.meta.get("vocab", [])
    vocab = Vocabulary(index={tok: i + 1 for i, tok in enumerate(tokens)})
    return ActTaggerModel(model=bundle.act_tagger, vocab=vocab)

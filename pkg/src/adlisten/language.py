"""Tokenization, focus-word extraction, bigram scoring, and token encodings.

The focus extractor is a deterministic heuristic (closed-class stoplist,
suffix rules, capitalization check for proper nouns) standing in for a
learned tagger; swap it out behind extract_focus if one becomes
available.
"""

from __future__ import annotations

import hashlib
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Optional

import numpy as np

from .errors import EmptyCorpus

FILLER_TOKENS = frozenset({"uh", "um", "er", "mm", "hmm"})

WH_WORDS_DEFAULT = ("who", "what", "when", "where", "which")

# Closed-class words never treated as a focus noun.
_STOPLIST = frozenset(
    """
    a an the
    i you he she it we they me him her us them
    my your his its our their mine yours hers ours theirs
    this that these those one ones some any none all both each every
    something anything nothing everything someone anyone everyone nobody
    myself yourself himself herself itself ourselves themselves
    am is are was were be been being
    do does did done doing
    have has had having
    will would can could shall should may might must
    and or but so because if then than as while though although unless
    in on at by for with about against between into through during
    before after above below to from up down of off over under out
    yes no not ok okay very really just too also now here there
    well oh ah hey please thanks thank maybe perhaps
    again still yet never always sometimes often soon ever
    who what when where which why how whom whose
    like want know think go going get got see say said feel
    good nice fine great bad new old
    """.split()
)

_LY_NOUN_EXCEPTIONS = frozenset(
    {"family", "fly", "jelly", "belly", "lily", "monopoly", "italy", "ally"}
)


def tokenize(raw_text: str) -> list[str]:
    """Lowercase whitespace tokens with edge punctuation stripped.

    Intra-word apostrophes survive ("i'll"); a trailing hyphen attached
    to a word survives as the fragment marker ("wa-"); fillers such as
    "um" are ordinary tokens. Chunks that strip to nothing are dropped.
    """
    out = []
    for chunk in raw_text.split():
        s = chunk.lower()
        i, j = 0, len(s)
        while i < j and not s[i].isalnum():
            i += 1
        while j > i and not (
            s[j - 1].isalnum()
            or (s[j - 1] == "-" and j - 1 > i and s[j - 2].isalnum())
        ):
            j -= 1
        if j > i:
            out.append(s[i:j])
    return out


@dataclass(frozen=True)
class FocusResult:
    focus: Optional[str]
    position: Optional[int]

    @property
    def found(self) -> bool:
        return self.focus is not None


def _proper_nouns(raw_text: str) -> set[str]:
    """Lowered forms of capitalized, non-sentence-initial words."""
    proper: set[str] = set()
    sentence_start = True
    for chunk in raw_text.split():
        stripped = chunk.lstrip("\"'(")
        if stripped and stripped[0].isupper() and not sentence_start:
            toks = tokenize(chunk)
            # the pronoun "I" is capitalized everywhere; never a name
            if toks and toks[0] != "i":
                proper.add(toks[0])
        sentence_start = bool(chunk) and chunk[-1] in ".!?"
    return proper


def _noun_like(token: str, proper: set[str]) -> bool:
    if token in proper:
        return True
    if token in _STOPLIST or token in FILLER_TOKENS:
        return False
    if "'" in token or token.endswith("-"):
        return False
    if token.isdigit():
        return False
    if token.endswith("est") and len(token) > 4:
        return False
    if token.endswith("ly") and token not in _LY_NOUN_EXCEPTIONS:
        return False
    return True


def extract_focus(tokens: list[str], raw_text: str = "") -> FocusResult:
    """Last noun-like token, or nothing when the utterance has none."""
    proper = _proper_nouns(raw_text) if raw_text else set()
    for pos in range(len(tokens) - 1, -1, -1):
        if _noun_like(tokens[pos], proper):
            return FocusResult(focus=tokens[pos], position=pos)
    return FocusResult(focus=None, position=None)


@dataclass
class BigramModel:
    """Unigram/bigram counts with add-one smoothing over a frozen vocab."""

    unigrams: Counter = field(default_factory=Counter)
    bigrams: Counter = field(default_factory=Counter)
    total_tokens: int = 0

    @property
    def vocab_size(self) -> int:
        return len(self.unigrams)

    def unigram_probability(self, token: str) -> float:
        return (self.unigrams[token] + 1) / (self.total_tokens + self.vocab_size)

    def conditional_probability(self, token: str, history: str) -> float:
        return (self.bigrams[(history, token)] + 1) / (
            self.unigrams[history] + self.vocab_size
        )


def train_bigram(corpus: Iterable[list[str]]) -> BigramModel:
    """Count unigrams and within-line bigrams; raises on an empty stream."""
    model = BigramModel()
    for tokens in corpus:
        model.unigrams.update(tokens)
        model.bigrams.update(zip(tokens, tokens[1:]))
        model.total_tokens += len(tokens)
    if model.total_tokens == 0:
        raise EmptyCorpus("no tokens in the training stream")
    return model


def joint_probability(model: BigramModel, wh: str, noun: str) -> float:
    """P(wh) * P(noun | wh), both add-one smoothed; always positive."""
    return model.unigram_probability(wh) * model.conditional_probability(noun, wh)


def load_corpus(path: str) -> list[list[str]]:
    """One utterance per line, tokenized; blank lines skipped."""
    out = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            tokens = tokenize(line)
            if tokens:
                out.append(tokens)
    return out


@dataclass
class Vocabulary:
    """Frozen token -> index map; index 0 is reserved for OOV."""

    index: dict[str, int]

    @property
    def size(self) -> int:
        return len(self.index) + 1

    def lookup(self, token: str) -> int:
        return self.index.get(token, 0)

    def tokens_in_order(self) -> list[str]:
        return [t for t, _ in sorted(self.index.items(), key=lambda kv: kv[1])]


def build_vocabulary(
    corpus: Iterable[list[str]], max_size: Optional[int] = None
) -> Vocabulary:
    """Most frequent tokens first (ties by first appearance), indices from 1."""
    counts: Counter = Counter()
    order: dict[str, int] = {}
    for tokens in corpus:
        for tok in tokens:
            counts[tok] += 1
            order.setdefault(tok, len(order))
    ranked = sorted(counts, key=lambda t: (-counts[t], order[t]))
    if max_size is not None:
        ranked = ranked[: max(0, max_size - 1)]
    return Vocabulary(index={tok: i + 1 for i, tok in enumerate(ranked)})


def one_hot_sequence(vocab: Vocabulary, tokens: list[str]) -> np.ndarray:
    """(len(tokens), vocab.size) matrix with exactly one 1 per row."""
    out = np.zeros((len(tokens), vocab.size))
    for row, tok in enumerate(tokens):
        out[row, vocab.lookup(tok)] = 1.0
    return out


@dataclass
class EmbeddingTable:
    """Token vectors of one dimension; OOV vectors are seeded-hash random."""

    dim: int
    vectors: dict[str, np.ndarray] = field(default_factory=dict)
    oov_seed: int = 0

    def embed(self, token: str) -> np.ndarray:
        known = self.vectors.get(token)
        if known is not None:
            return known
        return _hash_vector(token, self.dim, self.oov_seed)


def _hash_vector(token: str, dim: int, seed: int) -> np.ndarray:
    digest = hashlib.blake2b(
        f"{seed}:{token}".encode("utf-8"), digest_size=8
    ).digest()
    rng = np.random.Generator(np.random.PCG64(int.from_bytes(digest, "big")))
    return rng.standard_normal(dim) * 0.3


def embed_sequence(table: EmbeddingTable, tokens: list[str]) -> np.ndarray:
    """(len(tokens), dim) matrix; deterministic including OOV rows."""
    if not tokens:
        return np.zeros((0, table.dim))
    return np.stack([table.embed(tok) for tok in tokens])


def load_embeddings(path: str, oov_seed: int = 0) -> EmbeddingTable:
    """Text lines "token v1 ... vd"; dimension inferred from the first line."""
    vectors: dict[str, np.ndarray] = {}
    dim: Optional[int] = None
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            parts = line.split()
            if not parts:
                continue
            token, values = parts[0], parts[1:]
            if dim is None:
                dim = len(values)
                if dim == 0:
                    raise ValueError(f"line {line_no}: no vector components")
            if len(values) != dim:
                raise ValueError(
                    f"line {line_no}: expected {dim} components, got {len(values)}"
                )
            vectors[token] = np.array([float(v) for v in values])
    if dim is None:
        raise EmptyCorpus(f"no embeddings in {path}")
    return EmbeddingTable(dim=dim, vectors=vectors, oov_seed=oov_seed)

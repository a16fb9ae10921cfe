"""Bidirectional GRU sequence classifier, built from scratch on numpy.

One cell computes, per step,

    z = sigmoid(Wz x + Uz h_prev + bz)
    r = sigmoid(Wr x + Ur h_prev + br)
    c = tanh(Wh x + Uh (r * h_prev) + bh)
    h = (1 - z) * h_prev + z * c

A forward cell reads the sequence left to right, a backward cell reads
it right to left, and each step's outputs are concatenated. The softmax
head consumes the concatenation of the two final hidden states. Training
is plain mini-batch gradient descent on mean cross-entropy, with
gradients from backpropagation through time and global-norm clipping.
"""

from __future__ import annotations

import json
import zipfile
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .dialogue import DegreeDistribution, normalize_distribution
from .errors import (
    EmptyBatch,
    EmptyDataset,
    EmptySequence,
    FormatVersionMismatch,
    ShapeMismatch,
)

FORMAT_VERSION = 1
INIT_SCALE = 0.08


def _sigmoid(v: np.ndarray) -> np.ndarray:
    out = np.empty_like(v)
    pos = v >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-v[pos]))
    ev = np.exp(v[~pos])
    out[~pos] = ev / (1.0 + ev)
    return out


def _softmax(v: np.ndarray) -> np.ndarray:
    shifted = v - v.max()
    e = np.exp(shifted)
    return e / e.sum()


@dataclass
class GRUCellParams:
    wz: np.ndarray
    uz: np.ndarray
    bz: np.ndarray
    wr: np.ndarray
    ur: np.ndarray
    br: np.ndarray
    wh: np.ndarray
    uh: np.ndarray
    bh: np.ndarray

    @property
    def input_dim(self) -> int:
        return self.wz.shape[1]

    @property
    def hidden_dim(self) -> int:
        return self.wz.shape[0]

    def tensors(self) -> dict[str, np.ndarray]:
        return {
            "wz": self.wz, "uz": self.uz, "bz": self.bz,
            "wr": self.wr, "ur": self.ur, "br": self.br,
            "wh": self.wh, "uh": self.uh, "bh": self.bh,
        }


def init_cell(input_dim: int, hidden_dim: int, rng: np.random.Generator) -> GRUCellParams:
    u = lambda *shape: rng.uniform(-INIT_SCALE, INIT_SCALE, size=shape)
    return GRUCellParams(
        wz=u(hidden_dim, input_dim), uz=u(hidden_dim, hidden_dim), bz=u(hidden_dim),
        wr=u(hidden_dim, input_dim), ur=u(hidden_dim, hidden_dim), br=u(hidden_dim),
        wh=u(hidden_dim, input_dim), uh=u(hidden_dim, hidden_dim), bh=u(hidden_dim),
    )


@dataclass
class InputScaler:
    """Per-dimension standardization fitted on training data."""

    mu: np.ndarray
    sd: np.ndarray

    def apply(self, xs: np.ndarray) -> np.ndarray:
        return (xs - self.mu) / self.sd

    @classmethod
    def fit(cls, rows: np.ndarray) -> "InputScaler":
        mu = rows.mean(axis=0)
        sd = rows.std(axis=0)
        return cls(mu=mu, sd=np.maximum(sd, 1e-8))

    @classmethod
    def identity(cls, dim: int) -> "InputScaler":
        return cls(mu=np.zeros(dim), sd=np.ones(dim))


@dataclass
class BiGRUClassifier:
    forward_cell: GRUCellParams
    backward_cell: GRUCellParams
    head_w: np.ndarray
    head_b: np.ndarray
    scaler: Optional[InputScaler] = None
    meta: dict = field(default_factory=dict)

    @property
    def input_dim(self) -> int:
        return self.forward_cell.input_dim

    @property
    def hidden_dim(self) -> int:
        return self.forward_cell.hidden_dim

    @property
    def num_classes(self) -> int:
        return self.head_w.shape[0]

    def parameters(self) -> dict[str, np.ndarray]:
        out = {}
        for prefix, cell in (("fwd", self.forward_cell), ("bwd", self.backward_cell)):
            for name, tensor in cell.tensors().items():
                out[f"{prefix}.{name}"] = tensor
        out["head.w"] = self.head_w
        out["head.b"] = self.head_b
        return out


def init_classifier(
    input_dim: int,
    hidden_dim: int,
    num_classes: int = 4,
    seed: int = 0,
    scaler: Optional[InputScaler] = None,
) -> BiGRUClassifier:
    """Fresh model with all weights uniform in [-0.08, 0.08] from the seed."""
    rng = np.random.Generator(np.random.PCG64(seed))
    return BiGRUClassifier(
        forward_cell=init_cell(input_dim, hidden_dim, rng),
        backward_cell=init_cell(input_dim, hidden_dim, rng),
        head_w=rng.uniform(-INIT_SCALE, INIT_SCALE, size=(num_classes, 2 * hidden_dim)),
        head_b=rng.uniform(-INIT_SCALE, INIT_SCALE, size=num_classes),
        scaler=scaler,
        meta={"seed": seed},
    )


def gru_step(cell: GRUCellParams, x: np.ndarray, h_prev: np.ndarray) -> np.ndarray:
    """One recurrence step; see the module docstring for the equations."""
    x = np.asarray(x, dtype=np.float64)
    h_prev = np.asarray(h_prev, dtype=np.float64)
    if x.shape != (cell.input_dim,) or h_prev.shape != (cell.hidden_dim,):
        raise ShapeMismatch(
            f"x {x.shape} / h_prev {h_prev.shape} vs cell "
            f"D={cell.input_dim}, H={cell.hidden_dim}"
        )
    z = _sigmoid(cell.wz @ x + cell.uz @ h_prev + cell.bz)
    r = _sigmoid(cell.wr @ x + cell.ur @ h_prev + cell.br)
    c = np.tanh(cell.wh @ x + cell.uh @ (r * h_prev) + cell.bh)
    return (1.0 - z) * h_prev + z * c


def _run_cell(cell: GRUCellParams, xs: np.ndarray):
    """Full forward pass with the per-step caches BPTT needs."""
    steps, h = len(xs), cell.hidden_dim
    hs = np.zeros((steps + 1, h))
    zs = np.zeros((steps, h))
    rs = np.zeros((steps, h))
    cs = np.zeros((steps, h))
    for t in range(steps):
        h_prev = hs[t]
        zs[t] = _sigmoid(cell.wz @ xs[t] + cell.uz @ h_prev + cell.bz)
        rs[t] = _sigmoid(cell.wr @ xs[t] + cell.ur @ h_prev + cell.br)
        cs[t] = np.tanh(cell.wh @ xs[t] + cell.uh @ (rs[t] * h_prev) + cell.bh)
        hs[t + 1] = (1.0 - zs[t]) * h_prev + zs[t] * cs[t]
    return hs, zs, rs, cs


def _cell_backward(
    cell: GRUCellParams,
    xs: np.ndarray,
    hs: np.ndarray,
    zs: np.ndarray,
    rs: np.ndarray,
    cs: np.ndarray,
    dh_final: np.ndarray,
    grads: dict[str, np.ndarray],
    prefix: str,
) -> None:
    """Backpropagate through time from a gradient at the final state."""
    dh = dh_final.copy()
    for t in range(len(xs) - 1, -1, -1):
        x, h_prev = xs[t], hs[t]
        z, r, c = zs[t], rs[t], cs[t]

        dz = dh * (c - h_prev)
        dc = dh * z
        dh_prev = dh * (1.0 - z)

        da_c = dc * (1.0 - c * c)
        grads[f"{prefix}.wh"] += np.outer(da_c, x)
        grads[f"{prefix}.uh"] += np.outer(da_c, r * h_prev)
        grads[f"{prefix}.bh"] += da_c
        through_uh = cell.uh.T @ da_c
        dr = through_uh * h_prev
        dh_prev += through_uh * r

        da_z = dz * z * (1.0 - z)
        grads[f"{prefix}.wz"] += np.outer(da_z, x)
        grads[f"{prefix}.uz"] += np.outer(da_z, h_prev)
        grads[f"{prefix}.bz"] += da_z
        dh_prev += cell.uz.T @ da_z

        da_r = dr * r * (1.0 - r)
        grads[f"{prefix}.wr"] += np.outer(da_r, x)
        grads[f"{prefix}.ur"] += np.outer(da_r, h_prev)
        grads[f"{prefix}.br"] += da_r
        dh_prev += cell.ur.T @ da_r

        dh = dh_prev


def _prepare(model: BiGRUClassifier, xs: Sequence) -> np.ndarray:
    arr = np.asarray(xs, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.size == 0:
        raise EmptySequence("classifier input is empty")
    if arr.shape[1] != model.input_dim:
        raise ShapeMismatch(f"input dim {arr.shape[1]} != model dim {model.input_dim}")
    if model.scaler is not None:
        arr = model.scaler.apply(arr)
    return arr


def bigru_forward(model: BiGRUClassifier, xs: Sequence) -> np.ndarray:
    """(T, 2H) matrix: forward state and aligned backward state per step."""
    arr = _prepare(model, xs)
    hs_f, _, _, _ = _run_cell(model.forward_cell, arr)
    hs_b, _, _, _ = _run_cell(model.backward_cell, arr[::-1])
    return np.concatenate([hs_f[1:], hs_b[1:][::-1]], axis=1)


def predict_proba(model: BiGRUClassifier, xs: Sequence) -> np.ndarray:
    """Softmax class probabilities from the pooled final hidden states."""
    arr = _prepare(model, xs)
    hs_f, _, _, _ = _run_cell(model.forward_cell, arr)
    hs_b, _, _, _ = _run_cell(model.backward_cell, arr[::-1])
    pooled = np.concatenate([hs_f[-1], hs_b[-1]])
    return _softmax(model.head_w @ pooled + model.head_b)


def classify(model: BiGRUClassifier, xs: Sequence) -> DegreeDistribution:
    """Four-degree distribution for one feature sequence."""
    if model.num_classes != 4:
        raise ShapeMismatch(f"need a 4-class model, got {model.num_classes}")
    return normalize_distribution(predict_proba(model, xs))


def zero_grads(model: BiGRUClassifier) -> dict[str, np.ndarray]:
    return {name: np.zeros_like(p) for name, p in model.parameters().items()}


def loss_and_gradients(
    model: BiGRUClassifier, batch: Sequence[tuple[Sequence, int]]
) -> tuple[float, dict[str, np.ndarray]]:
    """Mean cross-entropy and its gradients over a batch of sequences."""
    if len(batch) == 0:
        raise EmptyBatch("empty training batch")
    grads = zero_grads(model)
    h = model.hidden_dim
    total_loss = 0.0
    inv_b = 1.0 / len(batch)
    for xs, label in batch:
        if not 0 <= label < model.num_classes:
            raise ValueError(f"label {label} outside 0..{model.num_classes - 1}")
        arr = _prepare(model, xs)
        rev = arr[::-1]
        f_hs, f_zs, f_rs, f_cs = _run_cell(model.forward_cell, arr)
        b_hs, b_zs, b_rs, b_cs = _run_cell(model.backward_cell, rev)
        pooled = np.concatenate([f_hs[-1], b_hs[-1]])
        probs = _softmax(model.head_w @ pooled + model.head_b)
        total_loss += -np.log(max(probs[label], 1e-300))

        dlogits = probs.copy()
        dlogits[label] -= 1.0
        dlogits *= inv_b
        grads["head.w"] += np.outer(dlogits, pooled)
        grads["head.b"] += dlogits
        dpooled = model.head_w.T @ dlogits
        _cell_backward(
            model.forward_cell, arr, f_hs, f_zs, f_rs, f_cs, dpooled[:h], grads, "fwd"
        )
        _cell_backward(
            model.backward_cell, rev, b_hs, b_zs, b_rs, b_cs, dpooled[h:], grads, "bwd"
        )
    return total_loss * inv_b, grads


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.05
    epochs: int = 50
    batch_size: int = 8
    seed: int = 0
    clip_norm: float = 5.0

    def __post_init__(self):
        if self.learning_rate < 0.0:
            raise ValueError("learning rate must be non-negative")


def clip_gradients(grads: dict[str, np.ndarray], clip_norm: float) -> float:
    """Scale all gradients so their global L2 norm is at most clip_norm."""
    total = float(np.sqrt(sum(float((g * g).sum()) for g in grads.values())))
    if clip_norm > 0.0 and total > clip_norm:
        scale = clip_norm / total
        for g in grads.values():
            g *= scale
    return total


def train(
    model: BiGRUClassifier,
    dataset: Sequence[tuple[Sequence, int]],
    cfg: TrainConfig,
) -> list[float]:
    """Mini-batch gradient descent in place; returns per-epoch mean loss."""
    if len(dataset) == 0:
        raise EmptyDataset("no training sequences")
    rng = np.random.Generator(np.random.PCG64(cfg.seed))
    params = model.parameters()
    history = []
    for _ in range(cfg.epochs):
        order = rng.permutation(len(dataset))
        epoch_loss = 0.0
        for start in range(0, len(dataset), cfg.batch_size):
            batch = [dataset[i] for i in order[start : start + cfg.batch_size]]
            loss, grads = loss_and_gradients(model, batch)
            clip_gradients(grads, cfg.clip_norm)
            for name, p in params.items():
                p -= cfg.learning_rate * grads[name]
            epoch_loss += loss * len(batch)
        history.append(epoch_loss / len(dataset))
    return history


def accuracy(model: BiGRUClassifier, dataset: Sequence[tuple[Sequence, int]]) -> float:
    hits = sum(
        int(np.argmax(predict_proba(model, xs)) == label) for xs, label in dataset
    )
    return hits / len(dataset)


def save_model(model: BiGRUClassifier, path: str) -> None:
    """Versioned npz container: dims, meta, and row-major parameter arrays."""
    meta = {
        "format_version": FORMAT_VERSION,
        "kind": "bigru",
        "input_dim": model.input_dim,
        "hidden_dim": model.hidden_dim,
        "num_classes": model.num_classes,
        "has_scaler": model.scaler is not None,
        "meta": model.meta,
    }
    arrays = {name.replace(".", "_"): p for name, p in model.parameters().items()}
    if model.scaler is not None:
        arrays["scaler_mu"] = model.scaler.mu
        arrays["scaler_sd"] = model.scaler.sd
    np.savez(path, __meta__=json.dumps(meta), **arrays)


def load_model(path: str, expect_classes: Optional[int] = None) -> BiGRUClassifier:
    try:
        with np.load(path, allow_pickle=False) as data:
            try:
                meta = json.loads(str(data["__meta__"]))
            except KeyError:
                raise FormatVersionMismatch(f"{path} has no model header") from None
            if meta.get("format_version") != FORMAT_VERSION or meta.get("kind") != "bigru":
                raise FormatVersionMismatch(f"{path}: unsupported model header {meta}")
            if expect_classes is not None and meta["num_classes"] != expect_classes:
                raise FormatVersionMismatch(
                    f"{path}: {meta['num_classes']} classes, expected {expect_classes}"
                )
            get = lambda name: np.array(data[name.replace('.', '_')])
            cells = {}
            for prefix in ("fwd", "bwd"):
                cells[prefix] = GRUCellParams(
                    **{k: get(f"{prefix}.{k}") for k in
                       ("wz", "uz", "bz", "wr", "ur", "br", "wh", "uh", "bh")}
                )
            scaler = None
            if meta.get("has_scaler"):
                scaler = InputScaler(
                    mu=np.array(data["scaler_mu"]), sd=np.array(data["scaler_sd"])
                )
            model = BiGRUClassifier(
                forward_cell=cells["fwd"],
                backward_cell=cells["bwd"],
                head_w=get("head.w"),
                head_b=get("head.b"),
                scaler=scaler,
                meta=meta.get("meta", {}),
            )
    except (ValueError, EOFError, KeyError, zipfile.BadZipFile) as exc:
        raise FormatVersionMismatch(
            f"{path}: not a readable model file ({exc})"
        ) from exc
    return model

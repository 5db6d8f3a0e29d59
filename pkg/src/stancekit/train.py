"""Per-subtask classifier fine-tuning and prediction.

The bundled encoder family is a desk-scale test double: hashed character
n-gram features feed a two-layer network whose logits are multiplied by a
large fixed output scale. The scale puts the stock fine-tuning learning
rate (1e-5) in the encoder's productive range, mirroring how a pretrained
network exposes high logit sensitivity; it exists to exercise the training
loop end to end, not to model language. Production-scale pretrained
encoders plug in by registry config (``model.<key>.encoder``); refs outside
the ``tiny:`` family raise UnsupportedEncoder.

Training follows the stock configuration: decoupled-weight-decay Adam at a
constant learning rate, gradient clipping at global norm 1.0, plain
cross-entropy (imbalance is handled upstream by augmentation, never by
class weighting), and best-dev-macro-F1 checkpoint selection.
"""

from __future__ import annotations

import hashlib
import json
import zlib
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from . import evaluate, kernels
from .corpus import LabeledExample
from .errors import (
    EmptyDataset,
    LabelCardinalityMismatch,
    MissingFile,
    OutOfMemory,
    TaskMismatch,
    UnsupportedEncoder,
    UsageError,
)
from .predictions import PredictionRow, PredictionSet
from .tasks import TaskSpec

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8
WEIGHT_DECAY = 0.01
CLIP_NORM = 1.0

PARAM_KEYS = ("W1", "b1", "W2", "b2")

CHECKPOINT_POLICY = "best_dev_macro_f1"


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-5
    train_batch: int = 8
    eval_batch: int = 8
    epochs: int = 5
    dropout: float = 0.2
    max_seq_len: int = 128
    seed: int = 0

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be > 0")
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")
        if not 0 <= self.dropout < 1:
            raise ValueError("dropout must be in [0, 1)")
        if self.train_batch < 1 or self.eval_batch < 1:
            raise ValueError("batch sizes must be >= 1")
        if self.max_seq_len < 1:
            raise ValueError("max_seq_len must be >= 1")


@dataclass(frozen=True)
class EncoderSpec:
    """Parameters of one desk-scale encoder variant."""

    feature_dim: int = 1024
    hidden_dim: int = 64
    logit_scale: float = 4096.0
    salt: int = 0

    def ref(self) -> str:
        return (
            f"tiny:dim={self.feature_dim},hidden={self.hidden_dim},"
            f"scale={self.logit_scale:g},salt={self.salt}"
        )


def parse_encoder_ref(ref: str) -> EncoderSpec:
    scheme, _, params = ref.partition(":")
    if scheme != "tiny":
        raise UnsupportedEncoder(ref)
    kwargs: dict = {}
    if params:
        for item in params.split(","):
            key, _, value = item.partition("=")
            key = key.strip()
            try:
                if key == "dim":
                    kwargs["feature_dim"] = int(value)
                elif key == "hidden":
                    kwargs["hidden_dim"] = int(value)
                elif key == "scale":
                    kwargs["logit_scale"] = float(value)
                elif key == "salt":
                    kwargs["salt"] = int(value)
                else:
                    raise UsageError(f"unknown encoder parameter {key!r} in {ref!r}")
            except ValueError:
                raise UsageError(f"bad encoder parameter {item!r} in {ref!r}") from None
    return EncoderSpec(**kwargs)


@dataclass(frozen=True)
class ModelEntry:
    registry_key: str
    encoder_ref: str


def default_registry() -> dict[str, ModelEntry]:
    """The stock model line-up, each mapped to a distinct desk-scale encoder."""
    refs = {
        "bertweet-large": "tiny:hidden=96,salt=1",
        "bertweet-base": "tiny:hidden=64,salt=2",
        "bert-base": "tiny:hidden=64,salt=3",
        "xlm-r": "tiny:hidden=96,salt=4",
        "hate-bert": "tiny:hidden=80,salt=5",
        "fbert": "tiny:hidden=80,salt=6",
    }
    return {key: ModelEntry(key, ref) for key, ref in refs.items()}


# --- features ------------------------------------------------------------


def featurize(texts: Sequence[str], spec: EncoderSpec, max_seq_len: int) -> np.ndarray:
    """L2-normalized hashed bag of word unigrams and char 3-5 grams."""
    out = np.zeros((len(texts), spec.feature_dim), dtype=np.float64)
    for i, text in enumerate(texts):
        tokens = text.lower().split()[:max_seq_len]
        row = out[i]
        for token in tokens:
            row[zlib.crc32(b"w:" + token.encode("utf-8")) % spec.feature_dim] += 1.0
        joined = " ".join(tokens)
        for n in (3, 4, 5):
            for j in range(len(joined) - n + 1):
                gram = joined[j:j + n]
                row[zlib.crc32(b"c:" + gram.encode("utf-8")) % spec.feature_dim] += 1.0
        norm = np.linalg.norm(row)
        if norm > 0:
            row /= norm
    return out


# --- model ---------------------------------------------------------------


@dataclass
class TrainedModel:
    registry_key: str
    task_id: str
    label_set: tuple[str, ...]
    encoder: EncoderSpec
    cfg: TrainConfig
    params: dict[str, np.ndarray]
    dev_trace: list[float] = field(default_factory=list)
    best_epoch: int = -1

    def forward(self, features: np.ndarray) -> np.ndarray:
        """Class probabilities, rows on the simplex."""
        hidden = np.maximum(features @ self.params["W1"] + self.params["b1"], 0.0)
        logits = (hidden @ self.params["W2"] + self.params["b2"]) * self.encoder.logit_scale
        logits -= logits.max(axis=1, keepdims=True)
        probs = np.exp(logits)
        probs /= probs.sum(axis=1, keepdims=True)
        return probs


def _init_params(spec: EncoderSpec, n_labels: int, seed: int) -> dict[str, np.ndarray]:
    # Seed material disjoint from the training-loop rng stream.
    rng = np.random.default_rng([seed, spec.salt, 0])
    return {
        "W1": rng.standard_normal((spec.feature_dim, spec.hidden_dim)),
        "b1": np.zeros(spec.hidden_dim),
        "W2": np.zeros((spec.hidden_dim, n_labels)),
        "b2": np.zeros(n_labels),
    }


def _check_labels(examples: Sequence[LabeledExample], task: TaskSpec, what: str) -> np.ndarray:
    idx = np.empty(len(examples), dtype=np.int64)
    for i, e in enumerate(examples):
        if e.label is None or e.label not in task.label_set:
            raise LabelCardinalityMismatch(
                f"{what} example {e.example_id} has label {e.label!r}, "
                f"expected one of {task.label_set}"
            )
        idx[i] = task.label_set.index(e.label)
    return idx


def config_fingerprint(cfg: TrainConfig) -> str:
    blob = json.dumps(asdict(cfg), sort_keys=True).encode("utf-8")
    return hashlib.sha256(blob).hexdigest()[:12]


def fine_tune(
    train: Sequence[LabeledExample],
    dev: Sequence[LabeledExample],
    task: TaskSpec,
    entry: ModelEntry,
    cfg: TrainConfig,
) -> tuple[TrainedModel, list[float]]:
    """Train for cfg.epochs epochs and return the best-dev-F1 checkpoint.

    The dev trace has exactly cfg.epochs entries; ties on the best dev macro
    F1 keep the earliest epoch. With epochs=0 the initialized model comes
    back unchanged with an empty trace.
    """
    train, dev = list(train), list(dev)
    if not train or not dev:
        raise EmptyDataset("fine_tune needs non-empty train and dev sets")
    y_train = _check_labels(train, task, "train")
    _check_labels(dev, task, "dev")
    spec = parse_encoder_ref(entry.encoder_ref)
    n_labels = len(task.label_set)
    scale = spec.logit_scale

    rng = np.random.default_rng([cfg.seed, spec.salt, 1])
    try:
        params = _init_params(spec, n_labels, cfg.seed)
        adam_m = {k: np.zeros_like(v) for k, v in params.items()}
        adam_v = {k: np.zeros_like(v) for k, v in params.items()}

        model = TrainedModel(
            entry.registry_key, task.task_id, task.label_set, spec, cfg, params
        )
        if cfg.epochs == 0:
            return model, []

        X = featurize([e.text for e in train], spec, cfg.max_seq_len)
        trace: list[float] = []
        best_f1 = -1.0
        best_epoch = -1
        best_params = {k: v.copy() for k, v in params.items()}
        step = 0
        for epoch in range(cfg.epochs):
            order = rng.permutation(len(train))
            for start in range(0, len(train), cfg.train_batch):
                batch = order[start:start + cfg.train_batch]
                xb, yb = X[batch], y_train[batch]
                h_pre = xb @ params["W1"] + params["b1"]
                h = np.maximum(h_pre, 0.0)
                if cfg.dropout > 0:
                    mask = (rng.random(h.shape) >= cfg.dropout) / (1.0 - cfg.dropout)
                    hd = h * mask
                else:
                    mask = 1.0
                    hd = h
                logits = (hd @ params["W2"] + params["b2"]) * scale
                logits -= logits.max(axis=1, keepdims=True)
                probs = np.exp(logits)
                probs /= probs.sum(axis=1, keepdims=True)
                dlogits = probs
                dlogits[np.arange(len(yb)), yb] -= 1.0
                dlogits *= scale / len(yb)
                grads = {
                    "W2": hd.T @ dlogits,
                    "b2": dlogits.sum(axis=0),
                }
                dh = (dlogits @ params["W2"].T) * mask * (h_pre > 0)
                grads["W1"] = xb.T @ dh
                grads["b1"] = dh.sum(axis=0)

                total_norm = np.sqrt(
                    sum(float((g * g).sum()) for g in grads.values())
                )
                if total_norm > CLIP_NORM:
                    for g in grads.values():
                        g /= total_norm
                step += 1
                bc1 = 1.0 - ADAM_BETA1**step
                bc2 = 1.0 - ADAM_BETA2**step
                for key in PARAM_KEYS:
                    kernels.adamw_update(
                        params[key].ravel(), grads[key].ravel(),
                        adam_m[key].ravel(), adam_v[key].ravel(),
                        bc1, bc2, cfg.learning_rate, ADAM_BETA1, ADAM_BETA2,
                        ADAM_EPS, WEIGHT_DECAY,
                    )
            dev_pset = predict(model, dev, task, cfg)
            dev_f1 = evaluate.score(dev, dev_pset, task).macro_f1
            trace.append(dev_f1)
            if dev_f1 > best_f1:
                best_f1 = dev_f1
                best_epoch = epoch
                best_params = {k: v.copy() for k, v in params.items()}
    except MemoryError:
        raise OutOfMemory(cfg.train_batch) from None

    model.params = best_params
    model.dev_trace = trace
    model.best_epoch = best_epoch
    return model, trace


def predict(
    model: TrainedModel,
    examples: Sequence[LabeledExample],
    task: TaskSpec,
    cfg: TrainConfig | None = None,
) -> PredictionSet:
    """Order-preserving predictions with simplex-normalized score vectors."""
    if model.task_id != task.task_id or model.label_set != task.label_set:
        raise TaskMismatch(
            f"model is for task {model.task_id} {model.label_set}, "
            f"asked to predict task {task.task_id}"
        )
    cfg = cfg or model.cfg
    examples = list(examples)
    rows: list[PredictionRow] = []
    for start in range(0, len(examples), cfg.eval_batch):
        chunk = examples[start:start + cfg.eval_batch]
        feats = featurize([e.text for e in chunk], model.encoder, cfg.max_seq_len)
        probs = model.forward(feats)
        picks = probs.argmax(axis=1)
        for e, probs_row, pick in zip(chunk, probs, picks):
            scores = {l: float(probs_row[j]) for j, l in enumerate(task.label_set)}
            rows.append(PredictionRow(e.example_id, task.label_set[pick], scores))
    splits = {e.split for e in examples}
    metadata = {
        "seed": cfg.seed,
        "config_hash": config_fingerprint(cfg),
        "checkpoint_policy": CHECKPOINT_POLICY,
        "best_epoch": model.best_epoch,
        "encoder": model.encoder.ref(),
    }
    return PredictionSet(
        model.registry_key,
        task.task_id,
        splits.pop() if len(splits) == 1 else None,
        rows,
        metadata,
    )


# --- checkpoints ----------------------------------------------------------


def save_model(model: TrainedModel, directory) -> Path:
    """Persist a checkpoint as per-parameter .npy files plus model.json."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for key in PARAM_KEYS:
        np.save(directory / f"{key}.npy", model.params[key])
    meta = {
        "format": 1,
        "registry_key": model.registry_key,
        "task_id": model.task_id,
        "label_set": list(model.label_set),
        "encoder_ref": model.encoder.ref(),
        "config": asdict(model.cfg),
        "dev_trace": model.dev_trace,
        "best_epoch": model.best_epoch,
    }
    with open(directory / "model.json", "w", encoding="utf-8", newline="\n") as fh:
        fh.write(json.dumps(meta, sort_keys=True, indent=2) + "\n")
    return directory


def load_model(directory) -> TrainedModel:
    directory = Path(directory)
    meta_path = directory / "model.json"
    if not meta_path.is_file():
        raise MissingFile(meta_path)
    with open(meta_path, encoding="utf-8") as fh:
        meta = json.load(fh)
    params = {key: np.load(directory / f"{key}.npy") for key in PARAM_KEYS}
    return TrainedModel(
        registry_key=meta["registry_key"],
        task_id=meta["task_id"],
        label_set=tuple(meta["label_set"]),
        encoder=parse_encoder_ref(meta["encoder_ref"]),
        cfg=TrainConfig(**meta["config"]),
        params=params,
        dev_trace=list(meta["dev_trace"]),
        best_epoch=meta["best_epoch"],
    )

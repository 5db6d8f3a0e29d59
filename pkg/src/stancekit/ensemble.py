"""Combine prediction sets by majority or weighted voting.

Vote resolution is deterministic, including ties: tied top scores go to the
configured tie-break, either the prediction of the heaviest (then
earliest-listed) member backing a tied label, or the task's majority label.
Scores within ``TIE_REL_TOL`` relative tolerance of the top count as exact
ties, which keeps tie structure stable under weight rescaling and float
rounding (0.3 + 0.2 must tie 0.5).
"""

from __future__ import annotations

import numpy as np

from dataclasses import dataclass
from typing import Sequence

from . import kernels
from .errors import (
    ExampleUniverseMismatch,
    MemberCountMismatch,
    NegativeWeight,
    TaskMismatch,
    UnknownLabel,
)
from .predictions import PredictionRow, PredictionSet
from .tasks import TaskSpec

MODES = ("majority", "weighted")
TIE_BREAKS = ("highest_weight_member", "majority_label")

TIE_REL_TOL = 1e-9

# Stock three-member line-ups; the second swaps the tweet-tuned encoder for
# the hate-tuned one.
PRESET_MEMBERS = {
    "ensemble1": ("bertweet-large", "xlm-r", "fbert"),
    "ensemble2": ("hate-bert", "xlm-r", "fbert"),
}


@dataclass(frozen=True)
class EnsembleConfig:
    mode: str
    members: tuple[tuple[str, float], ...]
    tie_break: str = "highest_weight_member"
    name: str | None = None

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.tie_break not in TIE_BREAKS:
            raise ValueError(
                f"tie_break must be one of {TIE_BREAKS}, got {self.tie_break!r}"
            )
        if len(self.members) < 2:
            raise ValueError("an ensemble needs at least two members")
        keys = [k for k, _ in self.members]
        if len(set(keys)) != len(keys):
            raise ValueError(f"duplicate member keys: {keys}")
        weights = [w for _, w in self.members]
        if any(not np.isfinite(w) or w < 0 for w in weights):
            raise NegativeWeight(f"weights must be finite and >= 0, got {weights}")
        if self.mode == "weighted" and not any(w > 0 for w in weights):
            raise ValueError("weighted mode needs at least one positive weight")

    def member_keys(self) -> list[str]:
        return [k for k, _ in self.members]

    def weights(self) -> list[float]:
        return [w for _, w in self.members]


def preset_config(
    name: str,
    mode: str = "weighted",
    weights: Sequence[float] | None = None,
    tie_break: str = "highest_weight_member",
) -> EnsembleConfig:
    try:
        keys = PRESET_MEMBERS[name]
    except KeyError:
        raise ValueError(
            f"unknown preset {name!r}; have {sorted(PRESET_MEMBERS)}"
        ) from None
    if weights is None:
        weights = [1.0] * len(keys)
    if len(weights) != len(keys):
        raise MemberCountMismatch(
            f"preset {name} has {len(keys)} members, got {len(weights)} weights"
        )
    return EnsembleConfig(mode, tuple(zip(keys, weights)), tie_break, name=name)


def weights_from_dev_f1(config: EnsembleConfig, dev_f1: dict[str, float]) -> EnsembleConfig:
    """Reweight members by their dev-split macro F1, normalized to sum 1."""
    missing = [k for k in config.member_keys() if k not in dev_f1]
    if missing:
        raise MemberCountMismatch(f"no dev F1 for members: {missing}")
    raw = [dev_f1[k] for k in config.member_keys()]
    total = sum(raw)
    if total <= 0:
        raise ValueError("dev F1 weights must have a positive sum")
    members = tuple(
        (k, f / total) for k, f in zip(config.member_keys(), raw)
    )
    return EnsembleConfig(config.mode, members, config.tie_break, config.name)


def _tie_break_code(tie_break: str) -> int:
    return (
        kernels.TIE_MAJORITY_LABEL
        if tie_break == "majority_label"
        else kernels.TIE_HIGHEST_WEIGHT
    )


def _resolve(
    totals: list[float],
    hard_idx: list[int],
    config: EnsembleConfig,
    task: TaskSpec,
) -> int:
    top = max(totals)
    tol = TIE_REL_TOL * max(1.0, abs(top))
    tied = [l for l, t in enumerate(totals) if top - t <= tol]
    if len(tied) == 1:
        return tied[0]
    if config.tie_break == "majority_label":
        return task.label_index(task.majority_label)
    best_w = -1.0
    chosen = -1
    for (_, weight), h in zip(config.members, hard_idx):
        if top - totals[h] <= tol and weight > best_w:
            best_w = weight
            chosen = h
    return chosen if chosen >= 0 else tied[0]


def majority_vote(
    member_labels: Sequence[str], config: EnsembleConfig, task: TaskSpec
) -> str:
    """Label with the strict plurality of votes; ties go to the tie-break."""
    if len(member_labels) != len(config.members):
        raise MemberCountMismatch(
            f"{len(member_labels)} predictions for {len(config.members)} members"
        )
    hard_idx = [task.label_index(l) for l in member_labels]
    totals = [0.0] * len(task.label_set)
    for h in hard_idx:
        totals[h] += 1.0
    return task.label_set[_resolve(totals, hard_idx, config, task)]


def weighted_vote(
    member_preds: Sequence[tuple[str, dict[str, float] | None]],
    config: EnsembleConfig,
    task: TaskSpec,
) -> str:
    """Argmax of the weight-scaled sum of member score vectors.

    Members without scores contribute the one-hot of their predicted label;
    with equal weights and one-hot members this reduces to majority_vote.
    """
    if config.mode != "weighted":
        raise ValueError("weighted_vote needs a weighted-mode config")
    if len(member_preds) != len(config.members):
        raise MemberCountMismatch(
            f"{len(member_preds)} predictions for {len(config.members)} members"
        )
    hard_idx = []
    totals = [0.0] * len(task.label_set)
    for ((label, scores), (_, weight)) in zip(member_preds, config.members):
        hard_idx.append(task.label_index(label))
        if scores is None:
            totals[task.label_index(label)] += weight * 1.0
        else:
            unknown = set(scores) - set(task.label_set)
            if unknown:
                raise UnknownLabel(sorted(unknown)[0])
            for l, label_name in enumerate(task.label_set):
                totals[l] += weight * scores.get(label_name, 0.0)
    return task.label_set[_resolve(totals, hard_idx, config, task)]


def ensemble_predictions(
    sets: Sequence[PredictionSet], config: EnsembleConfig, task: TaskSpec
) -> PredictionSet:
    """Join member sets by example id and vote per example.

    All members must share task, split and example universe; the output
    order follows the first member. Per-example resolution runs through the
    batched vote kernel, with combined scores normalized onto the simplex.
    """
    if len(sets) != len(config.members):
        raise MemberCountMismatch(
            f"{len(sets)} prediction sets for {len(config.members)} members"
        )
    for pset in sets:
        pset.validate(task)
        if pset.task_id is not None and pset.task_id != task.task_id:
            raise TaskMismatch(
                f"prediction set {pset.model_key} is for task {pset.task_id}"
            )
    splits = {s.split for s in sets if s.split is not None}
    if len(splits) > 1:
        raise TaskMismatch(f"prediction sets span splits {sorted(splits)}")

    base_ids = sets[0].example_ids()
    base_set = set(base_ids)
    for pset in sets[1:]:
        ids = set(pset.example_ids())
        if ids != base_set:
            raise ExampleUniverseMismatch(base_set - ids, ids - base_set)

    n_members, n_examples, n_labels = len(sets), len(base_ids), len(task.label_set)
    member_scores = np.zeros((n_members, n_examples, n_labels), dtype=np.float64)
    member_hard = np.zeros((n_members, n_examples), dtype=np.int64)
    order = {eid: i for i, eid in enumerate(base_ids)}
    for m, pset in enumerate(sets):
        for row in pset.rows:
            n = order[row.example_id]
            h = task.label_index(row.label)
            member_hard[m, n] = h
            if config.mode == "weighted" and row.scores is not None:
                for l, label_name in enumerate(task.label_set):
                    member_scores[m, n, l] = row.scores.get(label_name, 0.0)
            else:
                member_scores[m, n, h] = 1.0

    weights = np.asarray(config.weights(), dtype=np.float64)
    vote_weights = np.ones(n_members) if config.mode == "majority" else weights
    chosen = kernels.vote_batch(
        member_scores,
        vote_weights,
        member_hard,
        weights,
        _tie_break_code(config.tie_break),
        task.label_index(task.majority_label),
        TIE_REL_TOL,
    )

    totals = np.zeros((n_examples, n_labels), dtype=np.float64)
    for m in range(n_members):
        totals += vote_weights[m] * member_scores[m]
    sums = totals.sum(axis=1, keepdims=True)
    combined = totals / np.where(sums > 0, sums, 1.0)

    member_keys = config.member_keys()
    model_key = config.name or f"{config.mode}({'+'.join(member_keys)})"
    rows = [
        PredictionRow(
            eid,
            task.label_set[chosen[i]],
            {l: float(combined[i, j]) for j, l in enumerate(task.label_set)},
        )
        for i, eid in enumerate(base_ids)
    ]
    metadata = {
        "mode": config.mode,
        "members": member_keys,
        "weights": config.weights(),
        "tie_break": config.tie_break,
        "sources": [s.model_key for s in sets],
    }
    split = splits.pop() if splits else None
    return PredictionSet(model_key, task.task_id, split, rows, metadata)

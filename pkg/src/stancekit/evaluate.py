"""Scoring, F1 report tables and confusion-matrix figures.

Per-class precision/recall/F1 and macro F1 are computed from exact integer
confusion counts (rows = gold, columns = predicted). The zero-division
convention sets a class's F1 to 0 whenever precision + recall is 0, which
is recorded in the report metadata. The figure writer embeds the matrix in
a PNG text chunk so rendered annotations can be read back mechanically.
"""

from __future__ import annotations

import io
import json
import struct
import zlib
from dataclasses import dataclass, field
from decimal import ROUND_HALF_UP, Decimal
from pathlib import Path
from typing import Sequence

import numpy as np

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from . import kernels
from .corpus import LabeledExample
from .errors import (
    EmptyDataset,
    ExampleUniverseMismatch,
    UnknownLabel,
    UnlabeledGold,
    UnwritablePath,
)
from .predictions import PredictionSet
from .tasks import TaskSpec

ZERO_DIVISION_NOTE = "f1=0 when precision+recall=0"


@dataclass
class MetricsReport:
    task_id: str
    labels: tuple[str, ...]
    per_class: dict[str, dict[str, float]]
    macro_f1: float
    weighted_f1: float
    confusion: np.ndarray
    support: dict[str, int]
    metadata: dict = field(default_factory=dict)

    def scored(self) -> int:
        return int(self.confusion.sum())

    def to_dict(self) -> dict:
        return {
            "task_id": self.task_id,
            "labels": list(self.labels),
            "per_class": self.per_class,
            "macro_f1": self.macro_f1,
            "macro_f1_4dp": f"{self.macro_f1:.4f}",
            "weighted_f1": self.weighted_f1,
            "confusion": self.confusion.tolist(),
            "support": self.support,
            "metadata": self.metadata,
        }


def write_report(report: MetricsReport, path) -> Path:
    path = Path(path)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(json.dumps(report.to_dict(), sort_keys=True, indent=2) + "\n")
    return path


def load_report(path) -> MetricsReport:
    with open(path, encoding="utf-8") as fh:
        data = json.load(fh)
    return MetricsReport(
        task_id=data["task_id"],
        labels=tuple(data["labels"]),
        per_class=data["per_class"],
        macro_f1=data["macro_f1"],
        weighted_f1=data["weighted_f1"],
        confusion=np.asarray(data["confusion"], dtype=np.int64),
        support={k: int(v) for k, v in data["support"].items()},
        metadata=data.get("metadata", {}),
    )


def score(gold: Sequence[LabeledExample], pred: PredictionSet, task: TaskSpec) -> MetricsReport:
    """Score a prediction set against gold labels.

    Refuses unlabeled gold (the test-file sentinel) and mismatched example
    universes. Counts are exact integers; derived ratios are float64.
    """
    gold = list(gold)
    if not gold:
        raise EmptyDataset("no gold examples to score")
    for e in gold:
        if e.label is None:
            raise UnlabeledGold(f"gold example {e.example_id} has no label")
        if e.label not in task.label_set:
            raise UnknownLabel(e.label)
    pred.validate(task)

    gold_by_id = {e.example_id: e for e in gold}
    if len(gold_by_id) != len(gold):
        raise ExampleUniverseMismatch([], [])
    pred_ids = set(pred.example_ids())
    gold_ids = set(gold_by_id)
    if pred_ids != gold_ids:
        raise ExampleUniverseMismatch(gold_ids - pred_ids, pred_ids - gold_ids)

    gold_idx = np.array(
        [task.label_index(gold_by_id[r.example_id].label) for r in pred.rows],
        dtype=np.int64,
    )
    pred_idx = np.array(
        [task.label_index(r.label) for r in pred.rows], dtype=np.int64
    )
    confusion = kernels.confusion_counts(gold_idx, pred_idx, len(task.label_set))

    per_class: dict[str, dict[str, float]] = {}
    f1s = []
    supports = confusion.sum(axis=1)
    for i, label in enumerate(task.label_set):
        tp = float(confusion[i, i])
        predicted = float(confusion[:, i].sum())
        actual = float(supports[i])
        precision = tp / predicted if predicted > 0 else 0.0
        recall = tp / actual if actual > 0 else 0.0
        f1 = (
            2.0 * precision * recall / (precision + recall)
            if precision + recall > 0
            else 0.0
        )
        per_class[label] = {"precision": precision, "recall": recall, "f1": f1}
        f1s.append(f1)

    total_support = float(supports.sum())
    weighted_f1 = float(
        sum(f * s for f, s in zip(f1s, supports)) / total_support
    )
    return MetricsReport(
        task_id=task.task_id,
        labels=task.label_set,
        per_class=per_class,
        macro_f1=float(np.mean(f1s)),
        weighted_f1=weighted_f1,
        confusion=confusion,
        support={l: int(supports[i]) for i, l in enumerate(task.label_set)},
        metadata={"averaging": "macro", "zero_division": ZERO_DIVISION_NOTE,
                  "model_key": pred.model_key},
    )


# --- report tables -------------------------------------------------------


@dataclass(frozen=True)
class ReportEntry:
    model_key: str
    eval_report: MetricsReport | None = None
    test_report: MetricsReport | None = None
    augmented: bool = False


def _fmt_f1(report: MetricsReport | None) -> str:
    if report is None:
        return "--"
    q = Decimal(repr(report.macro_f1)).quantize(Decimal("0.01"), ROUND_HALF_UP)
    return f"{q:.2f}"


def report_table(entries: Sequence[ReportEntry], fmt: str = "text") -> str:
    """Model rows with two-decimal Eval F1 / Test F1 columns.

    Augmented-run rows are flagged "(AUG.)". ``fmt`` is "text" for a
    pipe-separated table or "markdown".
    """
    if not entries:
        raise EmptyDataset("no report entries")
    if fmt not in ("text", "markdown"):
        raise ValueError(f"unknown table format {fmt!r}")
    rows = []
    for entry in entries:
        name = entry.model_key + (" (AUG.)" if entry.augmented else "")
        rows.append((name, _fmt_f1(entry.eval_report), _fmt_f1(entry.test_report)))
    width = max(len("Model"), max(len(r[0]) for r in rows))
    lines = []
    if fmt == "markdown":
        lines.append(f"| {'Model'.ljust(width)} | Eval F1 | Test F1 |")
        lines.append(f"| {'-' * width} | ------- | ------- |")
        for name, ev, te in rows:
            lines.append(f"| {name.ljust(width)} | {ev.rjust(7)} | {te.rjust(7)} |")
    else:
        lines.append(f"{'Model'.ljust(width)} | Eval F1 | Test F1")
        for name, ev, te in rows:
            lines.append(f"{name.ljust(width)} | {ev.rjust(7)} | {te.rjust(7)}")
    return "\n".join(lines) + "\n"


# --- confusion figure ----------------------------------------------------

_PNG_SIGNATURE = b"\x89PNG\r\n\x1a\n"


def _png_chunk(kind: bytes, data: bytes) -> bytes:
    return (
        struct.pack(">I", len(data))
        + kind
        + data
        + struct.pack(">I", zlib.crc32(kind + data) & 0xFFFFFFFF)
    )


def _png_insert_text(png: bytes, pairs: dict[str, str]) -> bytes:
    if not png.startswith(_PNG_SIGNATURE):
        raise ValueError("not a PNG stream")
    # IHDR is mandatory and first: signature, 4-byte length, type, 13 bytes, CRC.
    ihdr_end = 8 + 4 + 4 + 13 + 4
    chunks = b"".join(
        _png_chunk(b"tEXt", key.encode("latin-1") + b"\x00" + value.encode("latin-1"))
        for key, value in pairs.items()
    )
    return png[:ihdr_end] + chunks + png[ihdr_end:]


def _png_read_text(path) -> dict[str, str]:
    data = Path(path).read_bytes()
    if not data.startswith(_PNG_SIGNATURE):
        raise ValueError(f"{path} is not a PNG file")
    out = {}
    offset = 8
    while offset + 8 <= len(data):
        (length,) = struct.unpack(">I", data[offset:offset + 4])
        kind = data[offset + 4:offset + 8]
        if kind == b"tEXt":
            body = data[offset + 8:offset + 8 + length]
            key, _, value = body.partition(b"\x00")
            out[key.decode("latin-1")] = value.decode("latin-1")
        offset += 12 + length
    return out


def confusion_figure(report: MetricsReport, task: TaskSpec, path,
                     dpi: int = 100) -> Path:
    """Write a deterministic confusion-matrix heatmap PNG.

    Gold labels run down the rows, predictions across the columns, with
    integer annotations. The matrix and label order are embedded as PNG
    text chunks (keys ``annotations``, ``labels``) for mechanical read-back.
    """
    matrix = np.asarray(report.confusion, dtype=np.int64)
    if matrix.sum() == 0:
        raise EmptyDataset("confusion matrix has no scored examples")
    labels = list(report.labels)

    fig, ax = plt.subplots(figsize=(1.2 + 0.9 * len(labels), 1.0 + 0.9 * len(labels)))
    image = ax.imshow(matrix, cmap="Blues")
    ax.set_xticks(range(len(labels)), labels, rotation=45, ha="right", fontsize=8)
    ax.set_yticks(range(len(labels)), labels, fontsize=8)
    ax.set_xlabel("Predicted")
    ax.set_ylabel("Gold")
    ax.set_title(f"Confusion matrix: {task.name}", fontsize=9)
    threshold = matrix.max() / 2
    for i in range(len(labels)):
        for j in range(len(labels)):
            color = "white" if matrix[i, j] > threshold else "black"
            ax.text(j, i, str(int(matrix[i, j])), ha="center", va="center",
                    color=color, fontsize=8)
    fig.colorbar(image, ax=ax, shrink=0.8)
    fig.tight_layout()

    buffer = io.BytesIO()
    fig.savefig(buffer, format="png", dpi=dpi)
    plt.close(fig)
    png = _png_insert_text(
        buffer.getvalue(),
        {
            "annotations": ";".join(
                ",".join(str(int(v)) for v in row) for row in matrix
            ),
            "labels": ",".join(labels),
            "task": task.task_id,
        },
    )
    path = Path(path)
    try:
        path.write_bytes(png)
    except OSError as exc:
        raise UnwritablePath(path, str(exc)) from exc
    return path


def read_confusion_annotations(path) -> tuple[np.ndarray, list[str]]:
    """Read back the matrix and labels embedded by confusion_figure."""
    text = _png_read_text(path)
    if "annotations" not in text:
        raise ValueError(f"{path} carries no confusion annotations")
    matrix = np.array(
        [[int(v) for v in row.split(",")] for row in text["annotations"].split(";")],
        dtype=np.int64,
    )
    return matrix, text.get("labels", "").split(",")

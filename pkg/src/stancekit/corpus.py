"""Dataset loading, validation and label-distribution audits.

Dataset files are UTF-8 delimited text with a header row and columns
``index``, ``tweet``, ``label`` (label optional for the test split). The
delimiter is auto-detected from the header line (comma or tab). Augmented
corpora carry two extra columns, ``origin`` and ``chain_id``, and load
back through the same reader.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from decimal import ROUND_HALF_UP, Decimal
from pathlib import Path
from typing import Iterable, Sequence

from .errors import (
    DuplicateExampleId,
    EmptyDataset,
    MalformedRow,
    MissingFile,
    UnknownLabel,
    UnlabeledGold,
)
from .tasks import ORIGINS, SPLITS, TaskSpec


@dataclass(frozen=True)
class LabeledExample:
    """One text with its label and provenance.

    ``label`` is None for unlabeled test rows; evaluation refuses to score
    those. ``chain_id`` is set exactly when ``origin`` is ``augmented``.
    """

    example_id: str
    text: str
    label: str | None
    split: str
    origin: str = "original"
    chain_id: str | None = None

    def __post_init__(self):
        if self.split not in SPLITS:
            raise ValueError(f"split must be one of {SPLITS}, got {self.split!r}")
        if self.origin not in ORIGINS:
            raise ValueError(f"origin must be one of {ORIGINS}, got {self.origin!r}")
        if (self.chain_id is not None) != (self.origin == "augmented"):
            raise ValueError("chain_id must be set exactly when origin is augmented")
        if not self.text.strip():
            raise ValueError("text is empty after whitespace trimming")


@dataclass(frozen=True)
class DistributionReport:
    """Per-split label counts and half-up two-decimal percentages."""

    task_id: str
    counts: dict[str, dict[str, int]] = field(default_factory=dict)
    totals: dict[str, int] = field(default_factory=dict)
    percentages: dict[str, dict[str, float]] = field(default_factory=dict)

    def __post_init__(self):
        for split, pcts in self.percentages.items():
            total = sum(pcts.values())
            if abs(total - 100.0) > 0.05:
                raise ValueError(
                    f"{split} percentages sum to {total}, outside 100 +/- 0.05"
                )


def round_half_up(value: Decimal, places: int = 2) -> float:
    return float(value.quantize(Decimal(1).scaleb(-places), rounding=ROUND_HALF_UP))


def _detect_delimiter(header_line: str) -> str:
    return "\t" if "\t" in header_line else ","


def load_dataset(path, task: TaskSpec, split: str) -> list[LabeledExample]:
    """Read a delimited dataset file into validated examples.

    Rows with labels outside the task's label set raise UnknownLabel rather
    than being dropped. Duplicate ids raise, since the id is the join key
    for predictions. A test-split file may omit the label column entirely;
    those examples load with ``label=None``.
    """
    if split not in SPLITS:
        raise ValueError(f"split must be one of {SPLITS}, got {split!r}")
    path = Path(path)
    if not path.is_file():
        raise MissingFile(path)
    with open(path, encoding="utf-8-sig", newline="") as fh:
        header_line = fh.readline()
        if not header_line.strip():
            raise MalformedRow(1, "missing header row")
        delim = _detect_delimiter(header_line)
        header = [c.strip() for c in next(csv.reader([header_line], delimiter=delim))]
        cols = {name: i for i, name in enumerate(header)}
        for required in ("index", "tweet"):
            if required not in cols:
                raise MalformedRow(1, f"missing column {required!r}")
        if "label" not in cols and split != "test":
            raise MalformedRow(1, f"missing column 'label' for split {split!r}")
        has_label = "label" in cols
        has_origin = "origin" in cols

        examples: list[LabeledExample] = []
        seen: set[str] = set()
        reader = csv.reader(fh, delimiter=delim)
        row_no = 1
        while True:
            row_no += 1
            try:
                row = next(reader)
            except StopIteration:
                break
            except csv.Error as exc:
                raise MalformedRow(row_no, str(exc)) from None
            if not row:
                continue
            if len(row) != len(header):
                raise MalformedRow(
                    row_no, f"expected {len(header)} fields, got {len(row)}"
                )
            example_id = row[cols["index"]].strip()
            if not example_id:
                raise MalformedRow(row_no, "empty index")
            if example_id in seen:
                raise DuplicateExampleId(example_id, row_no)
            seen.add(example_id)
            text = row[cols["tweet"]]
            if not text.strip():
                raise MalformedRow(row_no, "empty text")

            label: str | None = None
            if has_label:
                raw = row[cols["label"]].strip()
                if raw:
                    if raw not in task.label_set:
                        raise UnknownLabel(raw, row_no)
                    label = raw
                elif split != "test":
                    raise MalformedRow(row_no, "empty label")

            origin = "original"
            chain_id = None
            if has_origin:
                origin = row[cols["origin"]].strip() or "original"
                if origin not in ORIGINS:
                    raise MalformedRow(row_no, f"unknown origin {origin!r}")
                if "chain_id" in cols:
                    chain_id = row[cols["chain_id"]].strip() or None
                if (chain_id is not None) != (origin == "augmented"):
                    raise MalformedRow(
                        row_no, "chain_id must be set exactly for augmented rows"
                    )
            examples.append(
                LabeledExample(example_id, text, label, split, origin, chain_id)
            )
    return examples


def write_dataset(examples: Sequence[LabeledExample], path, delimiter: str = ",") -> None:
    """Write examples in the loadable delimited format.

    The origin/chain_id columns are emitted only when the set contains
    augmented rows, so plain corpora round-trip byte-identically.
    """
    path = Path(path)
    augmented = any(e.origin == "augmented" for e in examples)
    header = ["index", "tweet", "label"] + (["origin", "chain_id"] if augmented else [])
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, delimiter=delimiter, lineterminator="\n")
        writer.writerow(header)
        for e in examples:
            if "\x00" in e.text:
                raise ValueError(
                    f"example {e.example_id}: NUL characters cannot be written "
                    "to a delimited text file"
                )
            row = [e.example_id, e.text, e.label or ""]
            if augmented:
                row += [e.origin, e.chain_id or ""]
            writer.writerow(row)


def distribution(examples: Iterable[LabeledExample], task: TaskSpec) -> DistributionReport:
    """Exact per-split label counts plus percentages rounded half-up to 2dp."""
    examples = list(examples)
    if not examples:
        raise EmptyDataset("cannot audit an empty example list")
    counts: dict[str, dict[str, int]] = {}
    for e in examples:
        if e.label is None:
            raise UnlabeledGold(f"example {e.example_id} has no label")
        if e.label not in task.label_set:
            raise UnknownLabel(e.label)
        split_counts = counts.setdefault(e.split, {l: 0 for l in task.label_set})
        split_counts[e.label] += 1
    totals = {split: sum(c.values()) for split, c in counts.items()}
    percentages = {
        split: {
            label: round_half_up(Decimal(100 * n) / Decimal(totals[split]))
            for label, n in split_counts.items()
        }
        for split, split_counts in counts.items()
    }
    return DistributionReport(task.task_id, counts, totals, percentages)


def minority_labels(report: DistributionReport, task: TaskSpec) -> list[str]:
    """Every label except the argmax-count label of the train split.

    Labels tied for the maximum count all stay majority, so a perfectly
    balanced split has no minority labels.
    """
    if "train" not in report.counts:
        raise ValueError("report does not cover the train split")
    train_counts = report.counts["train"]
    max_count = max(train_counts.values())
    return [l for l in task.label_set if train_counts.get(l, 0) < max_count]


def format_distribution_table(
    report: DistributionReport, task: TaskSpec, delimiter: str = ","
) -> str:
    """Label rows by split columns, percentages at two decimals."""
    splits = [s for s in SPLITS if s in report.percentages]
    lines = [delimiter.join(["label"] + splits)]
    for label in task.label_set:
        cells = [f"{report.percentages[s][label]:.2f}" for s in splits]
        lines.append(delimiter.join([label] + cells))
    return "\n".join(lines) + "\n"

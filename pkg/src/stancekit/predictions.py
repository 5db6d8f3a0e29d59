"""PredictionSet, the interchange unit between training, ensembling and scoring.

On disk a prediction set is JSON-lines, one ``{"id", "label", "scores"}``
object per row, plus a sidecar ``<name>.meta.json`` record holding the
model key, task id, split and free-form metadata.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .errors import DuplicateExampleId, MalformedRow, MissingFile, UnknownLabel
from .tasks import TaskSpec

SCORE_SUM_TOL = 1e-6


@dataclass(frozen=True)
class PredictionRow:
    example_id: str
    label: str
    scores: dict[str, float] | None = None


@dataclass
class PredictionSet:
    model_key: str
    task_id: str | None
    split: str | None
    rows: list[PredictionRow]
    metadata: dict = field(default_factory=dict)

    def validate(self, task: TaskSpec) -> None:
        seen = set()
        for row in self.rows:
            if row.example_id in seen:
                raise DuplicateExampleId(row.example_id)
            seen.add(row.example_id)
            if row.label not in task.label_set:
                raise UnknownLabel(row.label)
            if row.scores is not None:
                unknown = set(row.scores) - set(task.label_set)
                if unknown:
                    raise UnknownLabel(sorted(unknown)[0])
                values = list(row.scores.values())
                if any(v < 0 for v in values):
                    raise ValueError(
                        f"negative score for example {row.example_id}"
                    )
                if abs(sum(values) - 1.0) > SCORE_SUM_TOL:
                    raise ValueError(
                        f"scores for example {row.example_id} sum to {sum(values)}"
                    )

    def example_ids(self) -> list[str]:
        return [r.example_id for r in self.rows]


def _meta_path(path: Path) -> Path:
    return path.with_suffix(".meta.json")


def write_predictions(pset: PredictionSet, path) -> Path:
    path = Path(path)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for row in pset.rows:
            record = {"id": row.example_id, "label": row.label}
            if row.scores is not None:
                record["scores"] = row.scores
            fh.write(json.dumps(record, sort_keys=True) + "\n")
    meta = {
        "model_key": pset.model_key,
        "task_id": pset.task_id,
        "split": pset.split,
        "metadata": pset.metadata,
    }
    with open(_meta_path(path), "w", encoding="utf-8", newline="\n") as fh:
        fh.write(json.dumps(meta, sort_keys=True, indent=2) + "\n")
    return path


def read_predictions(path) -> PredictionSet:
    """Read rows plus the sidecar; a missing sidecar yields stem defaults."""
    path = Path(path)
    if not path.is_file():
        raise MissingFile(path)
    rows = []
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise MalformedRow(line_no, f"bad JSON: {exc}") from None
            rows.append(
                PredictionRow(
                    str(record["id"]), record["label"], record.get("scores")
                )
            )
    model_key, task_id, split, metadata = path.stem, None, None, {}
    meta_path = _meta_path(path)
    if meta_path.is_file():
        with open(meta_path, encoding="utf-8") as fh:
            meta = json.load(fh)
        model_key = meta.get("model_key", model_key)
        task_id = meta.get("task_id")
        split = meta.get("split")
        metadata = meta.get("metadata", {})
    return PredictionSet(model_key, task_id, split, rows, metadata)

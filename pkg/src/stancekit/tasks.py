"""The three classification subtasks and their label schemas."""

from __future__ import annotations

from dataclasses import dataclass

from .errors import UnknownLabel, UsageError

SPLITS = ("train", "eval", "test")
ORIGINS = ("original", "augmented")


@dataclass(frozen=True)
class TaskSpec:
    """A subtask's identity, ordered label set and majority label."""

    task_id: str
    name: str
    label_set: tuple[str, ...]
    majority_label: str

    def __post_init__(self):
        if not self.label_set:
            raise ValueError("label_set must be non-empty")
        if len(set(self.label_set)) != len(self.label_set):
            raise ValueError("label_set contains duplicates")
        if self.majority_label not in self.label_set:
            raise ValueError(
                f"majority label {self.majority_label!r} not in label set"
            )

    def label_index(self, label: str) -> int:
        try:
            return self.label_set.index(label)
        except ValueError:
            raise UnknownLabel(label) from None


TASK_A = TaskSpec("A", "hate speech detection", ("NON-HATE", "HATE"), "NON-HATE")
TASK_B = TaskSpec(
    "B", "target detection", ("INDIVIDUAL", "ORGANIZATION", "COMMUNITY"), "INDIVIDUAL"
)
TASK_C = TaskSpec("C", "stance detection", ("SUPPORT", "OPPOSE", "NEUTRAL"), "SUPPORT")

TASKS = {t.task_id: t for t in (TASK_A, TASK_B, TASK_C)}


def get_task(task_id: str) -> TaskSpec:
    try:
        return TASKS[task_id.upper()]
    except KeyError:
        raise UsageError(
            f"unknown task {task_id!r}; expected one of {', '.join(TASKS)}"
        ) from None

import csv

import pytest

from stancekit.corpus import LabeledExample
from stancekit.tasks import TASK_A, TASK_B, TASK_C


@pytest.fixture
def task_a():
    return TASK_A


@pytest.fixture
def task_b():
    return TASK_B


@pytest.fixture
def task_c():
    return TASK_C


def write_corpus(path, rows, delimiter=",", header=("index", "tweet", "label")):
    """Write a dataset file from (index, tweet[, label, ...]) tuples."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, delimiter=delimiter, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)
    return path


def make_examples(labels, split="train", prefix="e", text=None):
    """One example per label token, ids prefix0..prefixN."""
    return [
        LabeledExample(f"{prefix}{i}", text or f"post number {i}", label, split)
        for i, label in enumerate(labels)
    ]

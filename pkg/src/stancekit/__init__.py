"""stancekit: hate-speech, target and stance classification pipeline.

Loads and audits imbalanced tweet corpora, expands minority classes via
chained back-translation, fine-tunes per-task classifiers, runs an LLM
prompting baseline, combines prediction sets by majority or weighted
voting, and scores everything with per-class F1 and confusion matrices.
"""

__version__ = "0.1.0"

from .augment import (
    AugmentationChain,
    DEFAULT_CHAINS,
    TranslationClient,
    augment_training_set,
    back_translate,
)
from .corpus import (
    DistributionReport,
    LabeledExample,
    distribution,
    load_dataset,
    minority_labels,
    write_dataset,
)
from .ensemble import EnsembleConfig, ensemble_predictions, majority_vote, weighted_vote
from .evaluate import MetricsReport, confusion_figure, report_table, score
from .predictions import PredictionRow, PredictionSet, read_predictions, write_predictions
from .prompting import LLMClient, ParseFailure, build_prompt, classify_with_llm, parse_label
from .tasks import TASK_A, TASK_B, TASK_C, TASKS, TaskSpec, get_task
from .train import ModelEntry, TrainConfig, default_registry, fine_tune, predict

__all__ = [
    "AugmentationChain",
    "DEFAULT_CHAINS",
    "DistributionReport",
    "EnsembleConfig",
    "LLMClient",
    "LabeledExample",
    "MetricsReport",
    "ModelEntry",
    "ParseFailure",
    "PredictionRow",
    "PredictionSet",
    "TASK_A",
    "TASK_B",
    "TASK_C",
    "TASKS",
    "TaskSpec",
    "TrainConfig",
    "TranslationClient",
    "augment_training_set",
    "back_translate",
    "build_prompt",
    "classify_with_llm",
    "confusion_figure",
    "default_registry",
    "distribution",
    "ensemble_predictions",
    "fine_tune",
    "get_task",
    "load_dataset",
    "majority_vote",
    "minority_labels",
    "parse_label",
    "predict",
    "read_predictions",
    "report_table",
    "score",
    "weighted_vote",
    "write_dataset",
    "write_predictions",
]

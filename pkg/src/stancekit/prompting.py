"""Zero-shot and few-shot LLM classification baseline.

Prompts follow a three-block layout (Role, Definition, Task) with an
optional label-balanced exemplar block, and instruct the model to answer
inside ``<label>`` tags. Responses are parsed tolerantly: both ``</label>``
and the ``<\\label>`` closer spelling are accepted and the inner text is
matched case-insensitively against the task's label set.
"""

from __future__ import annotations

import json
import os
import random
import re
import urllib.request
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Sequence

from .corpus import LabeledExample
from .errors import (
    ClientFailure,
    EmptyDataset,
    InsufficientExemplars,
    LLMError,
)
from .predictions import PredictionRow, PredictionSet
from .tasks import TaskSpec

ROLE_SENTENCE = "You are a helpful AI assistant."

TASK_BLOCK = (
    "Generate the label for this text in the following format: "
    "<label> Your_Predicted_Label <\\label>. Thanks."
)

# One fixed definition sentence per subtask; overridable through the
# prompt.definition.<task> config keys so wording changes need no code change.
DEFAULT_DEFINITIONS = {
    "A": "Hate speech detection decides whether a text contains hateful content.",
    "B": "Target detection identifies whom a hateful text is aimed at.",
    "C": "Stance detection determines the position a text expresses toward climate activism.",
}

_CLOSER_PATTERN = re.compile(r"<label>(.*?)<[/\\]label>", re.IGNORECASE | re.DOTALL)


@dataclass(frozen=True)
class ParseFailure:
    """Returned (not raised) when a response yields no usable label."""

    reason: str


@dataclass(frozen=True)
class PromptTemplate:
    role_block: str
    definition_block: str
    task_block: str
    exemplars: tuple[tuple[str, str], ...] = ()

    def validate(self, task: TaskSpec) -> None:
        if task.name not in self.role_block:
            raise ValueError("role block does not name the task")
        for label in task.label_set:
            n = _count_label_tokens(self.definition_block, label, task.label_set)
            if n != 1:
                raise ValueError(
                    f"definition block names label {label!r} {n} times, expected once"
                )
        if "<label>" not in self.task_block:
            raise ValueError("task block does not specify the <label> wrapping")

    def render(self, input_text: str) -> str:
        parts = [f"Role: {self.role_block}", f"Definition: {self.definition_block}"]
        if self.exemplars:
            lines = ["Examples:"]
            for text, label in self.exemplars:
                lines.append(f"Text: {text}")
                lines.append(f"Label: {label}")
            parts.append("\n".join(lines))
        parts.append(f"Task: {self.task_block}")
        parts.append(f"Text: {input_text}")
        return "\n\n".join(parts)


def _count_label_tokens(text: str, label: str, all_labels: Sequence[str]) -> int:
    # Mask longer labels first so HATE is not counted inside NON-HATE.
    for other in sorted(all_labels, key=len, reverse=True):
        if other == label:
            break
        text = text.replace(other, "\x00")
    return text.count(label)


def _sample_exemplars(
    task: TaskSpec,
    shots: int,
    pool: Sequence[LabeledExample],
    seed: int,
) -> tuple[tuple[str, str], ...]:
    rng = random.Random(seed)
    picked: list[tuple[str, str]] = []
    for label in task.label_set:
        candidates = [e for e in pool if e.label == label]
        if len(candidates) < shots:
            raise InsufficientExemplars(label, len(candidates), shots)
        picked.extend((e.text, e.label) for e in rng.sample(candidates, shots))
    rng.shuffle(picked)
    return tuple(picked)


def make_template(
    task: TaskSpec,
    shots: int = 0,
    exemplar_pool: Sequence[LabeledExample] | None = None,
    seed: int = 0,
    definitions: dict[str, str] | None = None,
) -> PromptTemplate:
    if shots < 0:
        raise ValueError("shots must be non-negative")
    definition_sentence = (definitions or DEFAULT_DEFINITIONS)[task.task_id]
    enumeration = " or ".join(task.label_set)
    template = PromptTemplate(
        role_block=f"{ROLE_SENTENCE} You are given the task of {task.name}.",
        definition_block=(
            f"{definition_sentence} You will be given a text to label either {enumeration}."
        ),
        task_block=TASK_BLOCK,
        exemplars=(
            _sample_exemplars(task, shots, exemplar_pool or (), seed) if shots else ()
        ),
    )
    template.validate(task)
    return template


def build_prompt(
    task: TaskSpec,
    input_text: str,
    shots: int = 0,
    exemplar_pool: Sequence[LabeledExample] | None = None,
    seed: int = 0,
    definitions: dict[str, str] | None = None,
) -> str:
    """Deterministic prompt text for one input."""
    return make_template(task, shots, exemplar_pool, seed, definitions).render(input_text)


def parse_label(response: str, task: TaskSpec) -> str | ParseFailure:
    """Extract the first tagged label from a raw model response.

    Accepts ``</label>`` and ``<\\label>`` closers; the inner text is
    trimmed and matched case-insensitively, falling back to its first
    whitespace token.
    """
    match = _CLOSER_PATTERN.search(response)
    if not match:
        return ParseFailure("no <label>...</label> pair found")
    inner = match.group(1).strip()
    by_folded = {l.casefold(): l for l in task.label_set}
    hit = by_folded.get(inner.casefold())
    if hit is None and inner:
        hit = by_folded.get(inner.split()[0].casefold())
    if hit is None:
        return ParseFailure(f"tag content {inner!r} matches no label")
    return hit


class LLMClient(ABC):
    """Completion backend; raises LLMError on hard failure."""

    @abstractmethod
    def complete(self, prompt: str) -> str: ...


class ConstantLLMClient(LLMClient):
    def __init__(self, response: str):
        self.response = response

    def complete(self, prompt):
        return self.response


class ScriptedLLMClient(LLMClient):
    """Cycles through canned responses; handy for retry and fallback tests."""

    def __init__(self, responses: Sequence[str]):
        if not responses:
            raise ValueError("need at least one scripted response")
        self.responses = list(responses)
        self.calls = 0

    def complete(self, prompt):
        response = self.responses[self.calls % len(self.responses)]
        self.calls += 1
        return response


class HttpLLMClient(LLMClient):
    """Adapter for a generic completion endpoint.

    POSTs ``{"model", "prompt", "temperature"}`` and expects ``{"text": ...}``.
    Endpoint, key and model name come from the environment; temperature
    defaults to 0 for reproducibility.
    """

    ENDPOINT_VAR = "STANCEKIT_LLM_ENDPOINT"
    API_KEY_VAR = "STANCEKIT_LLM_API_KEY"
    MODEL_VAR = "STANCEKIT_LLM_MODEL"

    def __init__(self, endpoint: str, model: str, api_key: str | None = None,
                 temperature: float = 0.0, timeout: float = 60.0):
        self.endpoint = endpoint
        self.model = model
        self.api_key = api_key
        self.temperature = temperature
        self.timeout = timeout

    @classmethod
    def from_env(cls, temperature: float = 0.0) -> "HttpLLMClient":
        endpoint = os.environ.get(cls.ENDPOINT_VAR)
        model = os.environ.get(cls.MODEL_VAR)
        if not endpoint or not model:
            raise LLMError(
                f"set {cls.ENDPOINT_VAR} and {cls.MODEL_VAR} to use the HTTP client"
            )
        return cls(endpoint, model, os.environ.get(cls.API_KEY_VAR), temperature)

    def complete(self, prompt):
        payload = json.dumps(
            {"model": self.model, "prompt": prompt, "temperature": self.temperature}
        )
        request = urllib.request.Request(
            self.endpoint,
            data=payload.encode("utf-8"),
            headers={"Content-Type": "application/json"},
        )
        if self.api_key:
            request.add_header("Authorization", f"Bearer {self.api_key}")
        try:
            with urllib.request.urlopen(request, timeout=self.timeout) as resp:
                body = json.loads(resp.read().decode("utf-8"))
        except Exception as exc:
            raise LLMError(f"completion request failed: {exc}") from exc
        text = body.get("text")
        if not isinstance(text, str):
            raise LLMError("completion response carried no text field")
        return text


def classify_with_llm(
    examples: Sequence[LabeledExample],
    task: TaskSpec,
    client: LLMClient,
    shots: int = 0,
    exemplar_pool: Sequence[LabeledExample] | None = None,
    seed: int = 0,
    model_key: str | None = None,
    log_path=None,
    definitions: dict[str, str] | None = None,
) -> PredictionSet:
    """One prediction per example, with a parse-retry and majority fallback.

    An unparseable response triggers exactly one re-prompt; a second failure
    falls back to the task's majority label and is tallied in the metadata.
    Exemplars are drawn only from pool entries disjoint from the classified
    examples, so gold labels of the inputs never leak into prompts. A hard
    client failure raises ClientFailure carrying the rows finished so far.
    """
    examples = list(examples)
    if not examples:
        raise EmptyDataset("nothing to classify")
    classified_ids = {e.example_id for e in examples}
    pool = [e for e in (exemplar_pool or ()) if e.example_id not in classified_ids]
    template = make_template(task, shots, pool, seed, definitions)
    if model_key is None:
        model_key = "llm-zero-shot" if shots == 0 else f"llm-few-shot-{shots}"
    splits = {e.split for e in examples}
    split = splits.pop() if len(splits) == 1 else None

    log_fh = open(log_path, "w", encoding="utf-8", newline="\n") if log_path else None
    rows: list[PredictionRow] = []
    fallbacks = 0

    def audit(example_id, prompt, response, parsed, fallback_used):
        if log_fh is None:
            return
        record = {
            "example_id": example_id,
            "prompt": prompt,
            "response": response,
            "parsed": parsed,
            "fallback_used": fallback_used,
        }
        log_fh.write(json.dumps(record, sort_keys=True) + "\n")

    try:
        for example in examples:
            prompt = template.render(example.text)
            label = None
            for attempt in range(2):
                try:
                    response = client.complete(prompt)
                except LLMError as exc:
                    partial = PredictionSet(
                        model_key, task.task_id, split, rows,
                        {"fallbacks": fallbacks, "aborted_at": example.example_id},
                    )
                    raise ClientFailure(
                        f"client failed on example {example.example_id}: {exc}",
                        partial=partial,
                    ) from exc
                parsed = parse_label(response, task)
                done = not isinstance(parsed, ParseFailure)
                if done:
                    label = parsed
                fallback_used = attempt == 1 and not done
                audit(example.example_id, prompt, response,
                      label if done else None, fallback_used)
                if done:
                    break
            if label is None:
                label = task.majority_label
                fallbacks += 1
            rows.append(PredictionRow(example.example_id, label))
    finally:
        if log_fh is not None:
            log_fh.close()

    metadata = {
        "client": type(client).__name__,
        "fallbacks": fallbacks,
        "seed": seed,
        "shots": shots,
    }
    return PredictionSet(model_key, task.task_id, split, rows, metadata)

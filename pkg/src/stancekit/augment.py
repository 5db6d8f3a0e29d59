"""Minority-class expansion via chained back-translation.

Each minority-label training example is pushed through every pivot chain:
source language to the first pivot, pivot to pivot, and back to the corpus
language. The translation backend is pluggable; deterministic mock clients
cover tests and offline pipelines, and an HTTP adapter slots in any real
machine-translation service.
"""

from __future__ import annotations

import json
import logging
import time
import urllib.request
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import Callable, Sequence

from . import corpus
from .corpus import LabeledExample
from .errors import TranslationError, TranslationFailure, UsageError
from .tasks import TaskSpec

log = logging.getLogger(__name__)

CORPUS_LANGUAGE = "en"


@dataclass(frozen=True)
class AugmentationChain:
    """An ordered pivot-language sequence ending back in the corpus language."""

    chain_id: str
    pivots: tuple[str, ...]
    terminal: str = CORPUS_LANGUAGE

    def __post_init__(self):
        if not self.pivots:
            raise ValueError("chain needs at least one pivot language")
        if self.terminal in self.pivots:
            raise ValueError("pivots must differ from the terminal language")

    def hops(self) -> list[tuple[str, str]]:
        """(source, target) pairs: terminal -> pivots -> terminal."""
        langs = (self.terminal,) + self.pivots + (self.terminal,)
        return list(zip(langs, langs[1:]))


# The four stock chains, ordered from shortest to longest pivot sequence.
DEFAULT_CHAINS = (
    AugmentationChain("xh-tw", ("xh", "tw")),
    AugmentationChain("lo-ps-yo", ("lo", "ps", "yo")),
    AugmentationChain("yo-so-rw", ("yo", "so", "rw")),
    AugmentationChain("zu-om-sn-ts", ("zu", "om", "sn", "ts")),
)


def parse_chain_spec(chain_id: str, spec: str) -> AugmentationChain:
    """Parse an arrow list like ``en>xh>tw>en`` into a chain."""
    langs = [p.strip() for p in spec.split(">")]
    if len(langs) < 3 or any(not p for p in langs):
        raise UsageError(f"bad chain spec {spec!r}: need source>pivots...>source")
    if langs[0] != langs[-1]:
        raise UsageError(
            f"bad chain spec {spec!r}: must start and end in the same language"
        )
    return AugmentationChain(chain_id, tuple(langs[1:-1]), langs[-1])


def format_chain_spec(chain: AugmentationChain) -> str:
    return ">".join((chain.terminal,) + chain.pivots + (chain.terminal,))


class TranslationClient(ABC):
    """Translation backend. ``budget`` caps requests per second (None = unlimited)."""

    budget: float | None = None

    @abstractmethod
    def translate(self, text: str, source: str, target: str) -> str:
        """Translate text; raises TranslationError on failure."""


class IdentityTranslationClient(TranslationClient):
    """Returns the input unchanged. Minimal mock for hop-count tests."""

    def translate(self, text, source, target):
        return text


class ReversingTranslationClient(TranslationClient):
    """Reverses characters per hop, so even-hop compositions round-trip."""

    def translate(self, text, source, target):
        return text[::-1]


class MarkerTranslationClient(TranslationClient):
    """Appends a hop marker per translation.

    Output differs from the source for every chain, so augmented copies
    survive the near-duplicate filter; the default deterministic mock for
    offline pipelines.
    """

    def translate(self, text, source, target):
        return f"{text} [{source}>{target}]"


class HttpTranslationClient(TranslationClient):
    """Adapter for a generic REST translation service.

    POSTs ``{"q", "source", "target"}`` and expects ``{"text": ...}`` back.
    Configured per deployment; never exercised by the test suite.
    """

    def __init__(self, endpoint: str, api_key: str | None = None,
                 budget: float | None = None, timeout: float = 30.0):
        self.endpoint = endpoint
        self.api_key = api_key
        self.budget = budget
        self.timeout = timeout
        self._last_request = 0.0

    def translate(self, text, source, target):
        if self.budget:
            wait = self._last_request + 1.0 / self.budget - time.monotonic()
            if wait > 0:
                time.sleep(wait)
        payload = json.dumps({"q": text, "source": source, "target": target})
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
            raise TranslationError(f"{source}->{target} request failed: {exc}") from exc
        finally:
            self._last_request = time.monotonic()
        translated = body.get("text", "")
        if not isinstance(translated, str) or not translated:
            raise TranslationError(f"{source}->{target} returned no text")
        return translated


def derived_example_id(example_id: str, chain_id: str) -> str:
    return f"{example_id}~{chain_id}"


def back_translate(
    example: LabeledExample,
    chain: AugmentationChain,
    client: TranslationClient,
    retries: int = 3,
    backoff: float = 0.5,
    sleep: Callable[[float], None] = time.sleep,
) -> LabeledExample:
    """Run one example through a full pivot chain.

    Hops are strictly sequential; a hop that still fails after ``retries``
    attempts (exponential backoff) raises TranslationFailure and the example
    is never emitted partially translated. The label is preserved and the
    new id derives deterministically from (input id, chain id).
    """
    if example.origin != "original":
        raise ValueError("only original examples may be back-translated")
    if example.split != "train":
        raise ValueError("only train-split examples may be back-translated")
    text = example.text
    for step, (source, target) in enumerate(chain.hops()):
        last_error: Exception | None = None
        for attempt in range(retries):
            if attempt and backoff:
                sleep(backoff * 2 ** (attempt - 1))
            try:
                result = client.translate(text, source, target)
            except TranslationError as exc:
                last_error = exc
                continue
            if result:
                text = result
                break
            last_error = TranslationError(f"{source}->{target} returned empty text")
        else:
            raise TranslationFailure(step, source, target) from last_error
    return LabeledExample(
        example_id=derived_example_id(example.example_id, chain.chain_id),
        text=text,
        label=example.label,
        split=example.split,
        origin="augmented",
        chain_id=chain.chain_id,
    )


@dataclass
class ChainOutcome:
    attempted: int = 0
    succeeded: int = 0
    failed: int = 0
    duplicate_filtered: int = 0


@dataclass
class AugmentationResult:
    examples: list[LabeledExample]
    summary: dict[str, ChainOutcome] = field(default_factory=dict)

    def added(self) -> int:
        return sum(o.succeeded for o in self.summary.values())


def augment_training_set(
    examples: Sequence[LabeledExample],
    task: TaskSpec,
    chains: Sequence[AugmentationChain],
    client: TranslationClient,
    max_copies_per_example: int | None = None,
    retries: int = 3,
    backoff: float = 0.5,
) -> AugmentationResult:
    """Originals plus back-translated copies of every minority-label example.

    Majority-label examples gain no copies. Failed chains are skipped and
    tallied, never fatal. Augmented text identical to its source after
    casefolding is filtered out so degenerate identity translations cannot
    inflate counts.
    """
    examples = list(examples)
    if any(e.split != "train" for e in examples):
        raise ValueError("augmentation expects train-split examples only")
    summary = {c.chain_id: ChainOutcome() for c in chains}
    if not examples or not chains:
        return AugmentationResult(examples, summary)
    minority = set(
        corpus.minority_labels(corpus.distribution(examples, task), task)
    )
    augmented: list[LabeledExample] = []
    for example in examples:
        if example.label not in minority or example.origin != "original":
            continue
        copies = 0
        for chain in chains:
            if max_copies_per_example is not None and copies >= max_copies_per_example:
                break
            outcome = summary[chain.chain_id]
            outcome.attempted += 1
            try:
                copy = back_translate(
                    example, chain, client, retries=retries, backoff=backoff
                )
            except TranslationFailure as exc:
                outcome.failed += 1
                log.warning(
                    "skipping %s on chain %s: %s", example.example_id, chain.chain_id, exc
                )
                continue
            if copy.text.casefold() == example.text.casefold():
                outcome.duplicate_filtered += 1
                log.info(
                    "dropping near-duplicate %s from chain %s",
                    copy.example_id,
                    chain.chain_id,
                )
                continue
            outcome.succeeded += 1
            copies += 1
            augmented.append(copy)
    return AugmentationResult(examples + augmented, summary)

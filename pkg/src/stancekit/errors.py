"""Exception types shared across the pipeline.

The CLI maps these onto exit codes: UsageError -> 2, DataError -> 3,
BackendError -> 4.
"""

from __future__ import annotations


class StancekitError(Exception):
    """Base class for all pipeline errors."""


class UsageError(StancekitError):
    """Bad flags, unknown task ids, malformed config lines."""


class DataError(StancekitError):
    """Invalid or inconsistent data supplied to an operation."""


class BackendError(StancekitError):
    """A pluggable backend (translation, LLM, encoder) failed."""


# --- data errors -------------------------------------------------------


class MissingFile(DataError):
    def __init__(self, path):
        super().__init__(f"file not found: {path}")
        self.path = str(path)


class MalformedRow(DataError):
    def __init__(self, row: int, reason: str):
        super().__init__(f"malformed row {row}: {reason}")
        self.row = row
        self.reason = reason


class UnknownLabel(DataError):
    def __init__(self, label: str, row: int | None = None):
        where = f" at row {row}" if row is not None else ""
        super().__init__(f"unknown label {label!r}{where}")
        self.label = label
        self.row = row


class DuplicateExampleId(DataError):
    def __init__(self, example_id: str, row: int | None = None):
        where = f" at row {row}" if row is not None else ""
        super().__init__(f"duplicate example id {example_id!r}{where}")
        self.example_id = example_id
        self.row = row


class EmptyDataset(DataError):
    pass


class UnlabeledGold(DataError):
    pass


class ExampleUniverseMismatch(DataError):
    """Example id universes differ; carries the symmetric difference."""

    def __init__(self, missing, extra):
        self.missing = sorted(missing)
        self.extra = sorted(extra)
        super().__init__(
            "example id universes differ: "
            f"missing={self.missing} extra={self.extra}"
        )


class MemberCountMismatch(DataError):
    pass


class NegativeWeight(DataError):
    pass


class LabelCardinalityMismatch(DataError):
    pass


class TaskMismatch(DataError):
    pass


class InsufficientExemplars(DataError):
    def __init__(self, label: str, have: int, need: int):
        super().__init__(
            f"exemplar pool has {have} examples for label {label!r}, need {need}"
        )
        self.label = label
        self.have = have
        self.need = need


class UnwritablePath(DataError):
    def __init__(self, path, cause: str):
        super().__init__(f"cannot write {path}: {cause}")
        self.path = str(path)


# --- backend errors ----------------------------------------------------


class TranslationError(BackendError):
    """One translate() call failed; may be retried."""


class TranslationFailure(BackendError):
    """A back-translation chain failed at a pivot step after retries."""

    def __init__(self, step: int, source: str, target: str):
        super().__init__(f"translation failed at hop {step} ({source}->{target})")
        self.step = step
        self.source = source
        self.target = target


class LLMError(BackendError):
    """One complete() call failed hard (network, auth, quota)."""


class ClientFailure(BackendError):
    """Classification aborted; carries the partial prediction set."""

    def __init__(self, message: str, partial=None):
        super().__init__(message)
        self.partial = partial


class UnsupportedEncoder(BackendError):
    def __init__(self, encoder_ref: str):
        super().__init__(
            f"no backend for encoder ref {encoder_ref!r}; "
            "only 'tiny:' desk-scale encoders are bundled"
        )
        self.encoder_ref = encoder_ref


class OutOfMemory(BackendError):
    def __init__(self, batch_size: int):
        super().__init__(f"out of memory with train batch size {batch_size}")
        self.batch_size = batch_size

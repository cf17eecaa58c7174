"""Exception hierarchy for entsense.

The CLI maps these onto exit codes: input errors exit 1, external-service
errors exit 2 and invariant violations exit 3.
"""

from pathlib import Path
from typing import Iterable, Optional


class EntsenseError(Exception):
    """Base class for all entsense errors."""

    exit_code = 1


class InputError(EntsenseError, ValueError):
    """Bad user input, malformed files or unknown identifiers."""

    exit_code = 1


class ConfigError(InputError):
    """Invalid configuration value."""


class GraphError(InputError):
    """Unknown or mistyped node in a knowledge graph."""


class SnapshotFormatError(InputError):
    """A line-oriented data file could not be parsed."""

    def __init__(self, path, line_no: int, message: str):
        self.path = str(path)
        self.line_no = line_no
        super().__init__(f"{self.path}:{line_no}: {message}")


class InactiveUserError(InputError):
    """The user has too little surviving activity to model."""


class IdentityNotBridgedError(InputError):
    """A social username has no matching knowledge-base account."""


class MissingLabelError(InputError):
    """Ranked entities without a gold label."""

    def __init__(self, entity_ids: Iterable[str]):
        self.entity_ids = sorted(entity_ids)
        shown = ', '.join(self.entity_ids[:10])
        more = '' if len(self.entity_ids) <= 10 else f' (+{len(self.entity_ids) - 10} more)'
        super().__init__(f"No gold label for entities: {shown}{more}")


class ServiceError(EntsenseError, RuntimeError):
    """An external service failed; the operation can be retried."""

    exit_code = 2


class ProviderError(ServiceError):
    """A candidate provider could not answer."""


class ReplayMissError(ServiceError):
    """Replay mode needed a response that was never recorded."""


class MalformedResponseError(ServiceError):
    """The service answered with something that is not the expected JSON."""


class IngestInterruptedError(ServiceError):
    """Ingestion stopped part-way; progress was checkpointed."""

    def __init__(self, message: str, checkpoint: Optional[Path] = None):
        self.checkpoint = checkpoint
        if checkpoint is not None:
            message = f"{message} (progress saved to {checkpoint}; rerun to resume)"
        super().__init__(message)


class InvariantViolation(EntsenseError, AssertionError):
    """An internal consistency check failed."""

    exit_code = 3

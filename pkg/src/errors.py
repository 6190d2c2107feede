"""
Exception hierarchy shared by every package.

Each error carries a human-readable message and an optional details dict that the
CLI echoes next to the message.
"""

from typing import Any


class ViewfixError(Exception):
    """Base exception for all project errors."""

    def __init__(self, message: str, details: dict[str, Any] | None = None):
        self.message = message
        self.details = details or {}
        super().__init__(self.message)


class DomainError(ViewfixError, ValueError):
    """Argument outside the domain of an operation."""

    pass


class ShapeMismatchError(ViewfixError, ValueError):
    """Tensors that must share a shape do not."""

    pass


class ResolutionError(ViewfixError, ValueError):
    """Image size is not a multiple of the network's downsampling factor."""

    def __init__(self, message: str, required_multiple: int):
        self.required_multiple = required_multiple
        super().__init__(message, {"required_multiple": required_multiple})


class SceneOptimizationError(ViewfixError):
    """Scene fitting produced a non-finite loss."""

    pass


class TrainingHaltedError(ViewfixError):
    """Fixer training stopped on a non-finite validation loss."""

    pass


class CurationError(ViewfixError):
    """A curation strategy's pre-conditions are not met."""

    pass


class DatasetSplitError(CurationError):
    """A scene was assigned to more than one split."""

    pass


class PipelineError(ViewfixError):
    """Progressive 3D update failed."""

    pass


class ConfigError(ViewfixError):
    """Run configuration could not be parsed or validated."""

    pass


class MissingArtifactError(ViewfixError):
    """An upstream stage output is missing."""

    def __init__(self, path: Any):
        self.path = str(path)
        super().__init__(f"Missing upstream artifact: {self.path}", {"path": self.path})


class OutputValidationError(ViewfixError):
    """A stage finished but its declared outputs are missing or malformed."""

    pass


class RunLockedError(ViewfixError):
    """Another process holds the run directory lock."""

    pass


class IncompatibleRunsError(ViewfixError):
    """Runs passed to the report differ in more than their seed."""

    def __init__(self, mismatched: list[str]):
        self.mismatched = mismatched
        super().__init__(f"Runs have incompatible configs; mismatched fields: {', '.join(mismatched)}", {"fields": mismatched})

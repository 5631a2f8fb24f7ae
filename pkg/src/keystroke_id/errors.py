"""Exception types raised across the pipeline.

Every error the CLI can surface maps to one class here, so exit codes
stay stable (see cli.EXIT_CODES).
"""

from __future__ import annotations


class KeystrokeIdError(Exception):
    """Base class for all package errors."""


class MalformedLine(KeystrokeIdError):
    """A non-blank log line that does not parse as ``key action timestamp``."""

    def __init__(self, line_number: int, reason: str):
        super().__init__(f"line {line_number}: {reason}")
        self.line_number = line_number
        self.reason = reason


class NonMonotonicTimestamps(KeystrokeIdError):
    """Event stream goes backwards in time beyond the allowed tolerance."""

    def __init__(self, line_index: int, previous_ms: int, current_ms: int):
        super().__init__(
            f"event {line_index}: timestamp {current_ms} precedes {previous_ms}"
        )
        self.line_index = line_index
        self.previous_ms = previous_ms
        self.current_ms = current_ms


class SubsequenceTooShort(KeystrokeIdError):
    """A KDI needs at least two keystrokes."""


class EmptyTrainingSet(KeystrokeIdError):
    """Standardizer fitting requires at least one tensor."""


class BadMagic(KeystrokeIdError):
    """Tensor file does not start with the KDT1 magic."""


class TruncatedFile(KeystrokeIdError):
    """Tensor file ends before the promised sample count."""


class DimensionMismatch(KeystrokeIdError):
    """Tensor dimensions differ from the fixed 5x42x42 layout."""


class ManifestMismatch(KeystrokeIdError):
    """Tensor sidecar manifest is inconsistent with the tensor file."""


class EmptyNode(KeystrokeIdError):
    """Gini impurity of a node with zero samples is undefined."""


class FeatureLengthMismatch(KeystrokeIdError):
    """Prediction input does not match the trained feature length."""


class ModelVersionMismatch(KeystrokeIdError):
    """Serialized model was written by an incompatible format version."""


class ClassTooSmall(KeystrokeIdError):
    """A class has fewer samples than requested non-empty partitions."""

    def __init__(self, class_id: int, count: int, needed: int):
        super().__init__(
            f"class {class_id} has {count} sample(s); "
            f"{needed} needed for the requested split"
        )
        self.class_id = class_id


class LabelOutOfRange(KeystrokeIdError):
    """A label falls outside [0, num_classes)."""


class EmptyMatrix(KeystrokeIdError):
    """Accuracy of an all-zero confusion matrix is undefined."""


class ConfigError(KeystrokeIdError):
    """Invalid or inconsistent configuration values."""

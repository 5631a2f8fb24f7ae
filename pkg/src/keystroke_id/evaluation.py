"""Splits, metrics, difficulty partitioning, and the report document.

Accuracy is trace/total of the confusion matrix (rows = actual class,
columns = predicted); per-class accuracy divides each diagonal element by
its row sum. Users partition into easy (>= hi), difficult (< lo) and
moderate (between), with hi=0.90 and lo=0.75 by default.
"""

from __future__ import annotations

import csv
import importlib.resources
import json
from dataclasses import dataclass
from pathlib import Path

import jsonschema
import numpy as np

from .errors import ClassTooSmall, ConfigError, EmptyMatrix, LabelOutOfRange

REPORT_SCHEMA_NAME = "kdi-report/1"
EASY_THRESHOLD = 0.90
DIFFICULT_THRESHOLD = 0.75
DECILE_EDGES = tuple(round(0.1 * i, 1) for i in range(11))


@dataclass(frozen=True)
class SplitSpec:
    """Stratified split fractions; they must sum to 1."""

    train: float = 0.8
    validation: float = 0.0
    test: float = 0.2
    stratified: bool = True
    seed: int = 0

    def __post_init__(self) -> None:
        fractions = (self.train, self.validation, self.test)
        if any(f < 0 for f in fractions):
            raise ConfigError(f"split fractions must be >= 0, got {fractions}")
        if abs(sum(fractions) - 1.0) > 1e-9:
            raise ConfigError(f"split fractions must sum to 1, got {sum(fractions)}")


def _largest_remainder(total: int, fractions: tuple[float, ...]) -> list[int]:
    """Integer allocation of ``total`` by fractions, largest remainder first."""
    quotas = [f * total for f in fractions]
    counts = [int(q) for q in quotas]
    remainders = [q - c for q, c in zip(quotas, counts)]
    # ties: earlier partition (train before validation before test) wins
    order = sorted(range(len(fractions)), key=lambda i: (-remainders[i], i))
    for i in order[: total - sum(counts)]:
        counts[i] += 1
    return counts


def stratified_split(
    labels: np.ndarray, spec: SplitSpec
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Split sample indices into (train, validation, test).

    With stratification, each class is shuffled and allocated by
    largest-remainder rounding of the fractions, so achieved per-class
    proportions deviate from the request by less than one sample.
    Raises ClassTooSmall when a class cannot cover every non-empty
    partition.
    """
    labels = np.asarray(labels)
    rng = np.random.default_rng(spec.seed)
    fractions = (spec.train, spec.validation, spec.test)
    needed = sum(1 for f in fractions if f > 0)

    groups: list[np.ndarray]
    if spec.stratified:
        groups = [np.flatnonzero(labels == c) for c in np.unique(labels)]
    else:
        groups = [np.arange(len(labels))]

    parts: tuple[list[int], list[int], list[int]] = ([], [], [])
    for group in groups:
        if len(group) < needed:
            class_id = int(labels[group[0]]) if len(group) else -1
            raise ClassTooSmall(class_id, len(group), needed)
        shuffled = group.copy()
        rng.shuffle(shuffled)
        counts = _largest_remainder(len(group), fractions)
        offset = 0
        for part, count in zip(parts, counts):
            part.extend(shuffled[offset : offset + count].tolist())
            offset += count
    return tuple(np.asarray(sorted(p), dtype=np.int64) for p in parts)


def confusion_matrix(actual, predicted, num_classes: int) -> np.ndarray:
    """K x K count matrix; counts[a][p] tallies actual a predicted as p."""
    actual = np.asarray(actual, dtype=np.int64)
    predicted = np.asarray(predicted, dtype=np.int64)
    if actual.shape != predicted.shape:
        raise ValueError(
            f"label vectors differ in length: {actual.shape} vs {predicted.shape}"
        )
    for name, values in (("actual", actual), ("predicted", predicted)):
        if values.size and (values.min() < 0 or values.max() >= num_classes):
            raise LabelOutOfRange(
                f"{name} labels outside [0, {num_classes})"
            )
    counts = np.zeros((num_classes, num_classes), dtype=np.int64)
    np.add.at(counts, (actual, predicted), 1)
    return counts


def accuracy(cm: np.ndarray) -> float:
    """Sum of diagonal over sum of all cells."""
    total = int(cm.sum())
    if total == 0:
        raise EmptyMatrix("accuracy undefined for an empty confusion matrix")
    return float(np.trace(cm) / total)


def per_class_accuracy(cm: np.ndarray) -> list[float | None]:
    """Diagonal over row sum per class; None where the row is empty."""
    out: list[float | None] = []
    for i in range(cm.shape[0]):
        row_total = int(cm[i].sum())
        out.append(float(cm[i, i] / row_total) if row_total else None)
    return out


@dataclass(frozen=True)
class PartitionResult:
    easy: frozenset[str]
    moderate: frozenset[str]
    difficult: frozenset[str]
    hi: float = EASY_THRESHOLD
    lo: float = DIFFICULT_THRESHOLD


def partition_users(
    per_user_acc: dict[str, float],
    hi: float = EASY_THRESHOLD,
    lo: float = DIFFICULT_THRESHOLD,
) -> PartitionResult:
    """Partition users by accuracy: >= hi easy, < lo difficult, else moderate.

    Both boundaries follow the stated wording: exactly hi is easy, exactly
    lo is moderate.
    """
    if lo > hi:
        raise ConfigError(f"lo ({lo}) must not exceed hi ({hi})")
    easy = frozenset(u for u, a in per_user_acc.items() if a >= hi)
    difficult = frozenset(u for u, a in per_user_acc.items() if a < lo)
    moderate = frozenset(per_user_acc) - easy - difficult
    return PartitionResult(easy, moderate, difficult, hi, lo)


def range_histogram(values, bin_edges) -> np.ndarray:
    """Counts per half-open bin [e_k, e_{k+1}); the last bin is closed."""
    edges = np.asarray(bin_edges, dtype=np.float64)
    if len(edges) < 2 or np.any(np.diff(edges) <= 0):
        raise ConfigError("bin edges must be strictly increasing")
    counts = np.zeros(len(edges) - 1, dtype=np.int64)
    for value in values:
        if value < edges[0] or value > edges[-1]:
            continue
        if value == edges[-1]:
            counts[-1] += 1
        else:
            counts[np.searchsorted(edges, value, side="right") - 1] += 1
    return counts


def build_report(
    model_name: str,
    actual,
    predicted,
    label_map: dict[str, int],
    config_echo: dict,
    hi: float = EASY_THRESHOLD,
    lo: float = DIFFICULT_THRESHOLD,
    histogram_edges=DECILE_EDGES,
) -> dict:
    """Assemble the evaluation report document (schema kdi-report/1).

    ``label_map`` maps user id -> class id and must cover all classes.
    Users whose class never occurs in ``actual`` get a null accuracy and
    stay out of the partition and histogram.
    """
    num_classes = len(label_map)
    cm = confusion_matrix(actual, predicted, num_classes)
    per_class = per_class_accuracy(cm)
    users_by_class = {c: u for u, c in label_map.items()}
    if len(users_by_class) != num_classes:
        raise ConfigError("label_map must be a bijection onto [0, K)")

    per_user = {users_by_class[c]: per_class[c] for c in range(num_classes)}
    defined = {u: a for u, a in per_user.items() if a is not None}
    partition = partition_users(defined, hi, lo)
    histogram = range_histogram(list(defined.values()), histogram_edges)
    ranked = sorted(defined.items(), key=lambda item: (-item[1], item[0]))

    return {
        "schema": REPORT_SCHEMA_NAME,
        "model": model_name,
        "num_classes": num_classes,
        "labels": dict(sorted(label_map.items())),
        "accuracy": accuracy(cm),
        "per_class_accuracy": per_class,
        "per_user_accuracy": dict(sorted(per_user.items())),
        "per_user_accuracy_sorted": [[user, acc] for user, acc in ranked],
        "confusion_matrix": cm.tolist(),
        "partition": {
            "thresholds": {"hi": hi, "lo": lo},
            "easy": sorted(partition.easy),
            "moderate": sorted(partition.moderate),
            "difficult": sorted(partition.difficult),
        },
        "range_histogram": {
            "edges": list(histogram_edges),
            "counts": histogram.tolist(),
        },
        "config": config_echo,
    }


def _report_schema() -> dict:
    resource = importlib.resources.files("keystroke_id").joinpath("report_schema.json")
    return json.loads(resource.read_text())


def validate_report(report: dict) -> None:
    """Raise jsonschema.ValidationError if the document is malformed."""
    jsonschema.validate(report, _report_schema())


def save_report(report: dict, path: Path) -> None:
    validate_report(report)
    Path(path).write_text(json.dumps(report, sort_keys=True) + "\n")


def load_report(path: Path) -> dict:
    report = json.loads(Path(path).read_text())
    validate_report(report)
    return report


def write_per_user_csv(report: dict, path: Path) -> None:
    """Per-user accuracies, descending, for external plotting."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["user_id", "accuracy"])
        writer.writerows(report["per_user_accuracy_sorted"])

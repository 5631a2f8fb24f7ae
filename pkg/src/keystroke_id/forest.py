"""From-scratch CART decision trees and random forests.

Determinism is a hard requirement here: every tie is broken by an explicit
total order (lowest feature index, then lowest threshold, then lowest class
id), per-tree RNG streams are derived as ``config.seed + tree_index``, and
candidate features are drawn per node in preorder, so training is
bit-reproducible regardless of worker count.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .errors import (
    ConfigError,
    EmptyNode,
    FeatureLengthMismatch,
    ModelVersionMismatch,
)

MODEL_FORMAT = "kdi-forest/1"

# Cap on cumulative-count workspace entries per best_split chunk; keeps
# memory flat when nodes are large and classes many.
_CELL_BUDGET = 8_000_000


@dataclass(frozen=True)
class ForestConfig:
    """Forest hyperparameters; defaults follow the tuned configuration."""

    n_estimators: int = 1000
    max_features: str = "sqrt"  # candidate features per node: "sqrt" or "all"
    min_samples_split: int = 5
    min_samples_leaf: int = 2
    bootstrap: bool = True
    seed: int = 0

    def __post_init__(self) -> None:
        if self.n_estimators < 1:
            raise ConfigError("n_estimators must be >= 1")
        if self.min_samples_split < 2:
            raise ConfigError("min_samples_split must be >= 2")
        if self.min_samples_leaf < 1:
            raise ConfigError("min_samples_leaf must be >= 1")
        if self.max_features not in ("sqrt", "all"):
            raise ConfigError(f"unsupported max_features rule {self.max_features!r}")


@dataclass
class Leaf:
    class_counts: np.ndarray  # (num_classes,) int64

    @property
    def prediction(self) -> int:
        # argmax takes the first maximum: ties go to the smallest class id
        return int(np.argmax(self.class_counts))


@dataclass
class Internal:
    feature_index: int
    threshold: float
    left: "TreeNode"
    right: "TreeNode"


TreeNode = Leaf | Internal


@dataclass
class ForestModel:
    kind: str  # "random_forest" or "decision_tree"
    config: ForestConfig
    num_classes: int
    feature_count: int
    trees: list[TreeNode]


def gini(class_counts: np.ndarray) -> float:
    """Gini impurity 1 - sum((count/total)^2); raises EmptyNode on total 0."""
    counts = np.asarray(class_counts, dtype=np.float64)
    total = counts.sum()
    if total <= 0:
        raise EmptyNode("gini undefined for an empty node")
    fractions = counts / total
    return float(1.0 - np.dot(fractions, fractions))


def best_split(
    X: np.ndarray,
    y: np.ndarray,
    candidate_features: np.ndarray,
    min_samples_leaf: int,
    num_classes: int,
) -> tuple[int, float, float] | None:
    """Best (feature, threshold, impurity_decrease) over the candidates.

    Thresholds are midpoints between distinct consecutive sorted values.
    Returns None when no split yields a strictly positive decrease with
    both children at or above min_samples_leaf.
    """
    n = X.shape[0]
    if n < 2:
        return None
    parent_counts = np.bincount(y, minlength=num_classes)
    parent_gini = gini(parent_counts)

    features = np.sort(np.asarray(candidate_features))
    chunk_size = max(1, min(len(features), _CELL_BUDGET // max(1, n * num_classes)))
    left_sizes = np.arange(1, n, dtype=np.float64).reshape(-1, 1)
    right_sizes = n - left_sizes

    best: tuple[float, int, float] | None = None  # (decrease, feature, threshold)
    for start in range(0, len(features), chunk_size):
        chunk = features[start : start + chunk_size]
        values = X[:, chunk]
        order = np.argsort(values, axis=0, kind="stable")
        sorted_values = np.take_along_axis(values, order, axis=0)
        sorted_labels = y[order]  # (n, c)

        onehot = sorted_labels[:, :, None] == np.arange(num_classes)
        left_counts = np.cumsum(onehot, axis=0, dtype=np.float64)[:-1]  # (n-1, c, K)
        right_counts = parent_counts[None, None, :] - left_counts
        left_sq = np.einsum("ick,ick->ic", left_counts, left_counts)
        right_sq = np.einsum("ick,ick->ic", right_counts, right_counts)
        # n*weighted_gini = n - (lsq/nl + rsq/nr); the symmetric form keeps
        # mirrored splits bit-equal so the tie order below is honored
        weighted = (n - (left_sq / left_sizes + right_sq / right_sizes)) / n
        decrease = parent_gini - weighted  # (n-1, c)

        valid = (
            (sorted_values[1:] > sorted_values[:-1])
            & (left_sizes >= min_samples_leaf)
            & (right_sizes >= min_samples_leaf)
        )
        decrease[~valid] = -np.inf
        # Transposed flat argmax scans feature-major then threshold-minor,
        # which is exactly the tie order we promise.
        flat = int(np.argmax(decrease.T))
        col, pos = divmod(flat, n - 1)
        value = float(decrease[pos, col])
        if value > 0.0 and (best is None or value > best[0]):
            threshold = float((sorted_values[pos, col] + sorted_values[pos + 1, col]) / 2.0)
            best = (value, int(chunk[col]), threshold)

    if best is None:
        return None
    decrease_value, feature, threshold = best
    return feature, threshold, decrease_value


def grow_tree(
    X: np.ndarray,
    y: np.ndarray,
    config: ForestConfig,
    rng: np.random.Generator,
    num_classes: int,
) -> TreeNode:
    """Grow one unbounded-depth CART tree over (X, y).

    Nodes are processed in preorder so the per-node candidate draws come
    off ``rng`` in a reproducible order. A node becomes a leaf when pure,
    smaller than min_samples_split, or splitless.
    """
    feature_count = X.shape[1]
    if config.max_features == "sqrt":
        n_candidates = max(1, math.isqrt(feature_count))
    else:
        n_candidates = feature_count
    all_features = np.arange(feature_count)

    def attach(parent: Internal | None, side: str, node: TreeNode) -> None:
        if parent is None:
            return
        if side == "left":
            parent.left = node
        else:
            parent.right = node

    root: TreeNode | None = None
    stack: list[tuple[np.ndarray, Internal | None, str]] = [
        (np.arange(len(y)), None, "")
    ]
    while stack:
        idx, parent, side = stack.pop()
        counts = np.bincount(y[idx], minlength=num_classes)
        pure = np.count_nonzero(counts) <= 1
        split = None
        if not pure and len(idx) >= config.min_samples_split:
            if n_candidates < feature_count:
                candidates = rng.choice(feature_count, size=n_candidates, replace=False)
            else:
                candidates = all_features
            split = best_split(
                X[idx], y[idx], candidates, config.min_samples_leaf, num_classes
            )
        if split is None:
            node: TreeNode = Leaf(counts)
            attach(parent, side, node)
        else:
            feature, threshold, _ = split
            node = Internal(feature, threshold, None, None)  # children filled below
            attach(parent, side, node)
            mask = X[idx, feature] <= threshold
            # preorder: left subtree fully grown before the right one
            stack.append((idx[~mask], node, "right"))
            stack.append((idx[mask], node, "left"))
        if root is None:
            root = node
    assert root is not None
    return root


def _fit_one_tree(
    X: np.ndarray, y: np.ndarray, config: ForestConfig, tree_index: int, num_classes: int
) -> TreeNode:
    rng = np.random.default_rng(config.seed + tree_index)
    if config.bootstrap:
        idx = rng.integers(0, len(y), size=len(y))
        return grow_tree(X[idx], y[idx], config, rng, num_classes)
    return grow_tree(X, y, config, rng, num_classes)


def fit_forest(
    X: np.ndarray,
    y: np.ndarray,
    config: ForestConfig,
    num_classes: int | None = None,
    n_jobs: int = 1,
) -> ForestModel:
    """Fit a bootstrap-aggregated forest; bit-identical for any n_jobs."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    if num_classes is None:
        num_classes = int(y.max()) + 1
    if n_jobs > 1:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            trees = list(
                pool.map(
                    lambda t: _fit_one_tree(X, y, config, t, num_classes),
                    range(config.n_estimators),
                )
            )
    else:
        trees = [
            _fit_one_tree(X, y, config, t, num_classes)
            for t in range(config.n_estimators)
        ]
    return ForestModel("random_forest", config, num_classes, X.shape[1], trees)


def fit_decision_tree(
    X: np.ndarray, y: np.ndarray, config: ForestConfig, num_classes: int | None = None
) -> ForestModel:
    """Single deterministic CART tree: all features, no bootstrap."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    if num_classes is None:
        num_classes = int(y.max()) + 1
    tree_config = replace(config, n_estimators=1, max_features="all", bootstrap=False)
    tree = _fit_one_tree(X, y, tree_config, 0, num_classes)
    return ForestModel("decision_tree", tree_config, num_classes, X.shape[1], [tree])


def _tree_predict(root: TreeNode, X: np.ndarray) -> np.ndarray:
    out = np.empty(len(X), dtype=np.int64)
    stack: list[tuple[TreeNode, np.ndarray]] = [(root, np.arange(len(X)))]
    while stack:
        node, idx = stack.pop()
        if isinstance(node, Leaf):
            out[idx] = node.prediction
            continue
        mask = X[idx, node.feature_index] <= node.threshold
        stack.append((node.left, idx[mask]))
        stack.append((node.right, idx[~mask]))
    return out


def predict(model: ForestModel, X: np.ndarray) -> np.ndarray:
    """Majority vote over trees; all ties resolve to the smallest class id."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    if X.shape[1] != model.feature_count:
        raise FeatureLengthMismatch(
            f"model expects {model.feature_count} features, got {X.shape[1]}"
        )
    votes = np.zeros((len(X), model.num_classes), dtype=np.int64)
    for tree in model.trees:
        votes[np.arange(len(X)), _tree_predict(tree, X)] += 1
    return votes.argmax(axis=1)


def _flatten_tree(root: TreeNode) -> dict:
    """Preorder node arrays; feature -1 marks a leaf, counts only on leaves."""
    features: list[int] = []
    thresholds: list[float] = []
    lefts: list[int] = []
    rights: list[int] = []
    counts: list[list[int]] = []

    stack: list[tuple[TreeNode, int, int]] = [(root, -1, 0)]  # (node, parent, slot)
    while stack:
        node, parent, slot = stack.pop()
        index = len(features)
        if parent >= 0:
            (lefts if slot == 0 else rights)[parent] = index
        if isinstance(node, Leaf):
            features.append(-1)
            thresholds.append(0.0)
            lefts.append(-1)
            rights.append(-1)
            counts.append([int(c) for c in node.class_counts])
        else:
            features.append(node.feature_index)
            thresholds.append(node.threshold)
            lefts.append(0)
            rights.append(0)
            counts.append([])
            stack.append((node.right, index, 1))
            stack.append((node.left, index, 0))
    return {
        "feature": features,
        "threshold": thresholds,
        "left": lefts,
        "right": rights,
        "counts": counts,
    }


def _unflatten_tree(data: dict) -> TreeNode:
    nodes: list[TreeNode] = []
    for feature, threshold, counts in zip(
        data["feature"], data["threshold"], data["counts"]
    ):
        if feature < 0:
            nodes.append(Leaf(np.asarray(counts, dtype=np.int64)))
        else:
            nodes.append(Internal(feature, threshold, None, None))
    for index, node in enumerate(nodes):
        if isinstance(node, Internal):
            node.left = nodes[data["left"][index]]
            node.right = nodes[data["right"][index]]
    return nodes[0]


def save_model(model: ForestModel, path: Path) -> None:
    document = {
        "format": MODEL_FORMAT,
        "kind": model.kind,
        "config": {
            "n_estimators": model.config.n_estimators,
            "max_features": model.config.max_features,
            "min_samples_split": model.config.min_samples_split,
            "min_samples_leaf": model.config.min_samples_leaf,
            "bootstrap": model.config.bootstrap,
            "seed": model.config.seed,
        },
        "num_classes": model.num_classes,
        "feature_count": model.feature_count,
        "trees": [_flatten_tree(tree) for tree in model.trees],
    }
    Path(path).write_text(json.dumps(document, sort_keys=True) + "\n")


def load_model(path: Path) -> ForestModel:
    document = json.loads(Path(path).read_text())
    version = document.get("format")
    if version != MODEL_FORMAT:
        raise ModelVersionMismatch(f"{path}: format {version!r}, expected {MODEL_FORMAT!r}")
    config = ForestConfig(**document["config"])
    return ForestModel(
        document["kind"],
        config,
        document["num_classes"],
        document["feature_count"],
        [_unflatten_tree(tree) for tree in document["trees"]],
    )

"""Flattened-feature datasets: featurization, storage, user filtering.

A dataset is the matrix form the classic models consume: one 8820-wide row
per subsequence plus integer class labels. Class ids are assigned by
sorting user ids, so artifacts are stable across runs.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .ingest import UserSession
from .kdi import build_kdi, flatten
from .sequencing import Subsequence, WindowConfig, window_all


@dataclass
class Dataset:
    X: np.ndarray  # (n, 8820) float64
    y: np.ndarray  # (n,) int64
    users: list[str]  # users[class_id] -> user_id
    window_length: int

    @property
    def num_classes(self) -> int:
        return len(self.users)

    def label_map(self) -> dict[str, int]:
        return {user: index for index, user in enumerate(self.users)}


def featurize_subsequences(
    subsequences: list[Subsequence], window_length: int
) -> Dataset:
    users = sorted({sub.user_id for sub in subsequences})
    class_of = {user: index for index, user in enumerate(users)}
    X = np.stack([flatten(build_kdi(sub)) for sub in subsequences])
    y = np.asarray([class_of[sub.user_id] for sub in subsequences], dtype=np.int64)
    return Dataset(X, y, users, window_length)


def featurize_sessions(sessions: list[UserSession], cfg: WindowConfig) -> Dataset:
    """Window every session, build each window's KDI, flatten to rows."""
    subsequences = window_all(sessions, cfg)
    if not subsequences:
        raise ValueError(
            f"no session yields a full window of length {cfg.length}"
        )
    return featurize_subsequences(subsequences, cfg.length)


def save_dataset(dataset: Dataset, path: Path) -> None:
    np.savez(
        path,
        X=dataset.X,
        y=dataset.y,
        users=np.asarray(dataset.users),
        window_length=np.int64(dataset.window_length),
    )


def load_dataset(path: Path) -> Dataset:
    with np.load(path, allow_pickle=False) as archive:
        return Dataset(
            X=archive["X"],
            y=archive["y"],
            users=[str(u) for u in archive["users"]],
            window_length=int(archive["window_length"]),
        )


def filter_users(dataset: Dataset, keep: list[str]) -> Dataset:
    """Restrict to the given users, relabelling classes contiguously."""
    keep_sorted = sorted(set(keep))
    missing = [u for u in keep_sorted if u not in dataset.users]
    if missing:
        raise ValueError(f"users not in dataset: {missing}")
    old_class = dataset.label_map()
    keep_classes = {old_class[u] for u in keep_sorted}
    mask = np.isin(dataset.y, sorted(keep_classes))
    remap = {old_class[u]: new for new, u in enumerate(keep_sorted)}
    y_new = np.asarray([remap[int(c)] for c in dataset.y[mask]], dtype=np.int64)
    return Dataset(dataset.X[mask], y_new, keep_sorted, dataset.window_length)

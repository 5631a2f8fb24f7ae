"""Keystroke Dynamics Image construction and related feature operations.

A KDI is a 5x42x42 tensor over the key vocabulary: channels 0-3 hold the
four digraph flight times (UD, DD, DU, UU) of each observed key transition,
channel 4 holds per-key hold durations on its diagonal. Repeated pairs and
repeated keys are averaged. Values stay in raw signed milliseconds; UD/UU
go negative under rollover and are deliberately not clamped.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, EmptyTrainingSet, SubsequenceTooShort
from .ingest import Keystroke
from .keys import VOCAB_SIZE
from .sequencing import Subsequence

NUM_CHANNELS = 5
CHANNEL_UD, CHANNEL_DD, CHANNEL_DU, CHANNEL_UU, CHANNEL_DURATION = range(5)
KDI_SHAPE = (NUM_CHANNELS, VOCAB_SIZE, VOCAB_SIZE)
FLAT_LENGTH = NUM_CHANNELS * VOCAB_SIZE * VOCAB_SIZE  # 8820


@dataclass(frozen=True)
class DigraphFeatures:
    """Flight times between two consecutive keystrokes, in ms."""

    ud_ms: int
    dd_ms: int
    du_ms: int
    uu_ms: int


def digraph_features(k1: Keystroke, k2: Keystroke) -> DigraphFeatures:
    """Compute the four flight times for k1 followed by k2.

    UD (release->press) and UU may be negative when the second key goes
    down before the first is released.
    """
    return DigraphFeatures(
        ud_ms=k2.down_ms - k1.up_ms,
        dd_ms=k2.down_ms - k1.down_ms,
        du_ms=k2.up_ms - k1.down_ms,
        uu_ms=k2.up_ms - k1.up_ms,
    )


def build_kdi(sub: Subsequence) -> np.ndarray:
    """Assemble the 5x42x42 KDI for one subsequence.

    Each consecutive pair contributes its four flight times to cell
    (key1, key2) of channels 0-3; cells average over repeats of the same
    ordered pair. Channel 4's diagonal averages hold duration per key over
    all its occurrences in the window. Unobserved cells stay zero.
    """
    keystrokes = sub.keystrokes
    if len(keystrokes) < 2:
        raise SubsequenceTooShort(
            f"need >= 2 keystrokes to form a digraph, got {len(keystrokes)}"
        )

    sums = np.zeros(KDI_SHAPE, dtype=np.float64)
    pair_counts = np.zeros((VOCAB_SIZE, VOCAB_SIZE), dtype=np.int64)
    duration_sums = np.zeros(VOCAB_SIZE, dtype=np.float64)
    key_counts = np.zeros(VOCAB_SIZE, dtype=np.int64)

    for k1, k2 in zip(keystrokes, keystrokes[1:]):
        feats = digraph_features(k1, k2)
        i, j = k1.key, k2.key
        sums[CHANNEL_UD, i, j] += feats.ud_ms
        sums[CHANNEL_DD, i, j] += feats.dd_ms
        sums[CHANNEL_DU, i, j] += feats.du_ms
        sums[CHANNEL_UU, i, j] += feats.uu_ms
        pair_counts[i, j] += 1
    for ks in keystrokes:
        duration_sums[ks.key] += ks.duration_ms
        key_counts[ks.key] += 1

    kdi = np.zeros(KDI_SHAPE, dtype=np.float64)
    observed = pair_counts > 0
    for channel in range(4):
        kdi[channel][observed] = sums[channel][observed] / pair_counts[observed]
    seen = key_counts > 0
    diag = np.zeros(VOCAB_SIZE, dtype=np.float64)
    diag[seen] = duration_sums[seen] / key_counts[seen]
    np.fill_diagonal(kdi[CHANNEL_DURATION], diag)
    return kdi


def flatten(kdi: np.ndarray) -> np.ndarray:
    """Channel-major, then row-major flattening to an 8820-vector."""
    if kdi.shape != KDI_SHAPE:
        raise ValueError(f"expected shape {KDI_SHAPE}, got {kdi.shape}")
    return kdi.reshape(FLAT_LENGTH).copy()


def unflatten(flat: np.ndarray) -> np.ndarray:
    """Inverse of flatten."""
    if flat.shape != (FLAT_LENGTH,):
        raise ValueError(f"expected shape ({FLAT_LENGTH},), got {flat.shape}")
    return flat.reshape(KDI_SHAPE).copy()


@dataclass(frozen=True)
class CutoutConfig:
    """Training-time square cutout; p=0 or count=0 disables it."""

    square_size: int = 8
    count: int = 1
    probability: float = 0.5

    def __post_init__(self) -> None:
        if not 1 <= self.square_size <= VOCAB_SIZE:
            raise ConfigError(f"square_size must be in [1, 42], got {self.square_size}")
        if self.count < 0:
            raise ConfigError(f"count must be >= 0, got {self.count}")
        if not 0.0 <= self.probability <= 1.0:
            raise ConfigError(f"probability must be in [0, 1], got {self.probability}")


def apply_cutout(kdi: np.ndarray, cfg: CutoutConfig, rng_seed: int) -> np.ndarray:
    """Zero random squares across all five channels, seeded.

    With probability cfg.probability, cfg.count squares of side
    cfg.square_size are placed at uniform top-left corners; squares may
    overlap. Cells outside the squares are untouched.
    """
    rng = np.random.default_rng(rng_seed)
    out = kdi.copy()
    if cfg.count == 0 or rng.random() >= cfg.probability:
        return out
    span = VOCAB_SIZE - cfg.square_size + 1
    for _ in range(cfg.count):
        row = int(rng.integers(0, span))
        col = int(rng.integers(0, span))
        out[:, row : row + cfg.square_size, col : col + cfg.square_size] = 0.0
    return out


@dataclass(frozen=True)
class ChannelStats:
    """Per-channel mean/stddev fitted on training tensors."""

    mean: tuple[float, ...]
    stddev: tuple[float, ...]

    STDDEV_FLOOR = 1e-8


def fit_standardizer(train: list[np.ndarray]) -> ChannelStats:
    """Per-channel z-score statistics over all cells of all train tensors."""
    if not train:
        raise EmptyTrainingSet("cannot fit channel statistics on zero tensors")
    stacked = np.stack(train)  # (n, 5, 42, 42)
    mean = stacked.mean(axis=(0, 2, 3))
    stddev = np.maximum(stacked.std(axis=(0, 2, 3)), ChannelStats.STDDEV_FLOOR)
    return ChannelStats(tuple(float(m) for m in mean), tuple(float(s) for s in stddev))


def apply_standardizer(kdi: np.ndarray, stats: ChannelStats) -> np.ndarray:
    mean = np.asarray(stats.mean).reshape(NUM_CHANNELS, 1, 1)
    stddev = np.asarray(stats.stddev).reshape(NUM_CHANNELS, 1, 1)
    return (kdi - mean) / stddev

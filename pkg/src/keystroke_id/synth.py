"""Seeded synthetic keystroke corpora with controllable user separability.

Each user gets a timing profile (per-key hold means, per-key-pair flight
means) offset from a shared base proportionally to ``separation_factor``:
factor 0 collapses every user onto the same profile, so downstream
classifiers should sit at chance. Not a model of human typing; it exists
so the pipeline can be exercised and benchmarked without the real
(request-gated) dataset.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .ingest import IngestStats, Keystroke, UserSession, format_log, keystrokes_to_events
from .keys import VOCAB_SIZE

# Shared distribution bounds (ms); per-user offsets scale on top of these.
_HOLD_MEAN_RANGE = (75.0, 105.0)
_HOLD_STD_RANGE = (6.0, 10.0)
_FLIGHT_MEAN_RANGE = (60.0, 180.0)
_FLIGHT_STD_RANGE = (15.0, 25.0)
_JITTER_STD_RANGE = (2.0, 6.0)
# ms of profile-mean offset per unit of separation_factor
_HOLD_DELTA_SCALE = 3.0
_FLIGHT_DELTA_SCALE = 6.0

_SESSION_START_MS = 1_000


@dataclass(frozen=True)
class UserProfile:
    """Per-user timing distributions (means offset from the shared base)."""

    hold_mean: np.ndarray  # (vocab,) ms
    hold_std: np.ndarray  # (vocab,) ms, shared across users
    flight_mean: np.ndarray  # (vocab, vocab) ms, UD flight for pair (i, j)
    flight_std: float
    jitter_std: float  # extra per-keystroke tempo noise


@dataclass(frozen=True)
class GenConfig:
    num_users: int = 10
    sessions_per_user: int = 3
    keystrokes_per_session: int = 500
    vocabulary: tuple[int, ...] = tuple(range(10))
    separation_factor: float = 5.0
    seed: int = 0

    def __post_init__(self) -> None:
        if self.num_users < 1:
            raise ConfigError("num_users must be >= 1")
        if self.sessions_per_user < 1:
            raise ConfigError("sessions_per_user must be >= 1")
        if self.keystrokes_per_session < 2:
            raise ConfigError("keystrokes_per_session must be >= 2")
        if not self.vocabulary:
            raise ConfigError("vocabulary must not be empty")
        if any(not 0 <= k < VOCAB_SIZE for k in self.vocabulary):
            raise ConfigError("vocabulary keys must lie in [0, 42)")
        if len(set(self.vocabulary)) != len(self.vocabulary):
            raise ConfigError("vocabulary keys must be distinct")
        if self.separation_factor < 0:
            raise ConfigError("separation_factor must be >= 0")


def _base_profile(cfg: GenConfig) -> UserProfile:
    """Shared base distributions, drawn once per corpus."""
    rng = np.random.default_rng([cfg.seed, 0])
    size = len(cfg.vocabulary)
    return UserProfile(
        hold_mean=rng.uniform(*_HOLD_MEAN_RANGE, size=size),
        hold_std=rng.uniform(*_HOLD_STD_RANGE, size=size),
        flight_mean=rng.uniform(*_FLIGHT_MEAN_RANGE, size=(size, size)),
        flight_std=float(rng.uniform(*_FLIGHT_STD_RANGE)),
        jitter_std=float(rng.uniform(*_JITTER_STD_RANGE)),
    )


def _user_profile(
    base: UserProfile, cfg: GenConfig, rng: np.random.Generator
) -> UserProfile:
    size = len(cfg.vocabulary)
    factor = cfg.separation_factor
    return UserProfile(
        hold_mean=base.hold_mean + factor * rng.normal(0.0, _HOLD_DELTA_SCALE, size),
        hold_std=base.hold_std,
        flight_mean=base.flight_mean
        + factor * rng.normal(0.0, _FLIGHT_DELTA_SCALE, (size, size)),
        flight_std=base.flight_std,
        jitter_std=base.jitter_std,
    )


def _generate_session(
    cfg: GenConfig, profile: UserProfile, rng: np.random.Generator
) -> list[Keystroke]:
    vocab = cfg.vocabulary
    choices = rng.integers(0, len(vocab), size=cfg.keystrokes_per_session)

    keystrokes: list[Keystroke] = []
    last_up_per_key: dict[int, int] = {}
    prev_down = 0
    prev_up = _SESSION_START_MS
    prev_choice = -1
    for index, choice in enumerate(choices):
        duration = max(
            1, int(round(rng.normal(profile.hold_mean[choice], profile.hold_std[choice])))
        )
        if index == 0:
            down = _SESSION_START_MS
        else:
            flight = rng.normal(profile.flight_mean[prev_choice, choice], profile.flight_std)
            flight += rng.normal(0.0, profile.jitter_std)
            down = prev_up + int(round(flight))  # negative flight = rollover
        key = vocab[choice]
        # presses advance strictly; a key cannot be re-pressed while held
        floor = prev_down + 1
        if key in last_up_per_key:
            floor = max(floor, last_up_per_key[key] + 1)
        down = max(down, floor)
        up = down + duration
        keystrokes.append(Keystroke(key, down, up))
        last_up_per_key[key] = up
        prev_down, prev_up, prev_choice = down, up, choice
    return keystrokes


def generate_corpus(cfg: GenConfig) -> list[UserSession]:
    """Deterministically generate the full corpus for a config.

    User streams are seeded independently ([seed, 1, user_index]), so any
    per-user slice is reproducible on its own.
    """
    base = _base_profile(cfg)
    sessions: list[UserSession] = []
    for user_index in range(cfg.num_users):
        rng = np.random.default_rng([cfg.seed, 1, user_index])
        profile = _user_profile(base, cfg, rng)
        user_id = f"u{user_index:03d}"
        for session_index in range(cfg.sessions_per_user):
            keystrokes = _generate_session(cfg, profile, rng)
            stats = IngestStats(
                lines_read=2 * len(keystrokes), events_parsed=2 * len(keystrokes)
            )
            sessions.append(UserSession(user_id, f"s{session_index}", keystrokes, stats))
    return sessions


def write_corpus_logs(sessions: list[UserSession], root: Path) -> None:
    """Emit the corpus as three-column logs under <user_id>/<session_id>.txt."""
    for session in sessions:
        directory = root / session.user_id
        directory.mkdir(parents=True, exist_ok=True)
        events = keystrokes_to_events(session.keystrokes)
        (directory / f"{session.session_id}.txt").write_text(format_log(events))

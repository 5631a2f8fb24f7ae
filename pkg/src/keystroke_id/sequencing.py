"""Fixed-length windowing of keystroke streams into independent samples."""

from __future__ import annotations

from dataclasses import dataclass

from .errors import ConfigError
from .ingest import Keystroke, UserSession

SUPPORTED_LENGTHS = (50, 75, 100)


@dataclass(frozen=True)
class WindowConfig:
    """Subsequence length; 50/75/100 are the studied presets."""

    length: int = 100

    def __post_init__(self) -> None:
        if self.length < 2:
            raise ConfigError(f"window length must be >= 2, got {self.length}")


@dataclass(frozen=True)
class Subsequence:
    user_id: str
    keystrokes: tuple[Keystroke, ...]


def window(session: UserSession, cfg: WindowConfig) -> list[Subsequence]:
    """Cut a session into consecutive non-overlapping windows of cfg.length.

    The trailing remainder is discarded; windows never span sessions, so a
    session shorter than the window length yields nothing.
    """
    length = cfg.length
    count = len(session.keystrokes) // length
    return [
        Subsequence(
            session.user_id,
            tuple(session.keystrokes[i * length : (i + 1) * length]),
        )
        for i in range(count)
    ]


def window_all(sessions: list[UserSession], cfg: WindowConfig) -> list[Subsequence]:
    """Window each session independently and pool the samples."""
    samples: list[Subsequence] = []
    for session in sessions:
        samples.extend(window(session, cfg))
    return samples

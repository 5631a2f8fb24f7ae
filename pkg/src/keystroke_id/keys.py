"""The fixed 42-key vocabulary and key-name normalization.

Index layout (total and fixed): letters A-Z map to 0-25, digits 0-9 to
26-35, then space=36, back=37, left-shift=38, right-shift=39, tab=40,
capital=41. Everything else is out of vocabulary.
"""

from __future__ import annotations

import string

VOCAB_SIZE = 42

SPACE = 36
BACK = 37
LEFT_SHIFT = 38
RIGHT_SHIFT = 39
TAB = 40
CAPITAL = 41

# Canonical name per index; serialization uses these and normalize_key
# accepts them back (round-trip safe).
CANONICAL_NAMES: tuple[str, ...] = (
    tuple(string.ascii_lowercase)
    + tuple(string.digits)
    + ("space", "back", "left-shift", "right-shift", "tab", "capital")
)

# Accepted spellings beyond the canonical ones, lowercased. The Buffalo
# logs use .NET Keys enum names (Back, LShiftKey, D0..D9, ...); this table
# is configuration, not ground truth, and callers may pass their own.
DEFAULT_ALIASES: dict[str, int] = {
    "backspace": BACK,
    "lshiftkey": LEFT_SHIFT,
    "lshift": LEFT_SHIFT,
    "rshiftkey": RIGHT_SHIFT,
    "rshift": RIGHT_SHIFT,
    "capslock": CAPITAL,
    **{f"d{d}": 26 + d for d in range(10)},
}

_CANONICAL_INDEX = {name: i for i, name in enumerate(CANONICAL_NAMES)}


def normalize_key(name: str, aliases: dict[str, int] | None = None) -> int | None:
    """Map a raw key token to its vocabulary index, or None if unknown.

    Matching is case-insensitive. ``aliases`` replaces the default alias
    table when given; canonical names always resolve.
    """
    token = name.strip().lower()
    if not token:
        return None
    index = _CANONICAL_INDEX.get(token)
    if index is not None:
        return index
    table = DEFAULT_ALIASES if aliases is None else aliases
    return table.get(token)


def key_name(index: int) -> str:
    """Canonical name for a vocabulary index."""
    return CANONICAL_NAMES[index]

"""Parsing and pairing of raw three-column key-event logs.

Input format: one event per line, ``<key> <KeyDown|KeyUp> <timestamp_ms>``,
whitespace separated, blank lines skipped. Down/up events are paired into
keystrokes per key with FIFO matching, which keeps rollover (overlapping
keystrokes) intact.
"""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import IO, Iterable

from .errors import MalformedLine, NonMonotonicTimestamps
from .keys import key_name, normalize_key


class Action(Enum):
    DOWN = "down"
    UP = "up"


_ACTION_TOKENS = {"keydown": Action.DOWN, "keyup": Action.UP}


@dataclass(frozen=True)
class RawEvent:
    key_name: str
    action: Action
    timestamp_ms: int


@dataclass(frozen=True)
class Keystroke:
    """One paired press/release. Duration is ``up_ms - down_ms`` (>= 0)."""

    key: int
    down_ms: int
    up_ms: int

    @property
    def duration_ms(self) -> int:
        return self.up_ms - self.down_ms


@dataclass
class IngestStats:
    lines_read: int = 0
    events_parsed: int = 0
    unknown_key_events_dropped: int = 0
    orphan_downs_dropped: int = 0
    orphan_ups_dropped: int = 0


@dataclass
class UserSession:
    user_id: str
    session_id: str
    keystrokes: list[Keystroke]
    stats: IngestStats = field(default_factory=IngestStats)


def parse_log(stream: Iterable[str] | IO[str]) -> list[RawEvent]:
    """Parse a three-column event log into RawEvents, in file order.

    Raises MalformedLine for any non-blank line with the wrong column
    count, an unknown action token, or a non-integer / negative timestamp.
    """
    events: list[RawEvent] = []
    for line_number, line in enumerate(stream, start=1):
        columns = line.split()
        if not columns:
            continue
        if len(columns) != 3:
            raise MalformedLine(line_number, f"expected 3 columns, got {len(columns)}")
        key, action_token, ts_token = columns
        action = _ACTION_TOKENS.get(action_token.lower())
        if action is None:
            raise MalformedLine(line_number, f"unknown action {action_token!r}")
        try:
            timestamp = int(ts_token)
        except ValueError:
            raise MalformedLine(line_number, f"non-integer timestamp {ts_token!r}") from None
        if timestamp < 0:
            raise MalformedLine(line_number, f"negative timestamp {ts_token!r}")
        events.append(RawEvent(key, action, timestamp))
    return events


def pair_events(
    events: list[RawEvent],
    tolerance_ms: int = 0,
    aliases: dict[str, int] | None = None,
) -> tuple[list[Keystroke], IngestStats]:
    """Pair down/up events into keystrokes.

    Out-of-vocabulary events are dropped (and counted) before pairing, so
    digraph adjacency downstream is defined over the filtered stream. Each
    up event consumes the earliest pending down of the same key; unmatched
    events are dropped and counted. Output is sorted by down time.

    Raises NonMonotonicTimestamps when a timestamp precedes its predecessor
    by more than ``tolerance_ms`` (checked on the raw stream, in order).
    """
    stats = IngestStats(lines_read=len(events), events_parsed=len(events))

    previous_ms: int | None = None
    for index, event in enumerate(events):
        if previous_ms is not None and event.timestamp_ms < previous_ms - tolerance_ms:
            raise NonMonotonicTimestamps(index, previous_ms, event.timestamp_ms)
        previous_ms = event.timestamp_ms

    pending: dict[int, deque[int]] = {}
    keystrokes: list[Keystroke] = []
    for event in events:
        key = normalize_key(event.key_name, aliases)
        if key is None:
            stats.unknown_key_events_dropped += 1
            continue
        if event.action is Action.DOWN:
            pending.setdefault(key, deque()).append(event.timestamp_ms)
        else:
            queue = pending.get(key)
            # With tolerance > 0 an up can arrive "before" its down; such a
            # pair would break the duration >= 0 invariant, so treat the up
            # as orphaned and leave the down pending.
            if not queue or event.timestamp_ms < queue[0]:
                stats.orphan_ups_dropped += 1
            else:
                keystrokes.append(Keystroke(key, queue.popleft(), event.timestamp_ms))

    stats.orphan_downs_dropped = sum(len(queue) for queue in pending.values())
    keystrokes.sort(key=lambda ks: ks.down_ms)
    return keystrokes, stats


def keystrokes_to_events(keystrokes: Iterable[Keystroke]) -> list[RawEvent]:
    """Expand keystrokes back into a time-ordered raw event stream.

    Downs sort before ups at equal timestamps so zero-duration keystrokes
    re-pair to themselves.
    """
    events = []
    for ks in keystrokes:
        events.append(RawEvent(key_name(ks.key), Action.DOWN, ks.down_ms))
        events.append(RawEvent(key_name(ks.key), Action.UP, ks.up_ms))
    events.sort(key=lambda e: (e.timestamp_ms, e.action is Action.UP))
    return events


def format_log(events: Iterable[RawEvent]) -> str:
    """Render events in the same three-column format parse_log accepts."""
    tokens = {Action.DOWN: "KeyDown", Action.UP: "KeyUp"}
    return "".join(
        f"{e.key_name} {tokens[e.action]} {e.timestamp_ms}\n" for e in events
    )


def load_session(
    path: Path,
    user_id: str,
    session_id: str,
    tolerance_ms: int = 0,
    aliases: dict[str, int] | None = None,
) -> UserSession:
    """Parse and pair one log file into a UserSession."""
    text = path.read_text()
    lines = text.splitlines()
    events = parse_log(lines)
    keystrokes, stats = pair_events(events, tolerance_ms=tolerance_ms, aliases=aliases)
    stats.lines_read = len(lines)
    return UserSession(user_id, session_id, keystrokes, stats)


def load_log_dir(
    root: Path,
    manifest: dict[str, dict[str, str]] | None = None,
    tolerance_ms: int = 0,
    aliases: dict[str, int] | None = None,
) -> list[UserSession]:
    """Load every ``<user_id>/<session_id>.txt`` under ``root``.

    ``manifest`` (relative posix path -> {"user_id", "session_id"}) overrides
    the naming convention for individual files. Sessions come back sorted by
    (user_id, session_id) so downstream runs are order-stable.
    """
    sessions = []
    for path in sorted(root.rglob("*.txt")):
        relative = path.relative_to(root).as_posix()
        override = (manifest or {}).get(relative)
        if override is not None:
            user_id = override["user_id"]
            session_id = override["session_id"]
        else:
            user_id = path.parent.relative_to(root).as_posix()
            session_id = path.stem
        try:
            sessions.append(
                load_session(path, user_id, session_id, tolerance_ms, aliases)
            )
        except (MalformedLine, NonMonotonicTimestamps) as exc:
            exc.source_path = str(path)  # diagnostics name the offending file
            raise
    sessions.sort(key=lambda s: (s.user_id, s.session_id))
    return sessions


SESSION_STORE_FORMAT = "kdi-sessions/1"


def save_session_store(sessions: Iterable[UserSession], path: Path) -> None:
    """Write sessions as a normalized JSON store."""
    document = {
        "format": SESSION_STORE_FORMAT,
        "sessions": [
            {
                "user_id": s.user_id,
                "session_id": s.session_id,
                "keystrokes": [[ks.key, ks.down_ms, ks.up_ms] for ks in s.keystrokes],
                "stats": vars(s.stats),
            }
            for s in sorted(sessions, key=lambda s: (s.user_id, s.session_id))
        ],
    }
    path.write_text(json.dumps(document, sort_keys=True) + "\n")


def load_session_store(path: Path) -> list[UserSession]:
    document = json.loads(path.read_text())
    if document.get("format") != SESSION_STORE_FORMAT:
        raise ValueError(f"unsupported session store format: {document.get('format')!r}")
    return [
        UserSession(
            entry["user_id"],
            entry["session_id"],
            [Keystroke(k, d, u) for k, d, u in entry["keystrokes"]],
            IngestStats(**entry["stats"]),
        )
        for entry in document["sessions"]
    ]

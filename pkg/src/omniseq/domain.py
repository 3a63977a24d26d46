"""Core vocabulary shared by every other module: users, items, channels,
behavior events, and per-user hybrid sequences.

A hybrid sequence interleaves single online item interactions with in-store
transactions. Each in-store transaction collapses to one special-token
position that carries the purchased item set as meta information; the token
id at such positions is the :data:`SPECIAL_TOKEN` sentinel, which the model
layer maps onto its reserved vocabulary row.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

from .errors import DataError

# Sentinel token id marking a collapsed in-store set inside a sequence.
# Item ids are non-negative, so -1 can never collide with the catalog.
SPECIAL_TOKEN = -1


class EmptySequenceError(DataError):
    """No events left to build a sequence from."""


class Channel(enum.Enum):
    ONLINE = "online"
    IN_STORE = "in-store"


@dataclass(frozen=True)
class BehaviorEvent:
    """One element of a user's behavior history.

    ``items`` holds exactly one id for online events and the deduplicated,
    ascending member ids of the transaction for in-store events.
    """

    user: int
    timestamp: int
    channel: Channel
    items: tuple[int, ...]

    def __post_init__(self) -> None:
        if len(self.items) == 0:
            raise DataError("event payload must contain at least one item")
        if any(i < 0 for i in self.items):
            raise DataError(f"negative item id in payload: {self.items}")
        if self.channel is Channel.ONLINE and len(self.items) != 1:
            raise DataError("online events carry exactly one item")
        if len(set(self.items)) != len(self.items):
            raise DataError("in-store payload contains duplicate items")

    @classmethod
    def online(cls, user: int, item: int, timestamp: int) -> "BehaviorEvent":
        return cls(user, timestamp, Channel.ONLINE, (item,))

    @classmethod
    def in_store(cls, user: int, items: Iterable[int], timestamp: int) -> "BehaviorEvent":
        return cls(user, timestamp, Channel.IN_STORE, tuple(sorted(set(items))))

    @property
    def item(self) -> int:
        if self.channel is not Channel.ONLINE:
            raise DataError("single-item access on an in-store event")
        return self.items[0]


@dataclass(frozen=True)
class SequenceToken:
    """One position of a hybrid sequence.

    ``meta`` is the originating item set (ascending) when ``token_id`` is the
    special token and ``None`` otherwise.
    """

    token_id: int
    timestamp: int
    meta: Optional[tuple[int, ...]] = None

    @property
    def is_special(self) -> bool:
        return self.meta is not None


@dataclass(frozen=True)
class HybridSequence:
    user: int
    tokens: tuple[SequenceToken, ...]
    max_seq_len: int

    def __len__(self) -> int:
        return len(self.tokens)

    def online_positions(self) -> list[int]:
        return [p for p, tok in enumerate(self.tokens) if not tok.is_special]

    def interacted_items(self) -> set[int]:
        """Every catalog item the user touched, in either channel."""
        out: set[int] = set()
        for tok in self.tokens:
            if tok.is_special:
                out.update(tok.meta)
            else:
                out.add(tok.token_id)
        return out


def _sort_key(ev: BehaviorEvent) -> tuple:
    # Ties on timestamp break Online before InStore, then by ascending payload.
    return (ev.timestamp, 0 if ev.channel is Channel.ONLINE else 1, ev.items)


def build_hybrid_sequence(events: Sequence[BehaviorEvent], max_seq_len: int) -> HybridSequence:
    """Collapse a user's events into a time-ordered hybrid sequence.

    Events are deduplicated on (timestamp, channel, payload), sorted ascending
    by timestamp (stable tie-break: online first, then item ids), in-store
    events become special-token positions carrying their set as meta, and the
    result keeps only the most recent ``max_seq_len`` tokens.
    """
    if max_seq_len < 1:
        raise ValueError("max_seq_len must be >= 1")
    if not events:
        raise EmptySequenceError("cannot build a sequence from zero events")
    users = {ev.user for ev in events}
    if len(users) != 1:
        raise DataError(f"events span multiple users: {sorted(users)}")

    unique = {(ev.timestamp, ev.channel, ev.items): ev for ev in events}
    ordered = sorted(unique.values(), key=_sort_key)

    tokens = []
    for ev in ordered:
        if ev.channel is Channel.ONLINE:
            tokens.append(SequenceToken(ev.item, ev.timestamp))
        else:
            tokens.append(SequenceToken(SPECIAL_TOKEN, ev.timestamp, ev.items))
    return HybridSequence(events[0].user, tuple(tokens[-max_seq_len:]), max_seq_len)


def flatten_sequence(seq: HybridSequence) -> HybridSequence:
    """Expand every special-token position into its member items in place.

    Members appear in ascending item-id order and share the original
    timestamp; the result is re-truncated to the sequence's max length and
    contains no special tokens. This realizes the encoder-free variant that
    trains directly on flattened hybrid sequences.
    """
    tokens: list[SequenceToken] = []
    for tok in seq.tokens:
        if tok.is_special:
            tokens.extend(SequenceToken(i, tok.timestamp) for i in tok.meta)
        else:
            tokens.append(tok)
    return HybridSequence(seq.user, tuple(tokens[-seq.max_seq_len:]), seq.max_seq_len)

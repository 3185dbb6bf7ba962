"""Bounded pending queue: FIFO of not-yet-placed entries with O(1) membership.

Inserts park displaced or deferred elements here; lookups and deletes
must find them in constant time, so the queue pairs its FIFO order with
a keyed index.  Both live in one ordered hash map: CPython dicts are
open-addressing tables, and an insertion-ordered dict gives push_back,
push_front, pop_front, remove-by-key, and membership in O(1) without a
separate ring buffer to keep in sync.

Length is capped by ``capacity_threshold``.  A push that would exceed
it raises :class:`QueueOverflow` before touching any state; the caller
(the dictionary) reacts with a full rehash.
"""

from __future__ import annotations

from collections import OrderedDict
from typing import Iterator


class QueueOverflow(Exception):
    """A push would exceed capacity_threshold; queue left unchanged."""


class DuplicateKey(Exception):
    """A push reused a key already in the queue (caller contract bug)."""


class PendingEntry:
    """One queued element: key, value, and which table to attempt next.

    Mutable on purpose: the move engine reuses the in-hand entry object
    when it continues with an evicted resident.
    """

    __slots__ = ("key", "value", "preferred_table")

    def __init__(self, key: int, value: object, preferred_table: int) -> None:
        self.key = key
        self.value = value
        self.preferred_table = preferred_table

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, PendingEntry):
            return NotImplemented
        return (
            self.key == other.key
            and self.value == other.value
            and self.preferred_table == other.preferred_table
        )

    def __repr__(self) -> str:
        return f"PendingEntry({self.key!r}, {self.value!r}, {self.preferred_table})"


class PendingQueue:
    """Bounded FIFO of PendingEntry with constant-time membership.

    At most one entry per key (DuplicateKey otherwise); length never
    exceeds capacity_threshold (QueueOverflow otherwise, raised before
    mutation).  Iteration runs front to back.
    """

    __slots__ = ("_entries", "capacity_threshold")

    def __init__(self, capacity_threshold: int) -> None:
        if capacity_threshold < 1:
            raise ValueError("capacity_threshold must be >= 1")
        self.capacity_threshold = capacity_threshold
        self._entries: OrderedDict[int, PendingEntry] = OrderedDict()

    def __len__(self) -> int:
        return len(self._entries)

    def __iter__(self) -> Iterator[PendingEntry]:
        return iter(self._entries.values())

    def push_back(self, entry: PendingEntry) -> None:
        """Append entry at the back.

        Raises:
            DuplicateKey: entry.key is already queued.
            QueueOverflow: the queue is at capacity_threshold.
        """
        entries = self._entries
        if entry.key in entries:
            raise DuplicateKey(f"key {entry.key} already queued")
        if len(entries) >= self.capacity_threshold:
            raise QueueOverflow
        entries[entry.key] = entry

    def push_front(self, entry: PendingEntry) -> None:
        """Prepend entry at the front; same errors as push_back."""
        entries = self._entries
        if entry.key in entries:
            raise DuplicateKey(f"key {entry.key} already queued")
        if len(entries) >= self.capacity_threshold:
            raise QueueOverflow
        entries[entry.key] = entry
        entries.move_to_end(entry.key, last=False)

    def pop_front(self) -> PendingEntry | None:
        """Remove and return the front entry, or None when empty."""
        entries = self._entries
        if not entries:
            return None
        return entries.popitem(last=False)[1]

    def remove_key(self, key: int) -> bool:
        """Remove the entry for key wherever it sits; True if found."""
        return self._entries.pop(key, None) is not None

    def membership(self, key: int) -> PendingEntry | None:
        """Return the entry for key, or None.  One index query, no scan."""
        return self._entries.get(key)

    def clear(self) -> None:
        self._entries.clear()

    def keys(self):
        """Keys currently queued (front-to-back view, for consistency checks)."""
        return self._entries.keys()

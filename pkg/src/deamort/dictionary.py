"""De-amortized cuckoo dictionary plus the amortized baseline.

Layout: two tables of ceil((1 + epsilon) * capacity_n) slots each; a
key's two candidate cells are table0[h0(k)] and table1[h1(k)].  A
bounded pending queue holds elements not yet placed.  The de-amortized
insert appends the new element to the queue and then runs a move engine
for at most move_budget_L placements, so every operation's work is a
hard constant; whatever the budget cannot finish stays queued.  Queue
overflow triggers a stop-the-world rehash, reported as its own outcome
and excluded from per-operation bounds.

Work accounting (the deterministic clock used instead of wall time):

* probe: one visit to one logical location, that is a table cell (read
  and/or write in the same step counts once), one queue entry touched
  by a push or pop, or one membership-index query.
* move: one placement of an element into a table cell, evicting or not.

Documented constants: lookup and delete always cost exactly
LOOKUP_PROBES = 3 probes (both home cells plus the queue index, probed
unconditionally so the cost never depends on where the key lives or
whether it exists).  A de-amortized insert costs at most
insert_probe_cap(L) = 2 * L + 5 probes and at most L moves: 3 for the
presence check, 1 queue append, at most L pops, at most L placements,
and at most 1 front re-insert.  The amortized baseline insert has no
per-operation cap; its eviction walk may run up to
max(1, ceil(3 * log2(capacity_n))) moves, which is the quantity the
scaling experiment shows growing with n.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field
from enum import Enum

from .hashing import (
    MASK64,
    HashSeed,
    canonicalize_key,
    cell_slot,
    reseed,
    seed_from_int,
    subseeds,
)
from .metrics import OpMetrics
from .pending import PendingEntry, PendingQueue, QueueOverflow

LOOKUP_PROBES = 3
DELETE_PROBES = 3
REHASH_MAX_ATTEMPTS = 16


def insert_probe_cap(move_budget_l: int) -> int:
    """Probe cap of one de-amortized insert with budget L: 2L + 5."""
    return 2 * move_budget_l + 5


class InvalidParameters(ValueError):
    """Parameters violate their invariants (n < 1, epsilon <= 0, L < 1...)."""


class RehashFailed(RuntimeError):
    """All rehash attempts failed; the dictionary was left unchanged."""


class Outcome(Enum):
    OK = "ok"
    NOT_FOUND = "not_found"
    FULL = "full"
    REHASH_PERFORMED = "rehash_performed"


class OpResult:
    """Outcome of one mutating operation plus its cost metrics."""

    __slots__ = ("outcome", "metrics")

    def __init__(self, outcome: Outcome, metrics: OpMetrics) -> None:
        self.outcome = outcome
        self.metrics = metrics

    def __repr__(self) -> str:
        return f"OpResult({self.outcome}, {self.metrics!r})"


def _default_seed() -> HashSeed:
    return seed_from_int(0)


@dataclass(frozen=True)
class Parameters:
    """All tunables: capacity, slack, move budget, queue constant, seed.

    Attributes:
        capacity_n: maximum number of stored elements.
        epsilon: table slack; each table gets ceil((1 + epsilon) * n)
            slots, so full-load utilization is about 1 / (2 (1 + eps)).
        move_budget_L: placements charged to one de-amortized insert.
        queue_constant_C: queue threshold multiplier; the pending queue
            overflows beyond max(1, ceil(C * log2(n))) entries.
        seed: initial hash seed.
    """

    capacity_n: int
    epsilon: float = 0.1
    move_budget_L: int = 3
    queue_constant_C: float = 4.0
    seed: HashSeed = field(default_factory=_default_seed)

    def __post_init__(self) -> None:
        if self.capacity_n < 1:
            raise InvalidParameters("capacity_n must be >= 1")
        if not self.epsilon > 0:
            raise InvalidParameters("epsilon must be > 0")
        if self.move_budget_L < 1:
            raise InvalidParameters("move_budget_L must be >= 1")
        if not self.queue_constant_C > 0:
            raise InvalidParameters("queue_constant_C must be > 0")

    @property
    def table_size(self) -> int:
        return math.ceil((1 + self.epsilon) * self.capacity_n)

    @property
    def total_slots(self) -> int:
        return 2 * self.table_size

    @property
    def queue_threshold(self) -> int:
        return max(1, math.ceil(self.queue_constant_C * math.log2(self.capacity_n)))

    @property
    def full_load_utilization(self) -> float:
        return self.capacity_n / self.total_slots


def _rehash_entropy(rehash_count: int, attempt: int, n_items: int) -> int:
    # Deterministic entropy stream: identical workloads rehash identically.
    return (rehash_count * 1_000_003 + attempt * 97 + n_items) & MASK64


class CuckooDict:
    """Two cuckoo tables plus the pending queue; both insert flavors.

    ``insert`` is the de-amortized operation (hard cap of L moves);
    ``insert_amortized`` is the classical baseline that walks the whole
    eviction path.  Lookup and delete are shared.  One instance should
    stick to one insert flavor; the harness never mixes them.

    Instances are single-threaded but self-contained (no shared mutable
    globals), so independent instances can run in parallel workers.
    """

    __slots__ = (
        "params",
        "_size",
        "_keys0",
        "_vals0",
        "_keys1",
        "_vals1",
        "_queue",
        "_count",
        "_seed",
        "_a0",
        "_b0",
        "_a1",
        "_b1",
        "_rehash_count",
        "_max_loop",
        "_max_probe",
        "_max_move",
        "_max_queue_len",
    )

    def __init__(self, params: Parameters) -> None:
        self.params = params
        size = params.table_size
        self._size = size
        self._keys0: list[int | None] = [None] * size
        self._vals0: list[object] = [None] * size
        self._keys1: list[int | None] = [None] * size
        self._vals1: list[object] = [None] * size
        self._queue = PendingQueue(params.queue_threshold)
        self._count = 0
        self._rehash_count = 0
        self._max_loop = max(1, math.ceil(3 * math.log2(params.capacity_n)))
        self._max_probe = 0
        self._max_move = 0
        self._max_queue_len = 0
        self._set_seed(params.seed)

    def _set_seed(self, seed: HashSeed) -> None:
        self._seed = seed
        self._a0, self._b0, self._a1, self._b1 = subseeds(seed)

    # Read-only views -------------------------------------------------

    @property
    def count(self) -> int:
        return self._count

    def __len__(self) -> int:
        return self._count

    @property
    def seed(self) -> HashSeed:
        return self._seed

    @property
    def rehash_count(self) -> int:
        return self._rehash_count

    @property
    def queue(self) -> PendingQueue:
        return self._queue

    @property
    def table_size(self) -> int:
        return self._size

    @property
    def total_slots(self) -> int:
        return 2 * self._size

    def items(self):
        """Yield every stored (canonical_key, value) pair, tables first."""
        for keys, vals in ((self._keys0, self._vals0), (self._keys1, self._vals1)):
            for i, k in enumerate(keys):
                if k is not None:
                    yield k, vals[i]
        for entry in self._queue:
            yield entry.key, entry.value

    # Operations ------------------------------------------------------

    def lookup(self, key: int | str | bytes) -> tuple[object | None, OpMetrics]:
        """Find a key; exactly 3 probes no matter where it lives.

        Both home cells and the queue index are probed unconditionally,
        so hits in table0, table1, the queue, and misses all cost the
        same: the per-operation time leaks nothing.

        Returns:
            (value or None, metrics with probe_count == LOOKUP_PROBES).
        """
        k = key & MASK64 if type(key) is int else canonicalize_key(key)
        size = self._size
        s0 = cell_slot(k, self._a0, self._b0, size)
        s1 = cell_slot(k, self._a1, self._b1, size)
        hit0 = self._keys0[s0] == k
        hit1 = self._keys1[s1] == k
        entry = self._queue.membership(k)
        if hit0:
            value = self._vals0[s0]
        elif hit1:
            value = self._vals1[s1]
        elif entry is not None:
            value = entry.value
        else:
            value = None
        qlen = len(self._queue)
        if LOOKUP_PROBES > self._max_probe:
            self._max_probe = LOOKUP_PROBES
        return value, OpMetrics(LOOKUP_PROBES, 0, qlen)

    def insert(self, key: int | str | bytes, value: object) -> OpResult:
        """De-amortized insert: at most L moves, at most 2L + 5 probes.

        Present keys are overwritten in place (3 probes).  New keys are
        appended to the queue, then the move engine spends up to L
        placements draining the queue front; an element still in hand
        when the budget runs out returns to the queue front.  A queue
        overflow triggers a full rehash (outcome REHASH_PERFORMED).

        Returns:
            OpResult; outcome FULL when capacity_n is reached.

        Raises:
            RehashFailed: every rehash attempt failed; state restored
                to exactly what it was before this insert.
        """
        k = key & MASK64 if type(key) is int else canonicalize_key(key)
        size = self._size
        a0 = self._a0
        b0 = self._b0
        a1 = self._a1
        b1 = self._b1
        keys0 = self._keys0
        vals0 = self._vals0
        keys1 = self._keys1
        vals1 = self._vals1
        queue = self._queue

        # Presence check: 3 probes (t0 home, t1 home, queue index).
        s0 = cell_slot(k, a0, b0, size)
        s1 = cell_slot(k, a1, b1, size)
        entry = queue.membership(k)
        if keys0[s0] == k:
            vals0[s0] = value
            return self._done(Outcome.OK, 3, 0)
        if keys1[s1] == k:
            vals1[s1] = value
            return self._done(Outcome.OK, 3, 0)
        if entry is not None:
            entry.value = value
            return self._done(Outcome.OK, 3, 0)

        if self._count == self.params.capacity_n:
            return self._done(Outcome.FULL, 3, 0)

        probes = 4  # presence check + the queue append below
        moves = 0
        undo_places: list[tuple[int, int, int | None, object]] = []
        undo_pops: list[tuple[int, object, int]] = []
        try:
            queue.push_back(PendingEntry(k, value, 0))
        except QueueOverflow:
            return self._overflow_rehash(k, (k, value), probes, moves, undo_places, undo_pops)

        budget = self.params.move_budget_L
        hk = 0
        hv: object = None
        hp = 0
        in_hand = False
        while budget:
            if not in_hand:
                popped = queue.pop_front()
                if popped is None:
                    break
                probes += 1
                hk = popped.key
                hv = popped.value
                hp = popped.preferred_table
                undo_pops.append((hk, hv, hp))
            if hp == 0:
                s = cell_slot(hk, a0, b0, size)
                rk = keys0[s]
                rv = vals0[s]
                keys0[s] = hk
                vals0[s] = hv
            else:
                s = cell_slot(hk, a1, b1, size)
                rk = keys1[s]
                rv = vals1[s]
                keys1[s] = hk
                vals1[s] = hv
            undo_places.append((hp, s, rk, rv))
            probes += 1
            moves += 1
            budget -= 1
            if rk is None:
                in_hand = False
            else:
                hk = rk
                hv = rv
                hp = 1 - hp
                in_hand = True

        if in_hand:
            probes += 1
            try:
                queue.push_front(PendingEntry(hk, hv, hp))
            except QueueOverflow:
                return self._overflow_rehash(k, (hk, hv), probes, moves, undo_places, undo_pops)

        self._count += 1
        return self._done(Outcome.OK, probes, moves)

    def insert_amortized(self, key: int | str | bytes, value: object) -> OpResult:
        """Classical cuckoo insert: walk the eviction path to the end.

        The walk displaces residents for up to max(1, ceil(3 log2 n))
        steps; exhaustion triggers a full rehash (REHASH_PERFORMED).
        move_count records the whole path, so it grows with n; this is
        the baseline the de-amortized insert is measured against.
        """
        k = key & MASK64 if type(key) is int else canonicalize_key(key)
        size = self._size
        a0 = self._a0
        b0 = self._b0
        a1 = self._a1
        b1 = self._b1
        keys0 = self._keys0
        vals0 = self._vals0
        keys1 = self._keys1
        vals1 = self._vals1
        queue = self._queue

        s0 = cell_slot(k, a0, b0, size)
        s1 = cell_slot(k, a1, b1, size)
        entry = queue.membership(k)
        if keys0[s0] == k:
            vals0[s0] = value
            return self._done(Outcome.OK, 3, 0)
        if keys1[s1] == k:
            vals1[s1] = value
            return self._done(Outcome.OK, 3, 0)
        if entry is not None:
            entry.value = value
            return self._done(Outcome.OK, 3, 0)

        if self._count == self.params.capacity_n:
            return self._done(Outcome.FULL, 3, 0)

        probes = 3
        moves = 0
        undo_places: list[tuple[int, int, int | None, object]] = []
        hk = k
        hv = value
        hp = 0
        placed = False
        for _ in range(self._max_loop):
            if hp == 0:
                s = cell_slot(hk, a0, b0, size)
                rk = keys0[s]
                rv = vals0[s]
                keys0[s] = hk
                vals0[s] = hv
            else:
                s = cell_slot(hk, a1, b1, size)
                rk = keys1[s]
                rv = vals1[s]
                keys1[s] = hk
                vals1[s] = hv
            undo_places.append((hp, s, rk, rv))
            probes += 1
            moves += 1
            if rk is None:
                placed = True
                break
            hk = rk
            hv = rv
            hp = 1 - hp

        if not placed:
            return self._overflow_rehash(k, (hk, hv), probes, moves, undo_places, [])

        self._count += 1
        return self._done(Outcome.OK, probes, moves)

    def delete(self, key: int | str | bytes) -> OpResult:
        """Remove a key from whichever location holds it; 3 probes flat."""
        k = key & MASK64 if type(key) is int else canonicalize_key(key)
        size = self._size
        s0 = cell_slot(k, self._a0, self._b0, size)
        s1 = cell_slot(k, self._a1, self._b1, size)
        hit0 = self._keys0[s0] == k
        hit1 = self._keys1[s1] == k
        in_queue = self._queue.remove_key(k)
        if hit0:
            self._keys0[s0] = None
            self._vals0[s0] = None
        elif hit1:
            self._keys1[s1] = None
            self._vals1[s1] = None
        if hit0 or hit1 or in_queue:
            self._count -= 1
            return self._done(Outcome.OK, DELETE_PROBES, 0)
        return self._done(Outcome.NOT_FOUND, DELETE_PROBES, 0)

    def full_rehash(self) -> None:
        """Reseed and rebuild from the current element set.

        Retries with fresh seeds up to REHASH_MAX_ATTEMPTS times; the
        element set is preserved exactly and the queue drains into the
        tables.  Cost is not charged to any operation, only counted.

        Raises:
            RehashFailed: all attempts failed; state untouched.
        """
        self._rehash([])

    # Internals -------------------------------------------------------

    def _done(self, outcome: Outcome, probes: int, moves: int) -> OpResult:
        qlen = len(self._queue)
        if probes > self._max_probe:
            self._max_probe = probes
        if moves > self._max_move:
            self._max_move = moves
        if qlen > self._max_queue_len:
            self._max_queue_len = qlen
        return OpResult(outcome, OpMetrics(probes, moves, qlen))

    def _overflow_rehash(
        self,
        new_key: int,
        in_hand: tuple[int, object],
        probes: int,
        moves: int,
        undo_places: list[tuple[int, int, int | None, object]],
        undo_pops: list[tuple[int, object, int]],
    ) -> OpResult:
        """Rehash triggered mid-insert; on failure restore pre-insert state."""
        try:
            self._rehash([in_hand])
        except RehashFailed:
            keys0 = self._keys0
            vals0 = self._vals0
            keys1 = self._keys1
            vals1 = self._vals1
            for t, s, old_k, old_v in reversed(undo_places):
                if t == 0:
                    keys0[s] = old_k
                    vals0[s] = old_v
                else:
                    keys1[s] = old_k
                    vals1[s] = old_v
            queue = self._queue
            queue.remove_key(new_key)
            for pk, pv, pp in reversed(undo_pops):
                if pk == new_key:
                    continue
                queue.push_front(PendingEntry(pk, pv, pp))
            raise
        self._count += 1
        # Metrics cover work up to the overflow; the rebuild is counted
        # via rehash_count, not charged to this op.
        qlen = len(self._queue)
        if qlen > self._max_queue_len:
            self._max_queue_len = qlen
        return OpResult(Outcome.REHASH_PERFORMED, OpMetrics(probes, moves, qlen))

    def _rehash(self, extra_items: list[tuple[int, object]]) -> None:
        size = self._size
        items: list[tuple[int, object]] = []
        for keys, vals in ((self._keys0, self._vals0), (self._keys1, self._vals1)):
            for i, k in enumerate(keys):
                if k is not None:
                    items.append((k, vals[i]))
        for entry in self._queue:
            items.append((entry.key, entry.value))
        items.extend(extra_items)

        max_loop = self._max_loop
        seed = self._seed
        for attempt in range(1, REHASH_MAX_ATTEMPTS + 1):
            seed = reseed(seed, _rehash_entropy(self._rehash_count, attempt, len(items)))
            a0, b0, a1, b1 = subseeds(seed)
            nk0: list[int | None] = [None] * size
            nv0: list[object] = [None] * size
            nk1: list[int | None] = [None] * size
            nv1: list[object] = [None] * size
            success = True
            for k, v in items:
                hk = k
                hv = v
                hp = 0
                placed = False
                for _ in range(max_loop):
                    if hp == 0:
                        s = cell_slot(hk, a0, b0, size)
                        rk = nk0[s]
                        rv = nv0[s]
                        nk0[s] = hk
                        nv0[s] = hv
                    else:
                        s = cell_slot(hk, a1, b1, size)
                        rk = nk1[s]
                        rv = nv1[s]
                        nk1[s] = hk
                        nv1[s] = hv
                    if rk is None:
                        placed = True
                        break
                    hk = rk
                    hv = rv
                    hp = 1 - hp
                if not placed:
                    success = False
                    break
            if success:
                self._keys0 = nk0
                self._vals0 = nv0
                self._keys1 = nk1
                self._vals1 = nv1
                self._queue.clear()
                self._set_seed(seed)
                self._rehash_count += 1
                return
        raise RehashFailed(f"rehash failed after {REHASH_MAX_ATTEMPTS} attempts")

    # Reporting -------------------------------------------------------

    def snapshot_stats(self) -> dict:
        """Current counters: count, utilization, queue, worst costs so far.

        Worst-case metrics cover operations with outcomes OK, NOT_FOUND
        and FULL; REHASH_PERFORMED events are visible via rehash_count.
        """
        return {
            "count": self._count,
            "capacity_n": self.params.capacity_n,
            "utilization": self._count / self.total_slots,
            "queue_len": len(self._queue),
            "queue_threshold": self._queue.capacity_threshold,
            "rehash_count": self._rehash_count,
            "max_probe_count": self._max_probe,
            "max_move_count": self._max_move,
            "max_queue_len": self._max_queue_len,
            "seed_generation": self._seed.generation,
        }

    def to_snapshot(self) -> dict:
        """Serializable state snapshot for debugging and run comparison.

        Tables are digested (occupancy bitmaps and a content hash over
        slot, key, value triples) rather than dumped; the queue is small
        and included verbatim.  Two runs produced identical states iff
        their snapshots are equal.
        """
        size = self._size
        occupancy = {}
        content = hashlib.sha256()
        for name, keys, vals in (
            ("table0", self._keys0, self._vals0),
            ("table1", self._keys1, self._vals1),
        ):
            bitmap = bytearray((size + 7) // 8)
            occupied = 0
            for i, k in enumerate(keys):
                if k is not None:
                    occupied += 1
                    bitmap[i >> 3] |= 1 << (i & 7)
                    content.update(name.encode())
                    content.update(i.to_bytes(8, "little"))
                    content.update(k.to_bytes(8, "little"))
                    content.update(repr(vals[i]).encode())
            occupancy[name] = {
                "occupied": occupied,
                "bitmap_sha256": hashlib.sha256(bytes(bitmap)).hexdigest(),
            }
        queue_dump = []
        for entry in self._queue:
            queue_dump.append([entry.key, entry.preferred_table, repr(entry.value)])
            content.update(b"queue")
            content.update(entry.key.to_bytes(8, "little"))
            content.update(repr(entry.value).encode())
        p = self.params
        return {
            "schema_version": 1,
            "parameters": {
                "capacity_n": p.capacity_n,
                "epsilon": p.epsilon,
                "move_budget_L": p.move_budget_L,
                "queue_constant_C": p.queue_constant_C,
                "initial_seed_material": f"{p.seed.material:#x}",
                "initial_seed_generation": p.seed.generation,
            },
            "seed": {
                "material": f"{self._seed.material:#x}",
                "generation": self._seed.generation,
            },
            "table_size": size,
            "count": self._count,
            "rehash_count": self._rehash_count,
            "queue": queue_dump,
            "occupancy": occupancy,
            "content_sha256": content.hexdigest(),
            "max_metrics": {
                "probe": self._max_probe,
                "move": self._max_move,
                "queue_len": self._max_queue_len,
            },
        }

"""The clock: deterministic per-operation cost counters and aggregates.

Wall-clock timing is noisy and platform-bound, so cost is counted in
logical probes (cell or queue-entry visits) and moves (placements).  A
timing attacker is modeled as someone who reads these counters; see the
dictionary module for the exact accounting contract.

OpMetrics is the per-operation record; AggregateStats folds many of
them into histograms, running maxima, and a sampled queue-length trace,
and merges associatively and commutatively so parallel trials can be
combined in any order.
"""

from __future__ import annotations

from collections import Counter

OP_INSERT = "insert"
OP_LOOKUP = "lookup"
OP_DELETE = "delete"
OP_TYPES = (OP_INSERT, OP_LOOKUP, OP_DELETE)

DEFAULT_SAMPLE_EVERY = 64


class OpMetrics:
    """Cost of one operation: probes, moves, queue length afterwards."""

    __slots__ = ("probe_count", "move_count", "queue_len_after")

    def __init__(self, probe_count: int, move_count: int, queue_len_after: int) -> None:
        self.probe_count = probe_count
        self.move_count = move_count
        self.queue_len_after = queue_len_after

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, OpMetrics):
            return NotImplemented
        return (
            self.probe_count == other.probe_count
            and self.move_count == other.move_count
            and self.queue_len_after == other.queue_len_after
        )

    def __repr__(self) -> str:
        return (
            f"OpMetrics(probe_count={self.probe_count}, "
            f"move_count={self.move_count}, queue_len_after={self.queue_len_after})"
        )


class AggregateStats:
    """Histograms, maxima, and traces over many recorded operations.

    Each instance owns one trace label (typically "seed=N"); merging
    instances with clashing labels is an error, which keeps merge
    deterministic regardless of completion order.
    """

    def __init__(
        self,
        trace_label: str = "",
        sample_every: int = DEFAULT_SAMPLE_EVERY,
    ) -> None:
        if sample_every < 1:
            raise ValueError("sample_every must be >= 1")
        self.probe_hist: dict[str, Counter[int]] = {t: Counter() for t in OP_TYPES}
        self.move_hist: dict[str, Counter[int]] = {t: Counter() for t in OP_TYPES}
        self.max_probe: dict[str, int] = {t: 0 for t in OP_TYPES}
        self.max_move: dict[str, int] = {t: 0 for t in OP_TYPES}
        self.op_counts: dict[str, int] = {t: 0 for t in OP_TYPES}
        self.max_queue_len = 0
        self.rehash_count = 0
        self.sample_every = sample_every
        self.trace_label = trace_label
        self.queue_trace: dict[str, list[tuple[int, int]]] = {}
        self.ops_seen = 0

    def record(self, op_type: str, m: OpMetrics) -> None:
        """Fold one operation's metrics in.

        Args:
            op_type: one of OP_TYPES.
            m: the operation's counters.
        """
        probes = m.probe_count
        moves = m.move_count
        qlen = m.queue_len_after
        self.probe_hist[op_type][probes] += 1
        self.move_hist[op_type][moves] += 1
        self.op_counts[op_type] += 1
        if probes > self.max_probe[op_type]:
            self.max_probe[op_type] = probes
        if moves > self.max_move[op_type]:
            self.max_move[op_type] = moves
        if qlen > self.max_queue_len:
            self.max_queue_len = qlen
        ops = self.ops_seen
        if ops % self.sample_every == 0:
            self.queue_trace.setdefault(self.trace_label, []).append((ops, qlen))
        self.ops_seen = ops + 1

    def note_rehash(self, count: int = 1) -> None:
        self.rehash_count += count

    def total_ops(self) -> int:
        return sum(self.op_counts.values())

    def overall_max_move(self) -> int:
        return max(self.max_move.values())

    def overall_max_probe(self) -> int:
        return max(self.max_probe.values())

    def merge(self, other: AggregateStats) -> AggregateStats:
        """Pure combination of two aggregates (associative, commutative).

        Raises:
            ValueError: mismatched sample_every or clashing trace labels.
        """
        if self.sample_every != other.sample_every:
            raise ValueError("cannot merge stats with different sample_every")
        overlap = self.queue_trace.keys() & other.queue_trace.keys()
        if overlap:
            raise ValueError(f"clashing trace labels: {sorted(overlap)}")
        out = AggregateStats(sample_every=self.sample_every)
        for t in OP_TYPES:
            out.probe_hist[t] = self.probe_hist[t] + other.probe_hist[t]
            out.move_hist[t] = self.move_hist[t] + other.move_hist[t]
            out.max_probe[t] = max(self.max_probe[t], other.max_probe[t])
            out.max_move[t] = max(self.max_move[t], other.max_move[t])
            out.op_counts[t] = self.op_counts[t] + other.op_counts[t]
        out.max_queue_len = max(self.max_queue_len, other.max_queue_len)
        out.rehash_count = self.rehash_count + other.rehash_count
        out.queue_trace = {
            label: list(points)
            for label, points in {**self.queue_trace, **other.queue_trace}.items()
        }
        out.ops_seen = self.ops_seen + other.ops_seen
        return out

    def histogram_rows(self, which: str) -> list[tuple[str, int, int]]:
        """Flatten one histogram family to (op_type, bucket, count) rows.

        Args:
            which: "probe" or "move".

        Returns:
            Rows sorted by (op_type, bucket); stable across runs.
        """
        hist = {"probe": self.probe_hist, "move": self.move_hist}[which]
        rows: list[tuple[str, int, int]] = []
        for op_type in sorted(OP_TYPES):
            for bucket in sorted(hist[op_type]):
                rows.append((op_type, bucket, hist[op_type][bucket]))
        return rows

    def to_json_dict(self) -> dict:
        """Lossless, stably ordered rendering of every counter."""
        return {
            "schema_version": 1,
            "op_counts": {t: self.op_counts[t] for t in OP_TYPES},
            "probe_hist": {
                t: {str(b): c for b, c in sorted(self.probe_hist[t].items())}
                for t in OP_TYPES
            },
            "move_hist": {
                t: {str(b): c for b, c in sorted(self.move_hist[t].items())}
                for t in OP_TYPES
            },
            "max_probe": {t: self.max_probe[t] for t in OP_TYPES},
            "max_move": {t: self.max_move[t] for t in OP_TYPES},
            "max_queue_len": self.max_queue_len,
            "rehash_count": self.rehash_count,
            "sample_every": self.sample_every,
            "ops_seen": self.ops_seen,
            "queue_trace": {
                label: [[i, q] for i, q in points]
                for label, points in sorted(self.queue_trace.items())
            },
        }

    @classmethod
    def from_json_dict(cls, data: dict) -> AggregateStats:
        """Inverse of to_json_dict; exact counter round-trip."""
        out = cls(sample_every=data["sample_every"])
        for t in OP_TYPES:
            out.probe_hist[t] = Counter(
                {int(b): c for b, c in data["probe_hist"][t].items()}
            )
            out.move_hist[t] = Counter(
                {int(b): c for b, c in data["move_hist"][t].items()}
            )
            out.max_probe[t] = data["max_probe"][t]
            out.max_move[t] = data["max_move"][t]
            out.op_counts[t] = data["op_counts"][t]
        out.max_queue_len = data["max_queue_len"]
        out.rehash_count = data["rehash_count"]
        out.ops_seen = data["ops_seen"]
        out.queue_trace = {
            label: [(int(i), int(q)) for i, q in points]
            for label, points in data["queue_trace"].items()
        }
        return out

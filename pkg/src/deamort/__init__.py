"""De-amortized cuckoo hashing dictionary and its benchmark harness.

Two tables plus a bounded pending queue give every dictionary operation
a hard constant work bound; the harness counts probes and moves (a
deterministic clock), compares against oracle and amortized baselines,
and reports utilization, queue behavior, and worst-case costs.
"""

from __future__ import annotations

from .dictionary import (
    CuckooDict,
    InvalidParameters,
    OpResult,
    Outcome,
    Parameters,
    RehashFailed,
)
from .hashing import CellIndex, HashSeed, hash_cell, reseed, seed_from_hex
from .metrics import AggregateStats, OpMetrics
from .pending import DuplicateKey, PendingEntry, PendingQueue, QueueOverflow

__version__ = "0.1.0"

__all__ = [
    "AggregateStats",
    "CellIndex",
    "CuckooDict",
    "DuplicateKey",
    "HashSeed",
    "InvalidParameters",
    "OpMetrics",
    "OpResult",
    "Outcome",
    "Parameters",
    "PendingEntry",
    "PendingQueue",
    "QueueOverflow",
    "RehashFailed",
    "hash_cell",
    "reseed",
    "seed_from_hex",
    "__version__",
]

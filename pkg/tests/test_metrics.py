"""Aggregation arithmetic: histograms, maxima, merge laws, round-trips."""

import json
import random
from collections import Counter

import pytest

from deamort.metrics import (
    OP_DELETE,
    OP_INSERT,
    OP_LOOKUP,
    OP_TYPES,
    AggregateStats,
    OpMetrics,
)


def random_stats(seed, label, n_ops=500, sample_every=16):
    rng = random.Random(seed)
    stats = AggregateStats(trace_label=label, sample_every=sample_every)
    for _ in range(n_ops):
        op = OP_TYPES[rng.randrange(3)]
        stats.record(op, OpMetrics(rng.randrange(1, 12), rng.randrange(4), rng.randrange(20)))
        if rng.randrange(100) == 0:
            stats.note_rehash()
    return stats


def test_record_updates_histograms_and_maxima():
    stats = AggregateStats()
    stats.record(OP_INSERT, OpMetrics(5, 2, 3))
    stats.record(OP_INSERT, OpMetrics(7, 0, 9))
    stats.record(OP_INSERT, OpMetrics(5, 1, 0))
    stats.record(OP_LOOKUP, OpMetrics(3, 0, 9))
    assert stats.probe_hist[OP_INSERT] == Counter({5: 2, 7: 1})
    assert stats.move_hist[OP_INSERT] == Counter({2: 1, 0: 1, 1: 1})
    assert stats.max_probe[OP_INSERT] == 7
    assert stats.max_move[OP_INSERT] == 2
    assert stats.max_probe[OP_LOOKUP] == 3
    assert stats.max_queue_len == 9
    assert stats.op_counts == {OP_INSERT: 3, OP_LOOKUP: 1, OP_DELETE: 0}
    assert stats.total_ops() == 4
    assert stats.overall_max_probe() == 7
    assert stats.overall_max_move() == 2


def test_histogram_rows_cover_all_counts():
    stats = random_stats(3, "seed=3")
    for which, hists in (("probe", stats.probe_hist), ("move", stats.move_hist)):
        rows = stats.histogram_rows(which)
        assert rows == sorted(rows)
        by_type = Counter()
        for op_type, _, count in rows:
            by_type[op_type] += count
        for op_type in OP_TYPES:
            assert by_type[op_type] == stats.op_counts[op_type]
            assert by_type[op_type] == sum(hists[op_type].values())


def test_queue_trace_sampling_stride():
    stats = AggregateStats(trace_label="t", sample_every=10)
    for i in range(35):
        stats.record(OP_INSERT, OpMetrics(1, 0, i))
    trace = stats.queue_trace["t"]
    assert [op_index for op_index, _ in trace] == [0, 10, 20, 30]
    assert [qlen for _, qlen in trace] == [0, 10, 20, 30]

    dense = AggregateStats(trace_label="d", sample_every=1)
    for i in range(5):
        dense.record(OP_LOOKUP, OpMetrics(3, 0, i))
    assert len(dense.queue_trace["d"]) == 5


def test_sample_every_validation():
    with pytest.raises(ValueError):
        AggregateStats(sample_every=0)


def test_merge_is_commutative_and_associative():
    a = random_stats(1, "seed=1")
    b = random_stats(2, "seed=2")
    c = random_stats(3, "seed=3")
    ab = a.merge(b)
    ba = b.merge(a)
    assert ab.to_json_dict() == ba.to_json_dict()
    left = a.merge(b).merge(c)
    right = a.merge(b.merge(c))
    assert left.to_json_dict() == right.to_json_dict()
    assert left.total_ops() == a.total_ops() + b.total_ops() + c.total_ops()
    assert left.rehash_count == a.rehash_count + b.rehash_count + c.rehash_count
    assert left.max_queue_len == max(a.max_queue_len, b.max_queue_len, c.max_queue_len)


def test_merge_does_not_mutate_inputs():
    a = random_stats(4, "seed=4")
    b = random_stats(5, "seed=5")
    before_a = a.to_json_dict()
    before_b = b.to_json_dict()
    a.merge(b)
    assert a.to_json_dict() == before_a
    assert b.to_json_dict() == before_b


def test_merge_rejects_clashing_labels_and_strides():
    a = random_stats(6, "same-label")
    b = random_stats(7, "same-label")
    with pytest.raises(ValueError):
        a.merge(b)
    c = random_stats(8, "other", sample_every=32)
    with pytest.raises(ValueError):
        a.merge(c)


def test_json_round_trip_is_lossless():
    stats = random_stats(9, "seed=9")
    blob = json.dumps(stats.to_json_dict(), sort_keys=True)
    back = AggregateStats.from_json_dict(json.loads(blob))
    assert back.to_json_dict() == stats.to_json_dict()
    # buckets come back as ints, not the JSON string keys
    assert all(isinstance(b, int) for b in back.probe_hist[OP_INSERT])


def test_identical_streams_produce_identical_json():
    a = random_stats(10, "seed=10")
    b = random_stats(10, "seed=10")
    assert json.dumps(a.to_json_dict(), sort_keys=True) == json.dumps(
        b.to_json_dict(), sort_keys=True
    )

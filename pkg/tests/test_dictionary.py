"""Dictionary semantics, cost caps, rehash recovery, and oracle runs.

The expensive checks run both insert flavors against a plain dict
oracle under a seeded mixed workload, auditing every operation's cost
against the documented constants along the way.  The rehash-failure
tests build pathological key groups by searching for real collisions
under the live seed, then pin the seed in place so no retry can escape.
"""

import random

import pytest

import deamort.dictionary
from deamort.dictionary import (
    DELETE_PROBES,
    LOOKUP_PROBES,
    REHASH_MAX_ATTEMPTS,
    CuckooDict,
    InvalidParameters,
    Outcome,
    Parameters,
    RehashFailed,
    insert_probe_cap,
)
from deamort.hashing import cell_slot, seed_from_int, subseeds


def make(capacity_n, seed_value=0, **kw):
    return CuckooDict(
        Parameters(capacity_n=capacity_n, seed=seed_from_int(seed_value), **kw)
    )


def colliding_group(d, want, same_both=True, limit=500_000):
    """Find `want` keys sharing the table0 slot (and table1 slot if asked)."""
    a0, b0, a1, b1 = subseeds(d.seed)
    size = d.table_size
    buckets = {}
    for k in range(1, limit):
        s0 = cell_slot(k, a0, b0, size)
        spot = (s0, cell_slot(k, a1, b1, size)) if same_both else s0
        group = buckets.setdefault(spot, [])
        group.append(k)
        if len(group) == want:
            return group
    raise AssertionError("no colliding group found in the search range")


def contents(d):
    return dict(d.items())


# Parameters ------------------------------------------------------------


def test_parameter_arithmetic_frozen_values():
    p = Parameters(capacity_n=65536, epsilon=0.1)
    assert p.table_size == 72090
    assert p.total_slots == 144180
    assert p.queue_threshold == 64
    assert p.full_load_utilization == 65536 / 144180

    tight = Parameters(capacity_n=4096, epsilon=0.02)
    assert tight.table_size == 4178
    assert tight.full_load_utilization == 4096 / 8356
    assert tight.full_load_utilization >= 0.49

    small = Parameters(capacity_n=1024, epsilon=0.1, queue_constant_C=4.0)
    assert small.queue_threshold == 40


def test_parameter_floors_at_capacity_one():
    p = Parameters(capacity_n=1)
    assert p.table_size == 2
    assert p.queue_threshold == 1
    d = CuckooDict(p)
    assert d._max_loop == 1


def test_parameter_validation():
    with pytest.raises(InvalidParameters):
        Parameters(capacity_n=0)
    with pytest.raises(InvalidParameters):
        Parameters(capacity_n=8, epsilon=0.0)
    with pytest.raises(InvalidParameters):
        Parameters(capacity_n=8, epsilon=-0.5)
    with pytest.raises(InvalidParameters):
        Parameters(capacity_n=8, move_budget_L=0)
    with pytest.raises(InvalidParameters):
        Parameters(capacity_n=8, queue_constant_C=0.0)


def test_insert_probe_cap_formula():
    assert insert_probe_cap(1) == 7
    assert insert_probe_cap(3) == 11
    assert insert_probe_cap(8) == 21


# Basic semantics -------------------------------------------------------


def test_insert_lookup_delete_round_trip():
    d = make(64)
    assert d.insert(10, "x").outcome is Outcome.OK
    assert d.insert(11, "y").outcome is Outcome.OK
    assert len(d) == 2
    assert d.lookup(10)[0] == "x"
    assert d.lookup(11)[0] == "y"
    assert d.lookup(12)[0] is None
    assert d.delete(10).outcome is Outcome.OK
    assert d.lookup(10)[0] is None
    assert d.delete(10).outcome is Outcome.NOT_FOUND
    assert len(d) == 1


def test_duplicate_insert_overwrites_in_place():
    d = make(64)
    d.insert(5, "old")
    result = d.insert(5, "new")
    assert result.outcome is Outcome.OK
    assert result.metrics.probe_count == 3
    assert result.metrics.move_count == 0
    assert d.lookup(5)[0] == "new"
    assert len(d) == 1


def test_full_outcome_at_capacity():
    d = make(4)
    for k in range(4):
        assert d.insert(k, k).outcome is Outcome.OK
    result = d.insert(99, "nope")
    assert result.outcome is Outcome.FULL
    assert result.metrics.probe_count == 3
    assert len(d) == 4
    assert d.lookup(99)[0] is None
    # overwriting an existing key still works at capacity
    assert d.insert(2, "updated").outcome is Outcome.OK
    assert d.lookup(2)[0] == "updated"
    d.delete(0)
    assert d.insert(99, "now").outcome is Outcome.OK


def test_capacity_one_dictionary():
    d = make(1)
    assert d.insert(7, "a").outcome is Outcome.OK
    assert d.insert(8, "b").outcome is Outcome.FULL
    assert d.lookup(7)[0] == "a"
    assert d.delete(7).outcome is Outcome.OK
    assert d.insert(8, "b").outcome is Outcome.OK


def test_string_and_bytes_keys_share_canonical_form():
    d = make(64)
    d.insert("abc", 1)
    assert d.lookup(b"abc")[0] == 1
    assert d.insert(b"abc", 2).outcome is Outcome.OK
    assert d.lookup("abc")[0] == 2
    assert len(d) == 1
    assert d.delete(b"abc").outcome is Outcome.OK
    assert len(d) == 0


def test_negative_int_key_wraps_to_64_bits():
    d = make(64)
    d.insert(-1, "wrap")
    assert d.lookup(2**64 - 1)[0] == "wrap"
    assert len(d) == 1


# Cost accounting -------------------------------------------------------


def test_lookup_and_delete_probe_constants():
    d = make(256)
    for k in range(100):
        d.insert(k, k)
    for k in (0, 50, 99, 1000, 2000):
        _, metrics = d.lookup(k)
        assert metrics.probe_count == LOOKUP_PROBES
        assert metrics.move_count == 0
    for k in (0, 1000):
        result = d.delete(k)
        assert result.metrics.probe_count == DELETE_PROBES


def test_single_insert_into_empty_table_costs_one_move():
    d = make(64)
    result = d.insert(42, "v")
    assert result.metrics.move_count == 1
    # 3 presence + 1 append + 1 pop + 1 placement
    assert result.metrics.probe_count == 6
    assert result.metrics.queue_len_after == 0


def test_lookup_finds_key_parked_in_queue():
    d = make(32, move_budget_L=1)
    k1, k2 = colliding_group(d, 2, same_both=False)
    assert d.insert(k1, "first").outcome is Outcome.OK
    assert d.insert(k2, "second").outcome is Outcome.OK
    # k2 evicted k1 with no budget left, so k1 waits in the queue
    assert len(d.queue) == 1
    assert d.queue.membership(k1) is not None
    value, metrics = d.lookup(k1)
    assert value == "first"
    assert metrics.probe_count == LOOKUP_PROBES
    assert d.lookup(k2)[0] == "second"
    assert contents(d) == {k1: "first", k2: "second"}
    # deleting the queued key removes it from the queue
    assert d.delete(k1).outcome is Outcome.OK
    assert len(d.queue) == 0
    assert len(d) == 1


def test_queued_key_overwrite_updates_queue_entry():
    d = make(32, move_budget_L=1)
    k1, k2 = colliding_group(d, 2, same_both=False)
    d.insert(k1, "first")
    d.insert(k2, "second")
    assert d.queue.membership(k1) is not None
    result = d.insert(k1, "rewritten")
    assert result.outcome is Outcome.OK
    assert result.metrics.probe_count == 3
    assert d.lookup(k1)[0] == "rewritten"
    assert len(d) == 2


# Rehash paths ----------------------------------------------------------


def test_queue_overflow_triggers_rehash_and_preserves_content():
    d = make(8, queue_constant_C=0.25, move_budget_L=3)
    assert d.queue.capacity_threshold == 1
    group = colliding_group(d, 4)
    for k in group[:3]:
        assert d.insert(k, k * 2).outcome is Outcome.OK
    assert len(d.queue) == 1
    result = d.insert(group[3], group[3] * 2)
    assert result.outcome is Outcome.REHASH_PERFORMED
    assert d.rehash_count == 1
    assert d.seed.generation > 0
    assert len(d.queue) == 0
    assert contents(d) == {k: k * 2 for k in group}


def test_rehash_failed_restores_state_deamortized(monkeypatch):
    d = make(8, queue_constant_C=0.25, move_budget_L=3)
    group = colliding_group(d, 4)
    for k in group[:3]:
        d.insert(k, k * 2)
    before = d.to_snapshot()
    # pin the seed: every rebuild sees the same 4-keys-2-cells knot
    monkeypatch.setattr(deamort.dictionary, "reseed", lambda seed, entropy: seed)
    with pytest.raises(RehashFailed):
        d.insert(group[3], "doomed")
    assert d.to_snapshot() == before
    assert contents(d) == {k: k * 2 for k in group[:3]}
    assert d.rehash_count == 0
    monkeypatch.undo()
    # with real reseeding the same insert succeeds via rehash
    result = d.insert(group[3], group[3] * 2)
    assert result.outcome is Outcome.REHASH_PERFORMED
    assert contents(d) == {k: k * 2 for k in group}


def test_rehash_failed_restores_state_amortized(monkeypatch):
    d = make(8, queue_constant_C=4.0)
    group = colliding_group(d, 3)
    assert d.insert_amortized(group[0], "a").outcome is Outcome.OK
    assert d.insert_amortized(group[1], "b").outcome is Outcome.OK
    before = d.to_snapshot()
    monkeypatch.setattr(deamort.dictionary, "reseed", lambda seed, entropy: seed)
    # third key sharing both cells: the eviction walk cycles, and with
    # the seed pinned every one of the 16 rebuild attempts fails too
    with pytest.raises(RehashFailed):
        d.insert_amortized(group[2], "c")
    assert d.to_snapshot() == before
    assert contents(d) == {group[0]: "a", group[1]: "b"}
    monkeypatch.undo()
    result = d.insert_amortized(group[2], "c")
    assert result.outcome is Outcome.REHASH_PERFORMED
    assert contents(d) == {group[0]: "a", group[1]: "b", group[2]: "c"}


def test_explicit_full_rehash_preserves_content():
    d = make(1024, seed_value=3)
    rng = random.Random(3)
    expected = {}
    for _ in range(500):
        k = rng.randrange(10**6)
        expected[k] = k + 1
        d.insert(k, k + 1)
    generation = d.seed.generation
    d.full_rehash()
    assert d.rehash_count == 1
    assert d.seed.generation > generation
    assert len(d.queue) == 0
    assert contents(d) == expected
    assert len(d) == len(expected)


# Oracle runs -----------------------------------------------------------


def run_against_oracle(d, amortized, n_ops, universe, rng):
    """Mixed ops vs a plain dict; audits every op's cost contract."""
    capacity = d.params.capacity_n
    budget = d.params.move_budget_L
    probe_cap = insert_probe_cap(budget)
    oracle = {}
    for _ in range(n_ops):
        roll = rng.randrange(100)
        key = rng.randrange(universe)
        if roll < 50:
            value = rng.getrandbits(32)
            result = d.insert_amortized(key, value) if amortized else d.insert(key, value)
            if result.outcome is Outcome.FULL:
                assert len(oracle) == capacity and key not in oracle
            else:
                assert result.outcome in (Outcome.OK, Outcome.REHASH_PERFORMED)
                oracle[key] = value
            if not amortized and result.outcome is not Outcome.REHASH_PERFORMED:
                assert result.metrics.move_count <= budget
                assert result.metrics.probe_count <= probe_cap
        elif roll < 80:
            value, metrics = d.lookup(key)
            assert value == oracle.get(key)
            assert metrics.probe_count == LOOKUP_PROBES
        else:
            result = d.delete(key)
            if key in oracle:
                assert result.outcome is Outcome.OK
                del oracle[key]
            else:
                assert result.outcome is Outcome.NOT_FOUND
            assert result.metrics.probe_count == DELETE_PROBES
    assert len(d) == len(oracle)
    assert contents(d) == oracle


@pytest.mark.parametrize("amortized", [False, True], ids=["deamortized", "amortized"])
def test_mixed_ops_match_dict_oracle(amortized):
    d = make(2048, seed_value=17, move_budget_L=3, queue_constant_C=4.0)
    rng = random.Random(0xD1C7)
    run_against_oracle(d, amortized, 100_000, 4096, rng)


def test_conservation_no_key_lost_or_duplicated():
    d = make(512, seed_value=5)
    rng = random.Random(99)
    live = set()
    for _ in range(20_000):
        key = rng.randrange(1024)
        if rng.randrange(3) < 2:
            if d.insert(key, key).outcome in (Outcome.OK, Outcome.REHASH_PERFORMED):
                live.add(key)
        else:
            d.delete(key)
            live.discard(key)
        assert len(d) == len(live)
    stored = list(k for k, _ in d.items())
    assert len(stored) == len(set(stored)) == len(live)
    assert set(stored) == live


# Determinism and seed sensitivity --------------------------------------


def test_identical_runs_produce_identical_snapshots():
    snaps = []
    for _ in range(2):
        d = make(1024, seed_value=7)
        rng = random.Random(1234)
        for _ in range(5000):
            key = rng.randrange(2048)
            op = rng.randrange(3)
            if op == 0:
                d.insert(key, key ^ 0xABCD)
            elif op == 1:
                d.lookup(key)
            else:
                d.delete(key)
        snaps.append(d.to_snapshot())
    assert snaps[0] == snaps[1]


def test_different_seeds_place_keys_differently():
    layouts = []
    for seed_value in (1, 2):
        d = make(4096, seed_value=seed_value)
        for k in range(2000):
            d.insert(k, k)
        snap = d.to_snapshot()
        layouts.append(
            (snap["occupancy"]["table0"]["bitmap_sha256"],
             snap["occupancy"]["table1"]["bitmap_sha256"])
        )
    assert layouts[0] != layouts[1]


def test_both_flavors_store_the_same_mapping():
    finals = []
    for amortized in (False, True):
        d = make(1024, seed_value=11)
        rng = random.Random(42)
        for _ in range(3000):
            key = rng.randrange(2048)
            value = rng.getrandbits(16)
            if rng.randrange(4) == 0:
                d.delete(key)
            elif amortized:
                d.insert_amortized(key, value)
            else:
                d.insert(key, value)
        finals.append(contents(d))
    assert finals[0] == finals[1]


def test_snapshot_stats_fields():
    d = make(256, seed_value=2)
    for k in range(100):
        d.insert(k, k)
    stats = d.snapshot_stats()
    assert stats["count"] == 100
    assert stats["capacity_n"] == 256
    assert stats["utilization"] == 100 / d.total_slots
    assert stats["queue_len"] == len(d.queue)
    assert stats["rehash_count"] == 0
    assert stats["max_probe_count"] <= insert_probe_cap(3)
    assert stats["max_move_count"] <= 3
    assert stats["max_queue_len"] >= stats["queue_len"]
    assert stats["seed_generation"] == 0

"""Shared test helpers."""

import random

import pytest

from deamort.pending import DuplicateKey, PendingEntry, PendingQueue, QueueOverflow


def run_queue_model(steps, threshold, key_domain, rng_seed):
    """Drive a PendingQueue and a (list, dict) reference model in lockstep.

    Every operation is mirrored and the full front-to-back key order is
    compared after each step; any divergence raises AssertionError.

    Returns:
        (overflows, duplicates): how often each rejection fired, so the
        caller can assert both paths were actually exercised.
    """
    rng = random.Random(rng_seed)
    queue = PendingQueue(capacity_threshold=threshold)
    order = []
    entries = {}
    overflows = 0
    duplicates = 0
    for step in range(steps):
        action = rng.randrange(100)
        key = rng.randrange(key_domain)
        if action < 45:
            entry = PendingEntry(key, (key, step), step % 2)
            front = action < 15
            try:
                if front:
                    queue.push_front(entry)
                else:
                    queue.push_back(entry)
            except DuplicateKey:
                duplicates += 1
                assert key in entries
            except QueueOverflow:
                overflows += 1
                assert key not in entries
                assert len(order) == threshold
            else:
                assert key not in entries
                assert len(order) < threshold
                entries[key] = entry
                if front:
                    order.insert(0, key)
                else:
                    order.append(key)
        elif action < 70:
            popped = queue.pop_front()
            if not order:
                assert popped is None
            else:
                expected = order.pop(0)
                assert popped is entries.pop(expected)
        elif action < 85:
            removed = queue.remove_key(key)
            assert removed == (key in entries)
            if removed:
                order.remove(key)
                del entries[key]
        else:
            found = queue.membership(key)
            if key in entries:
                assert found is entries[key]
            else:
                assert found is None
        assert len(queue) == len(order)
        assert [e.key for e in queue] == order
    return overflows, duplicates


@pytest.fixture
def queue_model():
    return run_queue_model

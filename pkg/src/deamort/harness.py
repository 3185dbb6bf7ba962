"""Experimental apparatus: workloads, oracle lockstep, calibration, replay.

Every trial is a pure function of its WorkloadSpec and implementation
choice: the operation sequence, hash seeds, and values all derive from
the workload's rng_seed, so identical inputs reproduce identical outcomes
bit for bit.  Trials run the chosen implementation and a plain
reference dictionary in lockstep and compare every observable result.

The clocked-adversary model: an attacker who can time individual
operations is modeled as one who reads the per-key move counts of a
pilot run, then deletes and re-inserts every pilot key in descending
cost order.  Against the amortized baseline the replayed displacement
chains tend to reproduce or exceed the pilot's worst insert; against
the de-amortized dictionary the budget caps every operation, so the
timing signal carries nothing exploitable.
"""

from __future__ import annotations

import random
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

from .dictionary import (
    CuckooDict,
    Outcome,
    Parameters,
    insert_probe_cap,
)
from .hashing import seed_from_int
from .metrics import (
    DEFAULT_SAMPLE_EVERY,
    OP_DELETE,
    OP_INSERT,
    OP_LOOKUP,
    AggregateStats,
)

KEY_UNIFORM = "uniform_random"
KEY_SEQUENTIAL = "sequential"
KEY_ADVERSARIAL = "adversarial_replay"
KEY_DISTRIBUTIONS = (KEY_UNIFORM, KEY_SEQUENTIAL, KEY_ADVERSARIAL)

IMPL_DEAMORTIZED = "deamortized"
IMPL_AMORTIZED = "amortized_baseline"
IMPLS = (IMPL_DEAMORTIZED, IMPL_AMORTIZED)

DEFAULT_EPSILON = 0.1

# Calibration sweep grids.
CALIBRATE_L_VALUES = tuple(range(1, 9))
CALIBRATE_C_VALUES = (1, 2, 4, 8)
ZERO_REHASH_TARGET = 0.95

_REPLAY_SALT = 0x5A17ED
_MISSING = object()


class MissingPilotTrace(Exception):
    """adversarial_replay needs a pilot trial run with per-key costs."""


@dataclass(frozen=True)
class WorkloadSpec:
    """Declarative description of one operation sequence.

    Attributes:
        n_ops: number of operations to run.
        op_mix: (insert, lookup, delete) percentages, summing to 100.
        key_distribution: one of KEY_DISTRIBUTIONS.
        rng_seed: drives keys, values, and op choices deterministically.
        dictionary_params: parameters for the dictionary under test.
        replay_trace: adversarial only; pilot keys in descending cost.
        replay_prelude: adversarial only; pilot keys in pilot order,
            re-inserted first (unrecorded) to rebuild the pilot state.
    """

    n_ops: int
    op_mix: tuple[int, int, int]
    key_distribution: str
    rng_seed: int
    dictionary_params: Parameters
    replay_trace: tuple[int, ...] | None = None
    replay_prelude: tuple[int, ...] | None = None

    def __post_init__(self) -> None:
        if self.n_ops < 0:
            raise ValueError("n_ops must be >= 0")
        if len(self.op_mix) != 3 or sum(self.op_mix) != 100:
            raise ValueError("op_mix must be three percentages summing to 100")
        if any(p < 0 for p in self.op_mix):
            raise ValueError("op_mix percentages must be non-negative")
        if self.key_distribution not in KEY_DISTRIBUTIONS:
            raise ValueError(f"unknown key_distribution: {self.key_distribution}")


@dataclass
class TrialOutcome:
    """Everything measured in one trial.

    stats records every operation, including REHASH_PERFORMED events
    (their count is also in stats.rehash_count); the *_excl_rehash
    maxima and cap_violations skip those events, matching the hard-cap
    contract that excludes explicit rehashes.
    """

    stats: AggregateStats
    oracle_mismatches: int
    final_utilization: float
    final_count: int
    max_move_excl_rehash: int
    max_probe_excl_rehash: int
    cap_violations: int
    final_state_digest: str
    per_key_cost: dict[int, int] | None = None

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, TrialOutcome):
            return NotImplemented
        return (
            self.stats.to_json_dict() == other.stats.to_json_dict()
            and self.oracle_mismatches == other.oracle_mismatches
            and self.final_utilization == other.final_utilization
            and self.final_count == other.final_count
            and self.max_move_excl_rehash == other.max_move_excl_rehash
            and self.max_probe_excl_rehash == other.max_probe_excl_rehash
            and self.cap_violations == other.cap_violations
            and self.final_state_digest == other.final_state_digest
            and self.per_key_cost == other.per_key_cost
        )


def trial_hash_seed(rng_seed: int, capacity_n: int):
    """Per-trial hash seed: distinct across both the seed and the size."""
    return seed_from_int(rng_seed * 2654435761 + capacity_n)


def fill_spec(
    capacity_n: int,
    rng_seed: int,
    *,
    epsilon: float = DEFAULT_EPSILON,
    move_budget_l: int = 3,
    queue_constant_c: float = 4.0,
) -> WorkloadSpec:
    """Fill-to-capacity workload: capacity_n distinct inserts.

    Sequential key ids are as good as random ones here because the hash
    family mixes them; distinctness is what fills the table exactly.
    """
    params = Parameters(
        capacity_n=capacity_n,
        epsilon=epsilon,
        move_budget_L=move_budget_l,
        queue_constant_C=queue_constant_c,
        seed=trial_hash_seed(rng_seed, capacity_n),
    )
    return WorkloadSpec(
        n_ops=capacity_n,
        op_mix=(100, 0, 0),
        key_distribution=KEY_SEQUENTIAL,
        rng_seed=rng_seed,
        dictionary_params=params,
    )


def run_trial(
    w: WorkloadSpec,
    impl: str = IMPL_DEAMORTIZED,
    *,
    record_per_key_cost: bool = False,
    sample_every: int = DEFAULT_SAMPLE_EVERY,
    fault_inject: str | None = None,
    compute_final_digest: bool = True,
) -> TrialOutcome:
    """Run one workload against an implementation and the oracle, in lockstep.

    Every lookup value, every insert/delete outcome, and the final map
    are compared against a plain dict with identical capacity and
    duplicate/delete semantics; any disagreement increments
    oracle_mismatches.

    Args:
        w: the workload.
        impl: IMPL_DEAMORTIZED or IMPL_AMORTIZED.
        record_per_key_cost: keep each new key's insert move_count
            (needed as the pilot trace for adversarial_replay).
        sample_every: queue-trace sampling stride.
        fault_inject: "oracle_mismatch" forces one bogus mismatch; test
            hook for the CLI exit-code contract, nothing else.
        compute_final_digest: hash the final state into the outcome;
            bulk experiments skip it, determinism checks keep it.

    Returns:
        TrialOutcome; a pure function of (w, impl).
    """
    if impl not in IMPLS:
        raise ValueError(f"unknown implementation: {impl}")
    params = w.dictionary_params
    d = CuckooDict(params)
    do_insert = d.insert if impl == IMPL_DEAMORTIZED else d.insert_amortized
    capacity = params.capacity_n
    move_budget = params.move_budget_L
    probe_cap = insert_probe_cap(move_budget)
    deamortized = impl == IMPL_DEAMORTIZED

    stats = AggregateStats(trace_label=f"seed={w.rng_seed}", sample_every=sample_every)
    record = stats.record
    oracle: dict[int, object] = {}
    mismatches = 0
    max_move_x = 0
    max_probe_x = 0
    cap_violations = 0
    per_key: dict[int, int] | None = {} if record_per_key_cost else None

    rng = random.Random(w.rng_seed)
    ok_outcomes = (Outcome.OK, Outcome.REHASH_PERFORMED)

    def run_insert(k: int, v: object) -> None:
        nonlocal mismatches, max_move_x, max_probe_x, cap_violations
        is_new = k not in oracle
        res = do_insert(k, v)
        m = res.metrics
        record(OP_INSERT, m)
        outcome = res.outcome
        if outcome is Outcome.REHASH_PERFORMED:
            stats.note_rehash()
            oracle[k] = v
            if per_key is not None and is_new:
                per_key[k] = m.move_count
            return
        if m.move_count > max_move_x:
            max_move_x = m.move_count
        if m.probe_count > max_probe_x:
            max_probe_x = m.probe_count
        if deamortized and (m.move_count > move_budget or m.probe_count > probe_cap):
            cap_violations += 1
        if outcome is Outcome.OK:
            oracle_full = is_new and len(oracle) == capacity
            if oracle_full:
                mismatches += 1
            else:
                oracle[k] = v
            if per_key is not None and is_new:
                per_key[k] = m.move_count
        elif outcome is Outcome.FULL:
            if not (is_new and len(oracle) == capacity):
                mismatches += 1
        else:
            mismatches += 1

    def run_lookup(k: int) -> None:
        nonlocal mismatches, max_probe_x, cap_violations
        value, m = d.lookup(k)
        record(OP_LOOKUP, m)
        if m.probe_count > max_probe_x:
            max_probe_x = m.probe_count
        if deamortized and m.probe_count != 3:
            cap_violations += 1
        if value != oracle.get(k):
            mismatches += 1

    def run_delete(k: int) -> None:
        nonlocal mismatches, max_probe_x, cap_violations
        res = d.delete(k)
        m = res.metrics
        record(OP_DELETE, m)
        if m.probe_count > max_probe_x:
            max_probe_x = m.probe_count
        if deamortized and m.probe_count != 3:
            cap_violations += 1
        present = oracle.pop(k, _MISSING) is not _MISSING
        if (res.outcome is Outcome.OK) != present:
            mismatches += 1

    if w.key_distribution == KEY_ADVERSARIAL:
        if w.replay_trace is None or w.replay_prelude is None:
            raise MissingPilotTrace("adversarial workload without a pilot trace")
        for k in w.replay_prelude:  # rebuild pilot state, unrecorded
            do_insert(k, k & 0xFFFFFFFF)
            oracle[k] = k & 0xFFFFFFFF
        replay_rng = random.Random(w.rng_seed ^ _REPLAY_SALT)
        for k in w.replay_trace:
            run_delete(k)
            run_insert(k, replay_rng.getrandbits(32))
    elif w.op_mix == (100, 0, 0) and w.key_distribution == KEY_SEQUENTIAL:
        # Fill workload: distinct ascending keys, no op-choice draws.
        getrandbits = rng.getrandbits
        for k in range(w.n_ops):
            run_insert(k, getrandbits(32))
    else:
        insert_pct, lookup_pct, _ = w.op_mix
        lookup_edge = insert_pct + lookup_pct
        sequential = w.key_distribution == KEY_SEQUENTIAL
        universe = 2 * capacity
        next_seq = 0
        randrange = rng.randrange
        getrandbits = rng.getrandbits
        for _ in range(w.n_ops):
            r = randrange(100)
            if r < insert_pct:
                if sequential:
                    k = next_seq
                    next_seq += 1
                else:
                    k = randrange(universe)
                run_insert(k, getrandbits(32))
            elif r < lookup_edge:
                k = randrange(next_seq) if sequential and next_seq else randrange(universe)
                run_lookup(k)
            else:
                k = randrange(next_seq) if sequential and next_seq else randrange(universe)
                run_delete(k)

    if d.count != len(oracle):
        mismatches += 1
    elif dict(d.items()) != oracle:
        mismatches += 1
    if fault_inject == "oracle_mismatch":
        mismatches += 1

    return TrialOutcome(
        stats=stats,
        oracle_mismatches=mismatches,
        final_utilization=d.count / d.total_slots,
        final_count=d.count,
        max_move_excl_rehash=max_move_x,
        max_probe_excl_rehash=max_probe_x,
        cap_violations=cap_violations,
        final_state_digest=d.to_snapshot()["content_sha256"] if compute_final_digest else "",
        per_key_cost=per_key,
    )


def adversarial_replay(pilot: WorkloadSpec, pilot_outcome: TrialOutcome) -> WorkloadSpec:
    """Build the clocked-adversary workload from a pilot's cost trace.

    Keys are ordered by descending pilot insert cost (ties keep pilot
    order, so a flat-cost pilot yields a plain permutation of its
    keys); the workload deletes and re-inserts each one at full load,
    where the baseline's displaced keys re-walk their expensive paths.

    Raises:
        MissingPilotTrace: the pilot was not run with
            record_per_key_cost=True.
    """
    if pilot_outcome.per_key_cost is None:
        raise MissingPilotTrace("pilot trial lacks a per-key cost trace")
    pilot_order = list(pilot_outcome.per_key_cost.keys())
    trace = sorted(pilot_order, key=lambda k: -pilot_outcome.per_key_cost[k])
    return WorkloadSpec(
        n_ops=2 * len(trace),
        op_mix=(50, 0, 50),
        key_distribution=KEY_ADVERSARIAL,
        rng_seed=pilot.rng_seed,
        dictionary_params=pilot.dictionary_params,
        replay_trace=tuple(trace),
        replay_prelude=tuple(pilot_order),
    )


# Parallel plumbing ----------------------------------------------------


def _run_tasks(fn, tasks: list, jobs: int) -> list:
    """Run fn over tasks, in order, optionally across processes."""
    if jobs <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, tasks))


def _fill_row(task: tuple) -> dict:
    """Worker: one fill trial, summarized to a small row dict."""
    n, seed_value, impl, epsilon, move_budget_l, queue_constant_c = task
    w = fill_spec(
        n,
        seed_value,
        epsilon=epsilon,
        move_budget_l=move_budget_l,
        queue_constant_c=queue_constant_c,
    )
    out = run_trial(w, impl, sample_every=4096, compute_final_digest=False)
    return {
        "n": n,
        "seed": seed_value,
        "impl": impl,
        "move_budget_L": move_budget_l,
        "queue_constant_C": queue_constant_c,
        "max_move": out.stats.overall_max_move(),
        "max_move_excl_rehash": out.max_move_excl_rehash,
        "max_probe_excl_rehash": out.max_probe_excl_rehash,
        "cap_violations": out.cap_violations,
        "rehash_count": out.stats.rehash_count,
        "max_queue_len": out.stats.max_queue_len,
        "final_utilization": out.final_utilization,
        "oracle_mismatches": out.oracle_mismatches,
    }


@dataclass
class ScalingReport:
    """Per-trial fill rows over a size ladder, plus the headline contrast."""

    n_list: list[int]
    seeds: int
    epsilon: float
    move_budget_L: int
    queue_constant_C: float
    rows: list[dict]
    summary: dict

    def to_json_dict(self) -> dict:
        return {
            "schema_version": 1,
            "n_list": self.n_list,
            "seeds": self.seeds,
            "epsilon": self.epsilon,
            "move_budget_L": self.move_budget_L,
            "queue_constant_C": self.queue_constant_C,
            "summary": self.summary,
            "rows": self.rows,
        }


def scaling_experiment(
    n_list: list[int],
    seeds: int,
    *,
    epsilon: float = DEFAULT_EPSILON,
    move_budget_l: int = 3,
    queue_constant_c: float = 4.0,
    jobs: int = 1,
) -> ScalingReport:
    """Fill both implementations at every size; contrast worst move counts.

    The baseline's per-trial max move_count grows with n (it records
    whole eviction walks); the de-amortized column stays pinned at the
    budget.  Per-seed growth counts and per-size maxima land in the
    summary; every trial's row is kept for the report.
    """
    sizes = sorted(n_list)
    tasks = [
        (n, s, impl, epsilon, move_budget_l, queue_constant_c)
        for n in sizes
        for impl in IMPLS
        for s in range(seeds)
    ]
    rows = _run_tasks(_fill_row, tasks, jobs)

    by_trial: dict[tuple[int, str, int], dict] = {
        (r["n"], r["impl"], r["seed"]): r for r in rows
    }
    n_low, n_high = sizes[0], sizes[-1]
    baseline_growth_wins = sum(
        1
        for s in range(seeds)
        if by_trial[(n_high, IMPL_AMORTIZED, s)]["max_move"]
        > by_trial[(n_low, IMPL_AMORTIZED, s)]["max_move"]
    )
    summary = {
        "baseline_max_move_by_n": {
            str(n): max(r["max_move"] for r in rows if r["n"] == n and r["impl"] == IMPL_AMORTIZED)
            for n in sizes
        },
        "deamortized_max_move_excl_rehash_by_n": {
            str(n): max(
                r["max_move_excl_rehash"]
                for r in rows
                if r["n"] == n and r["impl"] == IMPL_DEAMORTIZED
            )
            for n in sizes
        },
        "baseline_growth_wins": baseline_growth_wins,
        "baseline_growth_pair": [n_low, n_high],
        "deamortized_cap_violations": sum(
            r["cap_violations"] for r in rows if r["impl"] == IMPL_DEAMORTIZED
        ),
        "deamortized_zero_rehash_trials_by_n": {
            str(n): sum(
                1
                for r in rows
                if r["n"] == n and r["impl"] == IMPL_DEAMORTIZED and r["rehash_count"] == 0
            )
            for n in sizes
        },
        "oracle_mismatches_total": sum(r["oracle_mismatches"] for r in rows),
    }
    return ScalingReport(
        n_list=sizes,
        seeds=seeds,
        epsilon=epsilon,
        move_budget_L=move_budget_l,
        queue_constant_C=queue_constant_c,
        rows=rows,
        summary=summary,
    )


@dataclass
class CalibrationReport:
    """Sweep of (L, C) over fill workloads, with the recommended pair."""

    n_range: list[int]
    seeds: int
    epsilon: float
    zero_rehash_target: float
    rows: list[dict]
    recommended: dict | None

    def to_json_dict(self) -> dict:
        return {
            "schema_version": 1,
            "n_range": self.n_range,
            "seeds": self.seeds,
            "epsilon": self.epsilon,
            "zero_rehash_target": self.zero_rehash_target,
            "recommended": self.recommended,
            "rows": self.rows,
        }


def calibrate(
    n_range: list[int],
    seeds: int,
    *,
    epsilon: float = DEFAULT_EPSILON,
    l_values: tuple[int, ...] = CALIBRATE_L_VALUES,
    c_values: tuple[int, ...] = CALIBRATE_C_VALUES,
    zero_rehash_target: float = ZERO_REHASH_TARGET,
    early_abort: bool = True,
    jobs: int = 1,
) -> CalibrationReport:
    """Sweep (L, C), measure zero-rehash fractions, recommend a pair.

    The recommendation is the lexicographically smallest (L, C), L
    first, reaching the zero-rehash target at every size; L drives
    per-operation cost, C only queue memory.  With early_abort a combo
    is dropped at a size once the target is arithmetically out of
    reach (the dropped row keeps its partial counts, flagged aborted).
    jobs > 1 parallelizes each combo's trials and disables early abort
    inside the batch.
    """
    sizes = sorted(n_range)
    allowed_failures = int(seeds * (1.0 - zero_rehash_target))
    rows: list[dict] = []
    eligible: dict[tuple[int, int], bool] = {}
    for move_budget_l in l_values:
        for queue_constant_c in c_values:
            combo_ok = True
            for n in sizes:
                tasks = [
                    (n, s, IMPL_DEAMORTIZED, epsilon, move_budget_l, queue_constant_c)
                    for s in range(seeds)
                ]
                failures = 0
                max_queue_len = 0
                max_move = 0
                trials_run = 0
                aborted = False
                if jobs > 1:
                    trial_rows = _run_tasks(_fill_row, tasks, jobs)
                    for r in trial_rows:
                        trials_run += 1
                        failures += 1 if r["rehash_count"] > 0 else 0
                        max_queue_len = max(max_queue_len, r["max_queue_len"])
                        max_move = max(max_move, r["max_move_excl_rehash"])
                else:
                    for task in tasks:
                        r = _fill_row(task)
                        trials_run += 1
                        failures += 1 if r["rehash_count"] > 0 else 0
                        max_queue_len = max(max_queue_len, r["max_queue_len"])
                        max_move = max(max_move, r["max_move_excl_rehash"])
                        if early_abort and failures > allowed_failures:
                            aborted = True
                            break
                fraction = (trials_run - failures) / seeds
                rows.append(
                    {
                        "n": n,
                        "move_budget_L": move_budget_l,
                        "queue_constant_C": queue_constant_c,
                        "trials_run": trials_run,
                        "zero_rehash_fraction": fraction,
                        "aborted": aborted,
                        "max_queue_len": max_queue_len,
                        "max_move_excl_rehash": max_move,
                    }
                )
                if aborted or fraction < zero_rehash_target:
                    combo_ok = False
                    if early_abort:
                        break
            eligible[(move_budget_l, queue_constant_c)] = combo_ok
    winners = sorted(pair for pair, ok in eligible.items() if ok)
    recommended = None
    if winners:
        l_win, c_win = winners[0]
        recommended = {"move_budget_L": l_win, "queue_constant_C": c_win}
    return CalibrationReport(
        n_range=sizes,
        seeds=seeds,
        epsilon=epsilon,
        zero_rehash_target=zero_rehash_target,
        rows=rows,
        recommended=recommended,
    )


def _adversary_row(task: tuple) -> dict:
    """Worker: pilot fill + replay for one seed, both implementations."""
    n, seed_value, epsilon, move_budget_l, queue_constant_c = task
    pilot = fill_spec(
        n,
        seed_value,
        epsilon=epsilon,
        move_budget_l=move_budget_l,
        queue_constant_c=queue_constant_c,
    )
    row: dict = {"n": n, "seed": seed_value}
    for impl, tag in ((IMPL_AMORTIZED, "baseline"), (IMPL_DEAMORTIZED, "deamortized")):
        pilot_out = run_trial(pilot, impl, record_per_key_cost=True, sample_every=4096)
        replay = adversarial_replay(pilot, pilot_out)
        replay_out = run_trial(replay, impl, sample_every=4096)
        row[f"{tag}_pilot_max_move"] = pilot_out.stats.max_move[OP_INSERT]
        row[f"{tag}_replay_max_move"] = replay_out.stats.max_move[OP_INSERT]
        row[f"{tag}_replay_max_move_excl_rehash"] = replay_out.max_move_excl_rehash
        row[f"{tag}_cap_violations"] = pilot_out.cap_violations + replay_out.cap_violations
        row[f"{tag}_rehash_count"] = pilot_out.stats.rehash_count + replay_out.stats.rehash_count
        row[f"{tag}_oracle_mismatches"] = (
            pilot_out.oracle_mismatches + replay_out.oracle_mismatches
        )
    return row


@dataclass
class AdversaryReport:
    """Pilot vs replay worst costs per seed, for both implementations."""

    n: int
    seeds: int
    epsilon: float
    move_budget_L: int
    queue_constant_C: float
    rows: list[dict]
    summary: dict

    def to_json_dict(self) -> dict:
        return {
            "schema_version": 1,
            "n": self.n,
            "seeds": self.seeds,
            "epsilon": self.epsilon,
            "move_budget_L": self.move_budget_L,
            "queue_constant_C": self.queue_constant_C,
            "summary": self.summary,
            "rows": self.rows,
        }


def adversary_experiment(
    n: int,
    seeds: int,
    *,
    epsilon: float = DEFAULT_EPSILON,
    move_budget_l: int = 3,
    queue_constant_c: float = 4.0,
    jobs: int = 1,
) -> AdversaryReport:
    """Clocked-adversary replays over many seeds.

    Summary counts how often the baseline replay reached or beat the
    pilot's worst insert (the timing signal paying off) and verifies
    the de-amortized budget never gave the attacker anything.
    """
    tasks = [(n, s, epsilon, move_budget_l, queue_constant_c) for s in range(seeds)]
    rows = _run_tasks(_adversary_row, tasks, jobs)
    baseline_wins = sum(
        1 for r in rows if r["baseline_replay_max_move"] >= r["baseline_pilot_max_move"]
    )
    summary = {
        "baseline_replay_geq_pilot": baseline_wins,
        "deamortized_cap_violations": sum(r["deamortized_cap_violations"] for r in rows),
        "deamortized_replay_max_move_excl_rehash": max(
            r["deamortized_replay_max_move_excl_rehash"] for r in rows
        )
        if rows
        else 0,
        "oracle_mismatches_total": sum(
            r["baseline_oracle_mismatches"] + r["deamortized_oracle_mismatches"]
            for r in rows
        ),
    }
    return AdversaryReport(
        n=n,
        seeds=seeds,
        epsilon=epsilon,
        move_budget_L=move_budget_l,
        queue_constant_C=queue_constant_c,
        rows=rows,
        summary=summary,
    )

"""Comparison schedulers: ShortestFirst, FIFO, PriorityFirst, Random, HSA.

All return a :class:`~twt_sched.model.Schedule`. Airtime that a strategy
commits to a TX which then completes past its deadline is reported in
``Schedule.missed`` (and the TX counts as rejected).
"""

from __future__ import annotations

import math
from typing import Callable

import numpy as np

from .energy import normalize
from .model import (
    Instance,
    Schedule,
    ScheduleEntry,
    TransmissionRequest,
    ValidationError,
    make_schedule,
    validate_instance,
)

STRATEGIES = ("sf", "fifo", "pf", "random", "hsa")
DEFAULT_HSA_SLOT = 1024


def _check(instance: Instance) -> None:
    violations = validate_instance(instance)
    if violations:
        raise ValidationError(violations)


def _fits(t0: int, tx: TransmissionRequest, window: int) -> bool:
    end = max(t0, tx.gen_time) + tx.duration
    return end <= tx.deadline and end <= window


def _greedy(instance: Instance, key, rng: np.random.Generator,
            admit: Callable[[int, TransmissionRequest, int], bool] = _fits) -> Schedule:
    """Repeatedly take the admissible TX minimizing ``key``; residual ties at random."""
    window = instance.beacon_interval
    pending = sorted(instance.txs, key=lambda t: t.id)
    t0 = 0
    accepted: list[ScheduleEntry] = []
    missed: list[ScheduleEntry] = []
    while pending:
        cands = [tx for tx in pending if admit(t0, tx, window)]
        if not cands:
            break
        kbest = min(key(tx) for tx in cands)
        tied = [tx for tx in cands if key(tx) == kbest]
        tx = tied[int(rng.integers(len(tied)))] if len(tied) > 1 else tied[0]
        start = max(t0, tx.gen_time)
        entry = ScheduleEntry(tx.id, start, start + tx.duration)
        (accepted if entry.end_time <= tx.deadline else missed).append(entry)
        t0 = entry.end_time
        pending.remove(tx)
    return make_schedule(instance, accepted, missed)


def _paper_admit(t0: int, tx: TransmissionRequest, window: int) -> bool:
    # t0 + tau <= d and t0 + tau <= T_b, checked against t0 rather than the
    # actual start; a TX released after t0 may therefore finish late
    return t0 + tx.duration <= tx.deadline and t0 + tx.duration <= window \
        and max(t0, tx.gen_time) + tx.duration <= window


def solve_shortest_first(instance: Instance, seed: int = 0) -> Schedule:
    _check(instance)
    key = lambda tx: (tx.duration, tx.deadline, -tx.priority, tx.gen_time)
    return _greedy(instance, key, np.random.default_rng(seed))


def solve_priority_first(instance: Instance, seed: int = 0) -> Schedule:
    _check(instance)
    key = lambda tx: (-tx.priority, tx.deadline, tx.duration, tx.gen_time)
    return _greedy(instance, key, np.random.default_rng(seed), admit=_paper_admit)


def solve_random(instance: Instance, seed: int = 0) -> Schedule:
    _check(instance)
    return _greedy(instance, lambda tx: 0, np.random.default_rng(seed), admit=_paper_admit)


def solve_fifo(instance: Instance, seed: int = 0) -> Schedule:
    """Serve in generation order; drop a request whose deadline already passed.

    A request served before its deadline but unable to finish by it still
    occupies the channel and is recorded as a miss.
    """
    _check(instance)
    rng = np.random.default_rng(seed)
    window = instance.beacon_interval
    key = lambda tx: (tx.gen_time, tx.duration, -tx.priority)
    queue: list[TransmissionRequest] = []
    for _, grp in _groupby_sorted(instance.txs, key):
        grp = list(grp)
        rng.shuffle(grp)  # residual ties
        queue.extend(grp)
    t0 = 0
    accepted, missed = [], []
    for tx in queue:
        start = max(t0, tx.gen_time)
        end = start + tx.duration
        if start >= tx.deadline or end > window:
            continue  # dropped
        entry = ScheduleEntry(tx.id, start, end)
        (accepted if end <= tx.deadline else missed).append(entry)
        t0 = end
    return make_schedule(instance, accepted, missed)


def _groupby_sorted(items, key):
    items = sorted(items, key=lambda t: (key(t), t.id))
    out: list[tuple] = []
    for it in items:
        k = key(it)
        if out and out[-1][0] == k:
            out[-1][1].append(it)
        else:
            out.append((k, [it]))
    return out


def urgency_weight(p_hat: float, deadline: int, slot_start: int, slot: int) -> float:
    """Priority divided by the slots left until the deadline."""
    return p_hat / ((deadline - slot_start) / slot)


def solve_hsa(
    instance: Instance,
    slot: int = DEFAULT_HSA_SLOT,
    weight: Callable[[float, int, int, int], float] = urgency_weight,
) -> Schedule:
    """Slotted greedy max-weight scheduler.

    At each free slot boundary the released, still-completable TX of largest
    weight wins the channel and keeps consecutive slots until it completes.
    In a single-hop star every pair of links conflicts, so the max-weight
    independent set in a slot is a single TX.
    """
    _check(instance)
    if slot <= 0 or instance.beacon_interval % slot:
        raise ValueError(f"HSA slot {slot} does not divide beacon interval {instance.beacon_interval}")
    window = instance.beacon_interval
    ctx = normalize(instance) if instance.txs else None
    pending = sorted(instance.txs, key=lambda t: t.id)
    accepted = []
    k = 0
    n_slots = window // slot
    while k < n_slots and pending:
        s = k * slot
        live = [tx for tx in pending if s + tx.duration <= min(tx.deadline, window)]
        pending = live  # anything else can never complete
        ready = [tx for tx in live if tx.gen_time <= s]
        if not ready:
            k += 1
            continue
        tx = max(ready, key=lambda t: (weight(ctx.p_hat(t.priority), t.deadline, s, slot),
                                       -t.deadline, -t.id))
        accepted.append(ScheduleEntry(tx.id, s, s + tx.duration))
        pending.remove(tx)
        k += math.ceil(tx.duration / slot)
    return make_schedule(instance, accepted)

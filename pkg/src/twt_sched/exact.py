"""Exact TASP solver for small instances, plus a brute-force oracle.

Both search accepted sequences with earliest placement (each TX starts at
``max(previous end, gen time)``). When no two TXs share a STA the energy of a
sequence does not depend on idle gaps, and earliest placement loses nothing.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Optional

from .energy import EdgeCostTable, energy_cost, normalize, station_energies
from .model import (
    Instance,
    Schedule,
    ScheduleEntry,
    ValidationError,
    make_schedule,
    place_in_order,
    validate_instance,
)

DEFAULT_LIMIT_N = 14
ENUMERATE_LIMIT_N = 8
TIE_TOL = 1e-13


class InstanceTooLarge(ValueError):
    pass


@dataclass
class ExactResult:
    schedule: Schedule
    objective: float
    proven: bool
    nodes: int = 0


def _better(obj: float, seq: tuple, best_obj: float, best_seq: Optional[tuple]) -> bool:
    if best_seq is None or obj < best_obj - TIE_TOL:
        return True
    return abs(obj - best_obj) <= TIE_TOL and seq < best_seq


def solve_exact(
    instance: Instance,
    beta: float,
    limit_n: int = DEFAULT_LIMIT_N,
    prune: bool = True,
    node_limit: Optional[int] = None,
) -> ExactResult:
    """Branch and bound over accepted sequences.

    Ties between equal objectives go to the lexicographically smallest
    sequence of accepted TX ids. ``prune=False`` disables both the bound and
    the state-dominance test (used to check that pruning is sound).
    """
    violations = validate_instance(instance)
    if violations:
        raise ValidationError(violations)
    n = len(instance.txs)
    if n > limit_n:
        raise InstanceTooLarge(f"{n} TXs exceeds exact-solver limit {limit_n}")
    if n == 0:
        return ExactResult(Schedule(), 0.0, True, 0)

    table = EdgeCostTable(instance, normalize(instance))
    # visit children in ascending TX id so the first of equal optima is lexicographically smallest
    idx = sorted(range(n), key=lambda r: instance.txs[r].id)
    ids = [instance.txs[r].id for r in idx]
    g = [instance.txs[r].gen_time for r in idx]
    tau = [instance.txs[r].duration for r in idx]
    d = [min(instance.txs[r].deadline, instance.beacon_interval) for r in idx]
    w = 1.0 - beta
    rej = [beta * table.p_hat[r] for r in idx]
    min_e = [w * table.min_e_hat(r) for r in idx]
    full = (1 << n) - 1

    sta = [instance.txs[r].sta_id for r in idx]
    sta_bits: dict[int, int] = {}
    for k, s in enumerate(sta):
        sta_bits[s] = sta_bits.get(s, 0) | (1 << k)
    shared = [b for b in sta_bits.values() if b & (b - 1)]

    def timing_free(rem: int, last: int) -> bool:
        live = rem | (1 << last)
        for b in shared:
            x = b & live
            if x & (x - 1):
                return False
        return True

    best_obj = sum(rej)  # reject everything
    best_seq: tuple = ()
    seen: dict[tuple[int, int], list[tuple[float, int]]] = {}
    nodes = 0
    exhausted = False

    def dfs(mask: int, last: int, t: int, energy: float, seq: tuple) -> None:
        nonlocal best_obj, best_seq, nodes, exhausted
        nodes += 1
        if node_limit is not None and nodes > node_limit:
            exhausted = True
            return
        rem = full & ~mask
        stop = energy
        bound = energy
        ext = []
        for k in range(n):
            if not (rem >> k) & 1:
                continue
            stop += rej[k]
            start = t if t > g[k] else g[k]
            if start + tau[k] <= d[k]:
                ext.append((k, start))
                bound += rej[k] if rej[k] < min_e[k] else min_e[k]
            else:
                bound += rej[k]
        if _better(stop, seq, best_obj, best_seq):
            best_obj, best_seq = stop, seq
        if prune and bound > best_obj + TIE_TOL:
            return
        last_row = idx[last] if last >= 0 else -1
        for k, start in ext:
            end = start + tau[k]
            e = energy + w * table.e_hat(last_row, t, idx[k], start)
            nmask = mask | (1 << k)
            if prune:
                key = (nmask, k)
                loose = timing_free(full & ~nmask, k)
                front = seen.setdefault(key, [])
                if any(fe <= e + TIE_TOL and (ft == end or (loose and ft <= end)) for fe, ft in front):
                    continue
                front.append((e, end))
            dfs(nmask, k, end, e, seq + (ids[k],))

    dfs(0, -1, 0, 0.0, ())
    entries = place_in_order(instance, best_seq)
    return ExactResult(make_schedule(instance, entries), best_obj, not exhausted, nodes)


def enumerate_all(instance: Instance, beta: float) -> ExactResult:
    """Score every ordered subset of TXs; no pruning of any kind."""
    n = len(instance.txs)
    if n > ENUMERATE_LIMIT_N:
        raise InstanceTooLarge(f"{n} TXs exceeds enumeration limit {ENUMERATE_LIMIT_N}")
    if n == 0:
        return ExactResult(Schedule(), 0.0, True, 1)
    ctx = normalize(instance)
    energies = station_energies(instance)
    ts = instance.slot_duration
    txs = sorted(instance.txs, key=lambda t: t.id)
    p_hat = [ctx.p_hat(t.priority) for t in txs]
    total_p = sum(p_hat)

    best_obj, best_seq = float("inf"), None
    count = 0
    for r in range(n + 1):
        for perm in itertools.permutations(range(n), r):
            count += 1
            t, prev, energy, ok = 0, None, 0.0, True
            for k in perm:
                tx = txs[k]
                start = max(t, tx.gen_time)
                end = start + tx.duration
                if end > tx.deadline or end > instance.beacon_interval:
                    ok = False
                    break
                same = prev is not None and prev.sta_id == tx.sta_id
                energy += energy_cost(t, ScheduleEntry(tx.id, start, end), same,
                                      energies[tx.sta_id], ts)
                t, prev = end, tx
            if not ok:
                continue
            obj = beta * (total_p - sum(p_hat[k] for k in perm)) + (1 - beta) * energy / ctx.e_max
            seq = tuple(txs[k].id for k in perm)
            if _better(obj, seq, best_obj, best_seq):
                best_obj, best_seq = obj, seq
    entries = place_in_order(instance, best_seq)
    return ExactResult(make_schedule(instance, entries), best_obj, True, count)

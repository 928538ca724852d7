"""TASPER: best-path search over the TX decision graph.

Vertices are TXs ordered by latest start time (deadline minus duration); an
edge i -> j exists when j can still meet its deadline after i completes and
the two sit at most ``eta`` list positions apart. Each edge carries
``v_ij = beta * p̂_j + (1 - beta) * (1 - ê_ij)``. Paths are kept per vertex
and pruned by (reward, completion time) Pareto dominance.

Two search drivers share this graph:

``"label"`` (default)
    Paths are extended in order of completion time and every non-dominated
    neighbor is explored. A path only dominates another if it did not use up
    TXs the other could still add, or if its reward lead covers the most
    those TXs could be worth. Each vertex holds at most
    ``label_budget // n`` paths; the lowest-reward one is evicted first.
``"greedy"``
    Depth-first: each path takes the first non-dominated neighbor in
    descending edge value (then earlier completion, then TX id) and stops
    there. Fast, but on congested instances it often settles far from the
    optimum.
"""

from __future__ import annotations

import heapq
import time as _time
from bisect import bisect_left
from dataclasses import dataclass, field
from typing import Optional, Sequence

from .energy import (
    EdgeCostTable,
    NormalizationContext,
    PerSlotEnergies,
    energy_cost,
    normalize,
)
from .model import (
    Instance,
    Schedule,
    ScheduleEntry,
    SolveConfig,
    TransmissionRequest,
    ValidationError,
    make_schedule,
    place_in_order,
    validate_instance,
)


REWARD_TOL = 1e-12
DEFAULT_LABEL_BUDGET = 512
SEARCH_MODES = ("label", "greedy")


@dataclass(eq=False, slots=True)
class SearchPath:
    """A partial TX sequence. ``visited`` holds TX ids; the dummy start α is implicit."""

    visited: tuple[int, ...]
    cumulative_reward: float
    time: int
    mask: int = 0  # bit k set <=> order position k visited

    @property
    def last(self) -> Optional[int]:
        return self.visited[-1] if self.visited else None


@dataclass(frozen=True)
class OrderedTxList:
    txs: tuple[TransmissionRequest, ...]
    index: dict[int, int]  # tx id -> ind_j

    def __len__(self) -> int:
        return len(self.txs)


@dataclass
class SearchStats:
    paths_created: int = 0
    paths_pruned: int = 0
    max_slack_observed: int = 0
    wall_time_us: int = 0

    def to_dict(self) -> dict:
        return {
            "paths_created": self.paths_created,
            "paths_pruned": self.paths_pruned,
            "max_slack_observed": self.max_slack_observed,
            "wall_time_us": self.wall_time_us,
        }


@dataclass
class TasperResult:
    schedule: Schedule
    stats: SearchStats
    best_path: Optional[SearchPath] = None
    paths: list[SearchPath] = field(default_factory=list)


def latest_start_order(instance: Instance) -> OrderedTxList:
    txs = sorted(instance.txs, key=lambda t: (t.deadline - t.duration, t.deadline, t.duration, t.id))
    return OrderedTxList(tuple(txs), {t.id: k for k, t in enumerate(txs)})


def is_feasible_next(t0: int, tx: TransmissionRequest, horizon: Optional[int] = None) -> bool:
    end = max(t0, tx.gen_time) + tx.duration
    return end <= tx.deadline and (horizon is None or end <= horizon)


def find_neighbors(
    order: OrderedTxList,
    ind: int,
    eta: int,
    visited: set[int] | frozenset[int],
    now: int,
    horizon: Optional[int] = None,
) -> list[TransmissionRequest]:
    """Unvisited TXs within ``eta`` list positions of ``ind`` that can still finish in time."""
    if eta < 1:
        raise ValueError("eta must be >= 1")
    lo, hi = max(0, ind - eta), min(len(order), ind + eta + 1)
    out = []
    for k in range(lo, hi):
        tx = order.txs[k]
        if k == ind or tx.id in visited:
            continue
        if is_feasible_next(now, tx, horizon):
            out.append(tx)
    return out


def edge_value(
    prev: Optional[TransmissionRequest],
    prev_end: int,
    nxt: TransmissionRequest,
    beta: float,
    ctx: NormalizationContext,
    energies: PerSlotEnergies,
    slot_duration: int,
) -> float:
    """Value of appending ``nxt`` after ``prev`` (None for α) ending at ``prev_end``."""
    start = max(prev_end, nxt.gen_time)
    entry = ScheduleEntry(nxt.id, start, start + nxt.duration)
    same = prev is not None and prev.sta_id == nxt.sta_id
    e_hat = ctx.e_hat(energy_cost(prev_end, entry, same, energies, slot_duration))
    return beta * ctx.p_hat(nxt.priority) + (1.0 - beta) * (1.0 - e_hat)


def dominates(a: SearchPath, b: SearchPath) -> bool:
    if a.last != b.last:
        raise ValueError(f"paths end at different vertices ({a.last} vs {b.last})")
    if a.cumulative_reward >= b.cumulative_reward and a.time <= b.time:
        return a.cumulative_reward > b.cumulative_reward or a.time < b.time
    return False


def max_slack(instance: Instance) -> int:
    """Largest number of TXs simultaneously released and still completable."""
    best = 0
    horizon = instance.beacon_interval
    for t in sorted({tx.gen_time for tx in instance.txs}):
        ready = sum(1 for tx in instance.txs if tx.gen_time <= t and is_feasible_next(t, tx, horizon))
        best = max(best, ready)
    return best


def _select_best(paths: Sequence[SearchPath]) -> SearchPath:
    return min(paths, key=lambda p: (-p.cumulative_reward, p.time, -len(p.visited), p.visited))


class _Graph:
    """Per-solve arrays indexed by order position."""

    def __init__(self, instance: Instance, beta: float):
        order = latest_start_order(instance)
        table = EdgeCostTable(instance, normalize(instance))
        row = {tx.id: k for k, tx in enumerate(instance.txs)}
        n = len(order)
        self.n = n
        self.table = table
        self.ids = [tx.id for tx in order.txs]
        self.g = [tx.gen_time for tx in order.txs]
        self.d = [min(tx.deadline, instance.beacon_interval) for tx in order.txs]
        self.tau = [tx.duration for tx in order.txs]
        self.trow = [row[i] for i in self.ids]
        self.p_term = [beta * table.p_hat[r] for r in self.trow]
        self.w_e = 1.0 - beta
        # best value a TX can ever add: its least possible energy cost
        self.vmax = [self.p_term[k] + self.w_e * (1.0 - table.min_e_hat(self.trow[k])) for k in range(n)]
        by_lst = sorted((self.d[k] - self.tau[k], k) for k in range(n))
        self.lst_sorted = [x for x, _ in by_lst]
        self.suffix = [0] * (n + 1)
        for i in range(n - 1, -1, -1):
            self.suffix[i] = self.suffix[i + 1] | (1 << by_lst[i][1])

    def open_after(self, t: int) -> int:
        """Order positions still completable when the channel frees at ``t``."""
        return self.suffix[bisect_left(self.lst_sorted, t)]

    def value(self, prev_pos: int, prev_end: int, k: int, start: int) -> float:
        prev_row = self.trow[prev_pos] if prev_pos >= 0 else -1
        return self.p_term[k] + self.w_e * (1.0 - self.table.e_hat(prev_row, prev_end, self.trow[k], start))


def _greedy_search(G: _Graph, eta: int, stats: SearchStats, prune_log) -> list[SearchPath]:
    n = G.n
    ids, g, d, tau = G.ids, G.g, G.d, G.tau
    vertex_paths: list[list[SearchPath]] = [[] for _ in range(n)]
    live: dict[SearchPath, None] = {}  # insertion-ordered set of current path ends

    def find_path(path: SearchPath, j: int) -> None:
        now = path.time
        cands = []
        for k in range(max(0, j - eta), min(n, j + eta + 1)):
            if k == j or (path.mask >> k) & 1:
                continue
            start = now if now > g[k] else g[k]
            end = start + tau[k]
            if end > d[k]:
                continue
            cands.append((-G.value(j, now, k, start), end, ids[k], k))
        cands.sort()
        for neg_v, end, tid, k in cands:
            new = SearchPath(path.visited + (tid,), path.cumulative_reward - neg_v, end,
                             path.mask | (1 << k))
            stats.paths_created += 1
            at_k = vertex_paths[k]
            by = next((q for q in at_k if dominates(q, new)), None)
            if by is not None:
                stats.paths_pruned += 1
                if prune_log is not None:
                    prune_log.append((new, by))
                continue
            keep = []
            for q in at_k:
                if dominates(new, q):
                    live.pop(q, None)
                    stats.paths_pruned += 1
                    if prune_log is not None:
                        prune_log.append((q, new))
                else:
                    keep.append(q)
            keep.append(new)
            vertex_paths[k] = keep
            live.pop(path, None)
            live[new] = None
            find_path(new, k)
            return

    for j in range(n):
        if g[j] + tau[j] > d[j]:
            continue
        path = SearchPath((ids[j],), G.value(-1, 0, j, g[j]), g[j] + tau[j], 1 << j)
        stats.paths_created += 1
        vertex_paths[j].append(path)
        live[path] = None
        find_path(path, j)
    return list(live)


# label layout for the label-setting driver
_R, _T, _M, _K, _PARENT, _ALIVE = range(6)


def _label_search(G: _Graph, eta: int, cap: Optional[int], stats: SearchStats,
                  prune_log) -> list[SearchPath]:
    n = G.n
    ids, g, d, tau, vmax = G.ids, G.g, G.d, G.tau, G.vmax
    suffix, lst_sorted = G.suffix, G.lst_sorted
    labels: list[list[list]] = [[] for _ in range(n)]
    heap: list = []
    counter = 0

    def beats(a: list, b: list) -> bool:
        ar, at, am = a[_R], a[_T], a[_M]
        br, bt, bm = b[_R], b[_T], b[_M]
        if at > bt or ar < br:
            return False
        if am == bm:
            return True  # same TX set, no later and no worse: b can do nothing a cannot
        if ar == br and at == bt:
            return False
        taken = am & ~bm & suffix[bisect_left(lst_sorted, bt)]
        credit = ar - br
        while taken:
            low = taken & -taken
            credit -= vmax[low.bit_length() - 1]
            if credit < 0:
                return False
            taken ^= low
        return credit > 0 or at < bt

    def drop(victim: list, by: Optional[list]) -> None:
        victim[_ALIVE] = False
        stats.paths_pruned += 1
        if prune_log is not None:
            prune_log.append((victim, by))

    def add(lab: list) -> None:
        nonlocal counter
        stats.paths_created += 1
        at_k = labels[lab[_K]]
        if cap is not None and len(at_k) >= cap:
            worst = min(at_k, key=lambda q: (q[_R], -q[_T]))
            if (lab[_R], -lab[_T]) <= (worst[_R], -worst[_T]):
                drop(lab, None)
                return
        for q in at_k:
            if beats(q, lab):
                drop(lab, q)
                return
        keep = []
        for q in at_k:
            if beats(lab, q):
                drop(q, lab)
            else:
                keep.append(q)
        keep.append(lab)
        if cap is not None and len(keep) > cap:
            worst = min(keep, key=lambda q: (q[_R], -q[_T]))
            keep.remove(worst)
            drop(worst, None)
        labels[lab[_K]] = keep
        counter += 1
        heapq.heappush(heap, (lab[_T], counter, lab))

    for k in range(n):
        if g[k] + tau[k] <= d[k]:
            add([G.value(-1, 0, k, g[k]), g[k] + tau[k], 1 << k, k, None, True])
    while heap:
        lab = heapq.heappop(heap)[2]
        if not lab[_ALIVE]:
            continue
        r, now, mask, j = lab[_R], lab[_T], lab[_M], lab[_K]
        for k in range(max(0, j - eta), min(n, j + eta + 1)):
            if k == j or (mask >> k) & 1:
                continue
            start = now if now > g[k] else g[k]
            end = start + tau[k]
            if end > d[k]:
                continue
            add([r + G.value(j, now, k, start), end, mask | (1 << k), k, lab, True])

    out = []
    for at_k in labels:
        for lab in at_k:
            seq = []
            x = lab
            while x is not None:
                seq.append(ids[x[_K]])
                x = x[_PARENT]
            out.append(SearchPath(tuple(reversed(seq)), lab[_R], lab[_T], lab[_M]))
    return out


def solve_tasper(
    instance: Instance,
    config: SolveConfig = SolveConfig(),
    search: str = "label",
    label_budget: Optional[int] = DEFAULT_LABEL_BUDGET,
    _prune_log: Optional[list] = None,
) -> TasperResult:
    """Run TASPER on one beacon interval.

    ``label_budget`` bounds the paths held at once (split evenly over the
    vertices); ``None`` removes the bound. It has no effect on the greedy
    driver. The best path is materialized with earliest placement.
    """
    if search not in SEARCH_MODES:
        raise ValueError(f"unknown search mode {search!r}")
    if label_budget is not None and label_budget < 1:
        raise ValueError("label_budget must be >= 1")
    violations = validate_instance(instance)
    if violations:
        raise ValidationError(violations)
    t_start = _time.perf_counter_ns()
    stats = SearchStats()
    if not instance.txs:
        stats.wall_time_us = (_time.perf_counter_ns() - t_start) // 1000
        return TasperResult(Schedule(), stats)

    G = _Graph(instance, config.beta)
    if search == "greedy":
        paths = _greedy_search(G, config.eta, stats, _prune_log)
    else:
        cap = None if label_budget is None else max(1, label_budget // G.n)
        paths = _label_search(G, config.eta, cap, stats, _prune_log)
    stats.max_slack_observed = max_slack(instance)
    if not paths:
        stats.wall_time_us = (_time.perf_counter_ns() - t_start) // 1000
        return TasperResult(make_schedule(instance, []), stats)
    best = _select_best(paths)
    entries = place_in_order(instance, best.visited)
    stats.wall_time_us = (_time.perf_counter_ns() - t_start) // 1000
    return TasperResult(make_schedule(instance, entries), stats, best, paths)

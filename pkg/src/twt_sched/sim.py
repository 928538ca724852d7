"""Evaluation harness: single-interval and multi-beacon runs, power timelines, metrics."""

from __future__ import annotations

import math
import statistics
import time as _time
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .baselines import (
    solve_fifo,
    solve_hsa,
    solve_priority_first,
    solve_random,
    solve_shortest_first,
)
from .energy import per_slot_energies
from .exact import solve_exact
from .model import (
    FeasibilityError,
    Instance,
    Schedule,
    ScheduleEntry,
    SolveConfig,
    TransmissionRequest,
    check_schedule_feasibility,
    schedule_objective,
)
from .tasper import solve_tasper

STRATEGY_NAMES = ("tasper", "exact", "sf", "fifo", "pf", "random", "hsa")
RANDOM_REPLICATES = 100
STATES = ("tx", "rx", "idle", "cca", "sleep", "transition")


@dataclass(frozen=True)
class Segment:
    state: str
    start: int
    end: int


@dataclass
class PowerTimeline:
    """Power states of one STA over ``[0, horizon)``.

    Transitions are instantaneous segments carrying a fixed energy each; all
    other states draw their class power for the segment length.
    """

    sta_id: int
    segments: list[Segment]
    energy: dict[str, float]

    @property
    def total_energy(self) -> float:
        return sum(self.energy.values())

    @property
    def active(self) -> bool:
        return any(s.state == "tx" for s in self.segments)


@dataclass
class RunMetrics:
    strategy: str
    mean_rejection_cost: float
    mean_energy_per_active_sta: float  # joules
    deadline_miss_pct: float
    accepted_count: float
    wall_time_s: float
    mean_objective: Optional[float] = None
    samples: int = 1

    def to_dict(self) -> dict:
        return {
            "strategy": self.strategy,
            "mean_rejection_cost": self.mean_rejection_cost,
            "mean_energy_per_active_sta": self.mean_energy_per_active_sta,
            "deadline_miss_pct": self.deadline_miss_pct,
            "accepted_count": self.accepted_count,
            "wall_time_s": self.wall_time_s,
            "mean_objective": self.mean_objective,
            "samples": self.samples,
        }


def replicate_seeds(seed: int, count: int = RANDOM_REPLICATES) -> list[int]:
    """Independent per-replicate seeds derived from one root seed."""
    return [int(c.generate_state(1, dtype=np.uint32)[0]) for c in np.random.SeedSequence(seed).spawn(count)]


def solve(instance: Instance, strategy: str, config: SolveConfig = SolveConfig()) -> tuple[Schedule, Optional[dict]]:
    """Dispatch one solve. Returns the schedule and solver stats (TASPER/exact only)."""
    if strategy == "tasper":
        res = solve_tasper(instance, config)
        return res.schedule, res.stats.to_dict()
    if strategy == "exact":
        res = solve_exact(instance, config.beta)
        return res.schedule, {"nodes": res.nodes, "proven": res.proven}
    if strategy == "sf":
        return solve_shortest_first(instance, config.seed), None
    if strategy == "fifo":
        return solve_fifo(instance, config.seed), None
    if strategy == "pf":
        return solve_priority_first(instance, config.seed), None
    if strategy == "random":
        return solve_random(instance, config.seed), None
    if strategy == "hsa":
        return solve_hsa(instance), None
    raise ValueError(f"unknown strategy {strategy!r}; choose from {', '.join(STRATEGY_NAMES)}")


def power_timeline(instance: Instance, schedule: Schedule, horizon: Optional[int] = None,
                   ack_rx_us: int = 0) -> dict[int, PowerTimeline]:
    """Per-STA power states under TWT for a feasible schedule.

    A burst of back-to-back activity costs one transition pair. Between two
    entries of the same STA with nothing scheduled in between, the STA idles
    if idling is cheaper than a new transition pair and sleeps otherwise.
    ``ack_rx_us > 0`` adds a receive segment after each entry for the Block
    ACK (clipped to the next activity).
    """
    violations = check_schedule_feasibility(instance, schedule)
    if violations:
        raise FeasibilityError(violations)
    horizon = instance.beacon_interval if horizon is None else horizon
    busy = sorted(schedule.accepted + schedule.missed, key=lambda e: e.start_time)
    if busy and busy[-1].end_time > horizon:
        raise ValueError("schedule extends past the timeline horizon")
    txm = instance.tx_map()
    ts = instance.slot_duration
    rank = {e.tx_id: i for i, e in enumerate(busy)}
    out = {}
    for st in instance.stations:
        prof = st.profile
        e_st = per_slot_energies(prof, ts).E_st
        mine = [e for e in busy if txm[e.tx_id].sta_id == st.sta_id]
        segs: list[Segment] = []
        t = 0
        for i, e in enumerate(mine):
            prev = mine[i - 1] if i else None
            joined = (
                prev is not None
                and rank[e.tx_id] == rank[prev.tx_id] + 1
                and prof.power("idle") * (e.start_time - t) * 1e-6 <= e_st
            )
            if joined:
                if e.start_time > t:
                    segs.append(Segment("idle", t, e.start_time))
            else:
                if e.start_time > t:
                    segs.append(Segment("sleep", t, e.start_time))
                segs.append(Segment("transition", e.start_time, e.start_time))
            segs.append(Segment("tx", e.start_time, e.end_time))
            t = e.end_time
            if ack_rx_us > 0:
                nxt = mine[i + 1].start_time if i + 1 < len(mine) else horizon
                ack_end = min(t + ack_rx_us, nxt)
                if ack_end > t:
                    segs.append(Segment("rx", t, ack_end))
                    t = ack_end
        if t < horizon:
            segs.append(Segment("sleep", t, horizon))
        out[st.sta_id] = PowerTimeline(st.sta_id, segs, _segment_energy(segs, prof, e_st))
    return out


def _segment_energy(segs: Sequence[Segment], prof, e_st: float) -> dict[str, float]:
    energy = {s: 0.0 for s in STATES}
    for s in segs:
        if s.state == "transition":
            energy["transition"] += e_st
        else:
            energy[s.state] += prof.power(s.state) * (s.end - s.start) * 1e-6
    return energy


def no_twt_timeline(instance: Instance, schedule: Schedule, horizon: Optional[int] = None) -> dict[int, PowerTimeline]:
    """Reference without TWT: each STA stays awake, receiving while others transmit."""
    horizon = instance.beacon_interval if horizon is None else horizon
    txm = instance.tx_map()
    busy = sorted(schedule.accepted + schedule.missed, key=lambda e: e.start_time)
    out = {}
    for st in instance.stations:
        segs: list[Segment] = []
        t = 0
        for e in busy:
            if e.start_time > t:
                segs.append(Segment("idle", t, e.start_time))
            state = "tx" if txm[e.tx_id].sta_id == st.sta_id else "rx"
            segs.append(Segment(state, e.start_time, e.end_time))
            t = e.end_time
        if t < horizon:
            segs.append(Segment("idle", t, horizon))
        out[st.sta_id] = PowerTimeline(st.sta_id, segs, _segment_energy(segs, st.profile, 0.0))
    return out


def energy_per_active_sta(timelines: dict[int, PowerTimeline]) -> float:
    """Mean total energy over STAs that transmitted at least once (0 if none did)."""
    active = [tl.total_energy for tl in timelines.values() if tl.active]
    return sum(active) / len(active) if active else 0.0


def _rejection(instance: Instance, schedule: Schedule, p_max: float) -> float:
    txm = instance.tx_map()
    return sum(txm[t].priority for t in sorted(schedule.rejected)) / p_max


def evaluate(instance: Instance, schedule: Schedule, beta: float) -> dict:
    """Per-schedule metrics for a single beacon interval."""
    n = len(instance.txs)
    p_max = max((t.priority for t in instance.txs), default=1)
    tls = power_timeline(instance, schedule)
    return {
        "rejection_cost": _rejection(instance, schedule, p_max),
        "energy_per_active_sta": energy_per_active_sta(tls),
        "deadline_miss_pct": 100.0 * len(schedule.missed) / n if n else 0.0,
        "accepted": len(schedule.accepted),
        "missed": len(schedule.missed),
        "objective": schedule_objective(instance, schedule, beta),
    }


def run_single(instance: Instance, strategy: str, config: SolveConfig = SolveConfig()
               ) -> tuple[Schedule, dict[int, PowerTimeline], RunMetrics]:
    """Solve one interval and score it. Random is replicated over 100 derived seeds.

    For Random the returned schedule and timelines are those of the first
    replicate; the metrics average all replicates.
    """
    seeds = replicate_seeds(config.seed) if strategy == "random" else [config.seed]
    rows = []
    first = None
    wall = 0.0
    for s in seeds:
        cfg = SolveConfig(config.beta, config.eta, s)
        t0 = _time.perf_counter()
        sched, _ = solve(instance, strategy, cfg)
        wall += _time.perf_counter() - t0
        rows.append(evaluate(instance, sched, config.beta))
        if first is None:
            first = sched
    k = len(rows)
    metrics = RunMetrics(
        strategy=strategy,
        mean_rejection_cost=sum(r["rejection_cost"] for r in rows) / k,
        mean_energy_per_active_sta=sum(r["energy_per_active_sta"] for r in rows) / k,
        deadline_miss_pct=sum(r["deadline_miss_pct"] for r in rows) / k,
        accepted_count=sum(r["accepted"] for r in rows) / k,
        wall_time_s=wall / k,
        mean_objective=sum(r["objective"] for r in rows) / k,
        samples=k,
    )
    return first, power_timeline(instance, first), metrics


@dataclass
class BeaconRecord:
    """What happened in one interval of a concatenated run (absolute times)."""

    index: int
    pending: list[int]
    accepted: list[ScheduleEntry]
    missed: list[ScheduleEntry]
    expired: list[int]


@dataclass
class ConcatenatedRun:
    metrics: RunMetrics
    beacons: list[BeaconRecord] = field(default_factory=list)
    rejected: set[int] = field(default_factory=set)
    txs: dict[int, TransmissionRequest] = field(default_factory=dict)  # absolute times


def run_concatenated(stream: Sequence[Instance], strategy: str, horizon: int,
                     config: SolveConfig = SolveConfig(), carry_over: bool = True) -> ConcatenatedRun:
    """Back-to-back beacon intervals with carry-over of unscheduled TXs.

    Interval ``k`` covers ``[k*T_b, (k+1)*T_b)``. Its pending set is the new
    TXs of ``stream[k]`` plus earlier unscheduled TXs that can still meet
    their absolute deadline. A TX is rejected when it expires, when it was
    served but missed its deadline, or when the run ends with it pending.
    Rejection costs use the largest priority in the stream, and
    ``mean_rejection_cost`` is per interval. With ``carry_over=False``
    every TX unscheduled at the end of its interval is rejected.
    """
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    if horizon > len(stream):
        raise ValueError(f"stream has {len(stream)} intervals, horizon is {horizon}")
    tb = stream[0].beacon_interval
    all_txs: dict[int, TransmissionRequest] = {}
    for k in range(horizon):
        for tx in stream[k].txs:
            all_txs[tx.id] = TransmissionRequest(tx.id, tx.sta_id, tx.bytes, tx.gen_time + k * tb,
                                                 tx.deadline + k * tb, tx.duration, tx.priority)
    p_max = max((t.priority for t in all_txs.values()), default=1)
    stations = stream[0].stations
    energy_by_sta: dict[int, float] = {s.sta_id: 0.0 for s in stations}
    active: set[int] = set()
    carried: list[int] = []
    rejected: set[int] = set()
    beacons = []
    n_missed = 0
    n_accepted = 0
    wall = 0.0
    for k in range(horizon):
        base = k * tb
        pending, expired = [], []
        for tid in carried + [t.id for t in stream[k].txs]:
            tx = all_txs[tid]
            if max(base, tx.gen_time) + tx.duration > tx.deadline:
                expired.append(tid)
            else:
                pending.append(tid)
        rejected.update(expired)
        rel = [
            TransmissionRequest(tid, all_txs[tid].sta_id, all_txs[tid].bytes,
                                max(0, all_txs[tid].gen_time - base), all_txs[tid].deadline - base,
                                all_txs[tid].duration, all_txs[tid].priority)
            for tid in pending
        ]
        reach = max([tb] + [t.deadline for t in rel])
        inst = Instance(tb, stream[k].n_slots, stations, tuple(rel), reach if reach > tb else None)
        t0 = _time.perf_counter()
        if rel:
            sched, _ = solve(inst, strategy, config)
        else:
            sched = Schedule()
        wall += _time.perf_counter() - t0
        for tl in power_timeline(inst, sched).values():
            energy_by_sta[tl.sta_id] += tl.total_energy
            if tl.active:
                active.add(tl.sta_id)
        done = {e.tx_id for e in sched.accepted} | {e.tx_id for e in sched.missed}
        rejected.update(e.tx_id for e in sched.missed)
        n_missed += len(sched.missed)
        n_accepted += len(sched.accepted)
        left = [tid for tid in pending if tid not in done]
        if carry_over:
            carried = left
        else:
            rejected.update(left)
            carried = []
        shift = lambda es: [ScheduleEntry(e.tx_id, e.start_time + base, e.end_time + base) for e in es]
        beacons.append(BeaconRecord(k, pending, shift(sched.accepted), shift(sched.missed), expired))
    rejected.update(carried)
    total = len(all_txs)
    metrics = RunMetrics(
        strategy=strategy,
        mean_rejection_cost=sum(all_txs[t].priority for t in sorted(rejected)) / p_max / horizon,
        mean_energy_per_active_sta=(sum(energy_by_sta[s] for s in sorted(active)) / len(active)) if active else 0.0,
        deadline_miss_pct=100.0 * n_missed / total if total else 0.0,
        accepted_count=float(n_accepted),
        wall_time_s=wall,
        samples=horizon,
    )
    return ConcatenatedRun(metrics, beacons, rejected, all_txs)


def aggregate(samples: Sequence[float]) -> tuple[float, float]:
    """Sample mean and normal-approximation 95% half-width."""
    xs = [float(x) for x in samples]
    if len(xs) < 2:
        raise ValueError("aggregate needs at least 2 samples")
    return statistics.fmean(xs), 1.96 * statistics.stdev(xs) / math.sqrt(len(xs))

"""Domain types for TASP instances and schedules, plus the shared checks.

All times are integer microseconds measured from the start of the beacon
interval. Intervals are half-open, so back-to-back entries are feasible.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Optional

from .energy import EnergyProfile, energy_cost, normalize, station_energies

DEFAULT_BEACON_INTERVAL = 102_400
DEFAULT_N_SLOTS = 100


class FeasibilityError(ValueError):
    """A schedule violates the TASP constraints."""

    def __init__(self, violations: list["Violation"]):
        self.violations = violations
        super().__init__("; ".join(str(v) for v in violations[:5]))


class ValidationError(ValueError):
    """An instance violates its structural invariants."""

    def __init__(self, violations: list["Violation"]):
        self.violations = violations
        super().__init__("; ".join(str(v) for v in violations[:5]))


@dataclass(frozen=True)
class Violation:
    kind: str
    tx_id: Optional[int] = None
    detail: str = ""

    def __str__(self) -> str:
        where = f"tx {self.tx_id}: " if self.tx_id is not None else ""
        return f"{where}{self.kind}" + (f" ({self.detail})" if self.detail else "")


@dataclass(frozen=True)
class TransmissionRequest:
    id: int
    sta_id: int
    bytes: int
    gen_time: int
    deadline: int
    duration: int
    priority: int

    @property
    def latest_start(self) -> int:
        return self.deadline - self.duration


@dataclass(frozen=True)
class Station:
    sta_id: int
    profile: EnergyProfile
    link_rate: float  # bit/s


@dataclass(frozen=True)
class Instance:
    beacon_interval: int = DEFAULT_BEACON_INTERVAL
    n_slots: int = DEFAULT_N_SLOTS
    stations: tuple[Station, ...] = ()
    txs: tuple[TransmissionRequest, ...] = ()
    # deadlines may run past the beacon interval in the concatenated form
    horizon: Optional[int] = None

    @property
    def slot_duration(self) -> int:
        return self.beacon_interval // self.n_slots

    @property
    def deadline_horizon(self) -> int:
        return self.horizon if self.horizon is not None else self.beacon_interval

    def tx(self, tx_id: int) -> TransmissionRequest:
        for t in self.txs:
            if t.id == tx_id:
                return t
        raise KeyError(tx_id)

    def tx_map(self) -> dict[int, TransmissionRequest]:
        return {t.id: t for t in self.txs}

    def station_map(self) -> dict[int, Station]:
        return {s.sta_id: s for s in self.stations}

    def with_txs(self, txs: Iterable[TransmissionRequest]) -> "Instance":
        return Instance(self.beacon_interval, self.n_slots, self.stations, tuple(txs), self.horizon)


@dataclass(frozen=True)
class ScheduleEntry:
    tx_id: int
    start_time: int
    end_time: int


@dataclass(frozen=True)
class Schedule:
    accepted: tuple[ScheduleEntry, ...] = ()
    rejected: frozenset[int] = frozenset()
    # airtime committed to TXs that then completed past their deadline;
    # these ids are also in ``rejected``
    missed: tuple[ScheduleEntry, ...] = ()

    @property
    def accepted_ids(self) -> list[int]:
        return [e.tx_id for e in self.accepted]


@dataclass(frozen=True)
class SolveConfig:
    beta: float = 0.9
    eta: int = 9
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.beta <= 1.0:
            raise ValueError(f"beta must lie in [0, 1], got {self.beta}")
        if self.eta < 1:
            raise ValueError(f"eta must be >= 1, got {self.eta}")


def place_in_order(instance: Instance, tx_ids: Iterable[int]) -> list[ScheduleEntry]:
    """Earliest placement of a TX sequence: start = max(previous end, gen time)."""
    txm = instance.tx_map()
    t = 0
    out = []
    for tid in tx_ids:
        tx = txm[tid]
        start = max(t, tx.gen_time)
        t = start + tx.duration
        out.append(ScheduleEntry(tid, start, t))
    return out


def make_schedule(instance: Instance, entries: Iterable[ScheduleEntry],
                  missed: Iterable[ScheduleEntry] = ()) -> Schedule:
    entries = tuple(entries)
    missed = tuple(missed)
    taken = {e.tx_id for e in entries}
    rejected = frozenset(t.id for t in instance.txs if t.id not in taken)
    return Schedule(accepted=entries, rejected=rejected, missed=missed)


def validate_instance(instance: Instance) -> list[Violation]:
    out: list[Violation] = []
    if instance.n_slots <= 0 or instance.beacon_interval <= 0:
        out.append(Violation("nonpositive timing", detail=f"T_b={instance.beacon_interval}, D={instance.n_slots}"))
    elif instance.slot_duration * instance.n_slots != instance.beacon_interval:
        out.append(Violation("T_s * D != T_b", detail=f"{instance.beacon_interval}/{instance.n_slots}"))
    if instance.horizon is not None and instance.horizon < instance.beacon_interval:
        out.append(Violation("horizon shorter than beacon interval"))
    stas = {s.sta_id for s in instance.stations}
    if len(stas) != len(instance.stations):
        out.append(Violation("duplicate station id"))
    seen: set[int] = set()
    limit = instance.deadline_horizon
    for tx in instance.txs:
        if tx.id in seen:
            out.append(Violation("duplicate tx id", tx.id))
        seen.add(tx.id)
        if tx.sta_id not in stas:
            out.append(Violation("unknown station", tx.id, f"sta {tx.sta_id}"))
        if tx.duration <= 0:
            out.append(Violation("nonpositive duration", tx.id))
        if tx.priority < 1:
            out.append(Violation("priority below 1", tx.id))
        if tx.gen_time < 0:
            out.append(Violation("negative gen time", tx.id))
        if tx.gen_time + tx.duration > tx.deadline:
            out.append(Violation("gen+dur > deadline", tx.id,
                                 f"{tx.gen_time}+{tx.duration} > {tx.deadline}"))
        if tx.deadline > limit:
            out.append(Violation("deadline beyond horizon", tx.id, f"{tx.deadline} > {limit}"))
        for name in ("gen_time", "deadline", "duration", "priority", "bytes"):
            if not isinstance(getattr(tx, name), int):
                out.append(Violation("non-integer field", tx.id, name))
    return out


def check_schedule_feasibility(instance: Instance, schedule: Schedule) -> list[Violation]:
    out: list[Violation] = []
    txm = instance.tx_map()
    accepted_ids = [e.tx_id for e in schedule.accepted]
    counts: dict[int, int] = {}
    for tid in accepted_ids:
        counts[tid] = counts.get(tid, 0) + 1
    for tid, c in counts.items():
        if c > 1:
            out.append(Violation("accepted more than once", tid))

    for e in schedule.accepted:
        tx = txm.get(e.tx_id)
        if tx is None:
            out.append(Violation("unknown tx", e.tx_id))
            continue
        if e.end_time - e.start_time != tx.duration:
            out.append(Violation("entry length != duration", e.tx_id))
        if e.end_time < tx.gen_time + tx.duration:
            out.append(Violation("ends before gen+dur", e.tx_id))
        if e.end_time > tx.deadline:
            out.append(Violation("deadline exceeded", e.tx_id, f"{e.end_time} > {tx.deadline}"))
        if e.end_time > instance.beacon_interval:
            out.append(Violation("beyond beacon interval", e.tx_id))
    for e in schedule.missed:
        tx = txm.get(e.tx_id)
        if tx is None:
            out.append(Violation("unknown tx", e.tx_id))
            continue
        if e.tx_id not in schedule.rejected:
            out.append(Violation("missed tx not rejected", e.tx_id))
        if e.start_time < tx.gen_time or e.end_time - e.start_time != tx.duration:
            out.append(Violation("bad missed entry", e.tx_id))
        if e.end_time > instance.beacon_interval:
            out.append(Violation("beyond beacon interval", e.tx_id))

    if any(a.start_time > b.start_time for a, b in zip(schedule.accepted, schedule.accepted[1:])):
        out.append(Violation("entries not sorted by start time"))
    busy = sorted(schedule.accepted + schedule.missed, key=lambda e: (e.start_time, e.end_time))
    for a, b in zip(busy, busy[1:]):
        if b.start_time < a.end_time:
            out.append(Violation("overlap", b.tx_id, f"with tx {a.tx_id}"))

    overlap = set(counts) & set(schedule.rejected)
    for tid in sorted(overlap):
        out.append(Violation("both accepted and rejected", tid))
    covered = set(counts) | set(schedule.rejected)
    for tid in sorted(set(txm) - covered):
        out.append(Violation("tx neither accepted nor rejected", tid))
    for tid in sorted(covered - set(txm)):
        out.append(Violation("unknown tx", tid))
    return out


def rejection_cost(instance: Instance, schedule: Schedule) -> float:
    if not instance.txs:
        return 0.0
    ctx = normalize(instance)
    txm = instance.tx_map()
    return sum(ctx.p_hat(txm[tid].priority) for tid in sorted(schedule.rejected))


def energy_term(instance: Instance, schedule: Schedule) -> float:
    """Sum of normalized ê_ij along the accepted sequence (α first)."""
    if not schedule.accepted:
        return 0.0
    ctx = normalize(instance)
    energies = station_energies(instance)
    txm = instance.tx_map()
    total = 0.0
    prev_end, prev_sta = 0, None
    for e in schedule.accepted:
        sta = txm[e.tx_id].sta_id
        total += energy_cost(prev_end, e, sta == prev_sta, energies[sta], instance.slot_duration)
        prev_end, prev_sta = e.end_time, sta
    return total / ctx.e_max


def schedule_objective(instance: Instance, schedule: Schedule, beta: float) -> float:
    violations = check_schedule_feasibility(instance, schedule)
    if violations:
        raise FeasibilityError(violations)
    return beta * rejection_cost(instance, schedule) + (1.0 - beta) * energy_term(instance, schedule)

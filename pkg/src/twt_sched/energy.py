"""Per-state energy figures, order-dependent TX energy cost, normalization.

Currents are in mA, voltage in V, times in integer microseconds. Energies are
joules. Slot-denominated quantities (``E_tx`` etc.) are per slot of length
``T_s``; fractional slots are allowed.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import TYPE_CHECKING, Mapping, Optional

if TYPE_CHECKING:
    from .model import Instance, ScheduleEntry

DEFAULT_VOLTAGE = 3.3


@dataclass(frozen=True)
class EnergyProfile:
    """Power-state currents of one STA class."""

    class_id: int
    current_idle: float
    current_cca: float
    current_rx: float
    current_tx: float
    current_sleep: float
    voltage: float = DEFAULT_VOLTAGE
    # joules per sleep<->active transition pair; None -> one idle slot
    transition_energy: Optional[float] = None

    def power(self, state: str) -> float:
        """Power draw in watts for a timeline state name."""
        current = {
            "tx": self.current_tx,
            "rx": self.current_rx,
            "idle": self.current_idle,
            "cca": self.current_cca,
            "sleep": self.current_sleep,
        }[state]
        return current * 1e-3 * self.voltage


@dataclass(frozen=True)
class PerSlotEnergies:
    E_tx: float
    E_id: float
    E_sleep: float
    E_st: float


@dataclass(frozen=True)
class NormalizationContext:
    """Per-instance scale factors mapping priorities and energies to [0, 1]."""

    p_max: float
    e_max: float

    def p_hat(self, priority: float) -> float:
        return priority / self.p_max

    def e_hat(self, energy: float) -> float:
        return energy / self.e_max


def _profiles_from_table(table: Mapping) -> dict[int, EnergyProfile]:
    voltage = float(table.get("voltage", DEFAULT_VOLTAGE))
    out = {}
    for key, row in table["classes"].items():
        cid = int(key)
        out[cid] = EnergyProfile(
            class_id=cid,
            current_idle=float(row["idle"]),
            current_cca=float(row["cca"]),
            current_rx=float(row["rx"]),
            current_tx=float(row["tx"]),
            current_sleep=float(row["sleep"]),
            voltage=float(row.get("voltage", voltage)),
            transition_energy=row.get("transition_energy"),
        )
    return out


def load_energy_classes(path: str | Path | None = None) -> dict[int, EnergyProfile]:
    """Load STA energy classes from JSON (``class_id -> five currents``).

    Without a path the bundled four-class table is returned.
    """
    if path is None:
        text = resources.files("twt_sched").joinpath("data/energy_classes.json").read_text()
    else:
        text = Path(path).read_text()
    return _profiles_from_table(json.loads(text))


ENERGY_CLASSES: dict[int, EnergyProfile] = load_energy_classes()


def per_slot_energies(profile: EnergyProfile, slot_duration: int) -> PerSlotEnergies:
    if slot_duration <= 0:
        raise ValueError(f"slot duration must be positive, got {slot_duration}")
    ts = slot_duration * 1e-6
    e_tx = profile.power("tx") * ts
    e_id = profile.power("idle") * ts
    e_sleep = profile.power("sleep") * ts
    e_st = e_id if profile.transition_energy is None else float(profile.transition_energy)
    return PerSlotEnergies(E_tx=e_tx, E_id=e_id, E_sleep=e_sleep, E_st=e_st)


def energy_cost(
    prev_end: int,
    entry: "ScheduleEntry",
    same_sta: bool,
    energies: PerSlotEnergies,
    slot_duration: int,
) -> float:
    """Energy (J) of running ``entry`` right after a TX that ended at ``prev_end``.

    transmit energy, plus either a full sleep->tx->sleep transition (different
    predecessor STA) or the cheaper of idling through the gap and a transition
    (same STA).
    """
    gap = entry.start_time - prev_end
    if gap < 0:
        raise ValueError(f"entry starts {-gap} us before predecessor ends")
    tau_slots = (entry.end_time - entry.start_time) / slot_duration
    cost = tau_slots * energies.E_tx
    if same_sta:
        cost += min(energies.E_id * (gap / slot_duration), energies.E_st)
    else:
        cost += energies.E_st
    return cost


def energy_upper_bound(duration: int, energies: PerSlotEnergies, slot_duration: int) -> float:
    """Largest possible e_ij for a TX: one transition pair plus transmit energy."""
    return energies.E_st + (duration / slot_duration) * energies.E_tx


def station_energies(instance: "Instance") -> dict[int, PerSlotEnergies]:
    return {
        st.sta_id: per_slot_energies(st.profile, instance.slot_duration)
        for st in instance.stations
    }


def normalize(instance: "Instance") -> NormalizationContext:
    if not instance.txs:
        raise ValueError("cannot normalize an instance without transmissions")
    energies = station_energies(instance)
    p_max = max(tx.priority for tx in instance.txs)
    e_max = max(
        energy_upper_bound(tx.duration, energies[tx.sta_id], instance.slot_duration)
        for tx in instance.txs
    )
    return NormalizationContext(p_max=float(p_max), e_max=e_max)


class EdgeCostTable:
    """Normalized per-TX coefficients for fast ê_ij evaluation inside solvers.

    Indexed by position in ``instance.txs``. ``e_hat(i, prev_end, j, start)``
    matches ``energy_cost(...) / e_max``; ``i = -1`` denotes the dummy start.
    """

    def __init__(self, instance: "Instance", ctx: Optional[NormalizationContext] = None):
        self.ctx = ctx if ctx is not None else normalize(instance)
        energies = station_energies(instance)
        ts = instance.slot_duration
        e_max = self.ctx.e_max
        txs = instance.txs
        self.sta = [tx.sta_id for tx in txs]
        self.p_hat = [tx.priority / self.ctx.p_max for tx in txs]
        self.tx_part = [(tx.duration / ts) * energies[tx.sta_id].E_tx / e_max for tx in txs]
        self.st_part = [energies[tx.sta_id].E_st / e_max for tx in txs]
        self.idle_per_us = [energies[tx.sta_id].E_id / ts / e_max for tx in txs]

    def e_hat(self, i: int, prev_end: int, j: int, start: int) -> float:
        if i >= 0 and self.sta[i] == self.sta[j]:
            idle = self.idle_per_us[j] * (start - prev_end)
            st = self.st_part[j]
            return self.tx_part[j] + (idle if idle < st else st)
        return self.tx_part[j] + self.st_part[j]

    def min_e_hat(self, j: int) -> float:
        """Lower bound on ê for TX j over every predecessor and placement."""
        return self.tx_part[j]

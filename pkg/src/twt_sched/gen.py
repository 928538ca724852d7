"""Instance generation: OAS-style release/deadline sampling, frame sizes, MCS mapping."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np

from .energy import ENERGY_CLASSES, EnergyProfile
from .model import (
    DEFAULT_BEACON_INTERVAL,
    DEFAULT_N_SLOTS,
    Instance,
    Station,
    TransmissionRequest,
)

MIN_FRAME_BYTES = 1600
MAX_FRAME_BYTES = 64500
FRAGMENT_BYTES = 2304


@dataclass(frozen=True)
class McsTable:
    entries: tuple[tuple[int, float], ...]  # (mcs index, PHY rate in bit/s)

    def __post_init__(self):
        rates = [r for _, r in self.entries]
        if any(b <= a for a, b in zip(rates, rates[1:])):
            raise ValueError("MCS rates must be strictly increasing")

    @classmethod
    def load(cls, path: str | Path | None = None) -> "McsTable":
        if path is None:
            text = resources.files("twt_sched").joinpath("data/mcs_he20_siso.json").read_text()
        else:
            text = Path(path).read_text()
        return cls(tuple((int(m), float(r)) for m, r in json.loads(text)["rates"]))

    def rate(self, mcs: int) -> float:
        return dict(self.entries)[mcs]


HE20_SISO = McsTable.load()


def airtime_us(nbytes: int, rate: float) -> int:
    """Transmission time in whole microseconds (rounded up)."""
    return math.ceil(nbytes * 8 * 1e6 / rate - 1e-9)


def mcs_for_txop(nbytes: int, target_duration: float, table: McsTable = HE20_SISO) -> tuple[int, int]:
    """MCS whose airtime for ``nbytes`` best approximates ``target_duration``; ties go low."""
    if nbytes <= 0:
        raise ValueError("bytes must be positive")
    if not table.entries:
        raise ValueError("empty MCS table")
    best = None
    for mcs, rate in table.entries:
        err = abs(nbytes * 8 * 1e6 / rate - target_duration)
        if best is None or err < best[0]:
            best = (err, mcs, rate)
    _, mcs, rate = best
    return mcs, airtime_us(nbytes, rate)


def fragment(nbytes: int, mtu: int = FRAGMENT_BYTES) -> list[int]:
    if nbytes < 1:
        raise ValueError("bytes must be >= 1")
    full, rest = divmod(nbytes, mtu)
    return [mtu] * full + ([rest] if rest else [])


def log_uniform_bytes(rng: np.random.Generator, lo: int = MIN_FRAME_BYTES, hi: int = MAX_FRAME_BYTES) -> int:
    return int(min(hi, max(lo, round(math.exp(rng.uniform(math.log(lo), math.log(hi)))))))


def uniform_priority(rng: np.random.Generator) -> int:
    return int(rng.integers(1, 11))


@dataclass(frozen=True)
class GenParams:
    n_stas: int = 16
    tau_factor: float = 0.2
    r_factor: float = 0.3
    seed: int = 0
    beacon_interval: int = DEFAULT_BEACON_INTERVAL
    n_slots: int = DEFAULT_N_SLOTS
    # requested TXOP length before MCS mapping, uniform over this range (us)
    target_duration: tuple[int, int] = (1000, 10000)
    frame_size_dist: Callable[[np.random.Generator], int] = log_uniform_bytes
    priority_dist: Callable[[np.random.Generator], int] = uniform_priority
    class_mix: tuple[float, float, float, float] = (0.25, 0.25, 0.25, 0.25)
    energy_classes: Optional[dict] = None
    mcs_table: McsTable = HE20_SISO
    # deadlines capped at the beacon interval; False for the concatenated form
    cap_deadline: bool = True
    tx_id_offset: int = 0
    sta_id_offset: int = 0

    def __post_init__(self):
        for name in ("tau_factor", "r_factor"):
            v = getattr(self, name)
            if not 0.0 < v < 1.0:
                raise ValueError(f"{name} must lie in (0, 1), got {v}")
        if self.n_stas < 0:
            raise ValueError("n_stas must be >= 0")


def generate_instance(params: GenParams) -> Instance:
    """One TX per STA.

    g ~ U[0, tau_factor * T_b], d = g + tau + U[0, r_factor * T_b] (capped at
    T_b unless ``cap_deadline`` is off); bytes drawn from ``frame_size_dist``,
    then the MCS whose airtime is closest to a requested TXOP length fixes tau.
    """
    rng = np.random.default_rng(params.seed)
    classes = params.energy_classes or ENERGY_CLASSES
    class_ids = sorted(classes)
    mix = np.asarray(params.class_mix, dtype=float)
    mix = mix / mix.sum()
    tb = params.beacon_interval
    stations, txs = [], []
    for k in range(params.n_stas):
        sta_id = params.sta_id_offset + k + 1
        cls = class_ids[int(rng.choice(len(class_ids), p=mix))]
        nbytes = params.frame_size_dist(rng)
        target = rng.uniform(*params.target_duration)
        mcs, tau = mcs_for_txop(nbytes, target, params.mcs_table)
        if tau > tb:
            raise ValueError(f"TX duration {tau} us exceeds beacon interval {tb} us")
        g = int(rng.integers(0, int(params.tau_factor * tb) + 1))
        slack = int(rng.integers(0, int(params.r_factor * tb) + 1))
        d = g + tau + slack
        if params.cap_deadline:
            d = min(d, tb)
            if g + tau > tb:
                raise ValueError("generated TX cannot fit in the beacon interval")
        prio = params.priority_dist(rng)
        stations.append(Station(sta_id, classes[cls], params.mcs_table.rate(mcs)))
        txs.append(TransmissionRequest(params.tx_id_offset + k, sta_id, nbytes, g, d, tau, prio))
    horizon = None if params.cap_deadline else max([tb] + [t.deadline for t in txs])
    return Instance(tb, params.n_slots, tuple(stations), tuple(txs), horizon)


# (gen, deadline, duration) in us for STAs 1..10; long TXs at STA 2 (tight) and 5 (loose)
_TESTBED_WINDOWS = (
    (0, 5000, 2500),
    (0, 12500, 10000),
    (0, 20000, 2500),
    (5000, 25000, 2500),
    (5000, 45000, 10000),
    (10000, 40000, 2500),
    (10000, 45000, 2500),
    (15000, 50000, 2500),
    (15000, 55000, 2500),
    (20000, 60000, 2500),
)
TESTBED_FRAME_BYTES = 1272


def testbed_instance(windows: Sequence[tuple[int, int, int]] = _TESTBED_WINDOWS,
                     energy_class: int = 1) -> Instance:
    """Ten-STA instance: priority 10 - m (at least 1), MCS0, 1,272-byte frames.

    Each TX carries ``(2/5) * tau_ms`` frames. The default windows can be
    overridden.
    """
    rate = HE20_SISO.rate(0)
    profile: EnergyProfile = ENERGY_CLASSES[energy_class]
    stations, txs = [], []
    for m, (g, d, tau) in enumerate(windows, start=1):
        frames = max(1, round(0.4 * tau / 1000))
        stations.append(Station(m, profile, rate))
        txs.append(TransmissionRequest(m, m, frames * TESTBED_FRAME_BYTES, g, d, tau, max(1, 10 - m)))
    return Instance(DEFAULT_BEACON_INTERVAL, DEFAULT_N_SLOTS, tuple(stations), tuple(txs))


PRESETS = {
    "small": 8,
    "paper16": 16,
    "paper32": 32,
    "paper64": 64,
}


def preset_instance(name: str, seed: int = 0, **overrides) -> Instance:
    if name == "testbed":
        return testbed_instance()
    if name not in PRESETS:
        raise ValueError(f"unknown preset {name!r}")
    return generate_instance(GenParams(n_stas=PRESETS[name], seed=seed, **overrides))


def instance_stream(n_stas: int, horizon: int, seed: int, **overrides) -> list[Instance]:
    """Per-beacon instances for the concatenated scenario (uncapped deadlines).

    STA ``m`` requests one new TX per beacon; the station roster (energy
    class, link rate) is fixed by the first beacon.
    """
    ss = np.random.SeedSequence(seed)
    out = []
    roster = None
    for k, child in enumerate(ss.spawn(horizon)):
        params = GenParams(
            n_stas=n_stas,
            seed=int(child.generate_state(1, dtype=np.uint64)[0]),
            cap_deadline=False,
            tx_id_offset=k * n_stas,
            **overrides,
        )
        inst = generate_instance(params)
        if roster is None:
            roster = inst.stations
        out.append(Instance(inst.beacon_interval, inst.n_slots, roster, inst.txs, inst.horizon))
    return out

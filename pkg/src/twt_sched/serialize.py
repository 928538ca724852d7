"""JSON and CSV formats read and written by the CLI."""

from __future__ import annotations

import csv
import json
from pathlib import Path
from typing import Any, Iterable, Optional

from .energy import EnergyProfile
from .model import Instance, Schedule, ScheduleEntry, Station, TransmissionRequest

SCHEMA_VERSION = 1
FLOAT_FMT = "{:.9g}"


class FormatError(ValueError):
    """A file does not follow the expected layout."""


def _check_version(doc: dict, what: str) -> None:
    if not isinstance(doc, dict):
        raise FormatError(f"{what}: expected a JSON object")
    v = doc.get("schema_version")
    if v != SCHEMA_VERSION:
        raise FormatError(f"{what}: unsupported schema_version {v!r} (expected {SCHEMA_VERSION})")


def instance_to_dict(inst: Instance) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "beacon_interval": inst.beacon_interval,
        "n_slots": inst.n_slots,
        "horizon": inst.horizon,
        "stations": [
            {
                "sta_id": s.sta_id,
                "link_rate": s.link_rate,
                "profile": {
                    "class_id": s.profile.class_id,
                    "idle": s.profile.current_idle,
                    "cca": s.profile.current_cca,
                    "rx": s.profile.current_rx,
                    "tx": s.profile.current_tx,
                    "sleep": s.profile.current_sleep,
                    "voltage": s.profile.voltage,
                    "transition_energy": s.profile.transition_energy,
                },
            }
            for s in inst.stations
        ],
        "txs": [
            {
                "id": t.id,
                "sta_id": t.sta_id,
                "bytes": t.bytes,
                "gen_time": t.gen_time,
                "deadline": t.deadline,
                "duration": t.duration,
                "priority": t.priority,
            }
            for t in inst.txs
        ],
    }


def instance_from_dict(doc: dict) -> Instance:
    _check_version(doc, "instance")
    try:
        stations = []
        for s in doc["stations"]:
            p = s["profile"]
            prof = EnergyProfile(
                class_id=int(p["class_id"]),
                current_idle=float(p["idle"]),
                current_cca=float(p["cca"]),
                current_rx=float(p["rx"]),
                current_tx=float(p["tx"]),
                current_sleep=float(p["sleep"]),
                voltage=float(p["voltage"]),
                transition_energy=None if p.get("transition_energy") is None else float(p["transition_energy"]),
            )
            stations.append(Station(int(s["sta_id"]), prof, float(s["link_rate"])))
        txs = [
            TransmissionRequest(t["id"], t["sta_id"], t["bytes"], t["gen_time"], t["deadline"],
                                t["duration"], t["priority"])
            for t in doc["txs"]
        ]
        return Instance(doc["beacon_interval"], doc["n_slots"], tuple(stations), tuple(txs), doc.get("horizon"))
    except (KeyError, TypeError) as exc:
        raise FormatError(f"instance: malformed field ({exc})") from exc


def _entries(es: Iterable[ScheduleEntry]) -> list[dict]:
    return [{"tx_id": e.tx_id, "start_time": e.start_time, "end_time": e.end_time} for e in es]


def schedule_to_dict(s: Schedule) -> dict:
    return {
        "accepted": _entries(s.accepted),
        "rejected": sorted(s.rejected),
        "missed": _entries(s.missed),
    }


def schedule_from_dict(doc: dict) -> Schedule:
    try:
        mk = lambda es: tuple(ScheduleEntry(int(e["tx_id"]), int(e["start_time"]), int(e["end_time"])) for e in es)
        return Schedule(mk(doc["accepted"]), frozenset(int(x) for x in doc["rejected"]), mk(doc.get("missed", [])))
    except (KeyError, TypeError) as exc:
        raise FormatError(f"schedule: malformed field ({exc})") from exc


def solution_to_dict(strategy: str, beta: float, eta: int, seed: int, schedule: Schedule,
                     objective: float, stats: Optional[dict]) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "strategy": strategy,
        "beta": beta,
        "eta": eta,
        "seed": seed,
        "objective": objective,
        "schedule": schedule_to_dict(schedule),
        "stats": stats,
    }


def solution_from_dict(doc: dict) -> dict:
    _check_version(doc, "solution")
    out = dict(doc)
    out["schedule"] = schedule_from_dict(doc.get("schedule", {}))
    return out


def write_json(path: str | Path | None, doc: dict) -> str:
    text = json.dumps(doc, indent=2, sort_keys=False) + "\n"
    if path is not None and str(path) != "-":
        Path(path).write_text(text)
    return text


def read_json(path: str | Path) -> Any:
    try:
        return json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: invalid JSON ({exc})") from exc


def fmt(x: Any) -> str:
    if isinstance(x, float):
        return FLOAT_FMT.format(x)
    if x is None:
        return ""
    return str(x)


def write_csv(path: str | Path, header: list[str], rows: Iterable[dict]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([fmt(r[h]) for h in header])


def read_csv(path: str | Path, required: Iterable[str] = ()) -> list[dict]:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
        fields = rows[0].keys() if rows else []
    missing = [c for c in required if rows and c not in fields]
    if missing:
        raise FormatError(f"{path}: missing columns {', '.join(missing)}")
    return rows

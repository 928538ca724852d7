import json

import pytest
from hypothesis import given, strategies as st

from conftest import instances
from twt_sched.energy import (
    ENERGY_CLASSES,
    EdgeCostTable,
    EnergyProfile,
    PerSlotEnergies,
    energy_cost,
    load_energy_classes,
    normalize,
    per_slot_energies,
    station_energies,
)
from twt_sched.model import Instance, ScheduleEntry


def test_class1_tx_energy_per_slot():
    e = per_slot_energies(ENERGY_CLASSES[1], 1024)
    assert e.E_tx == pytest.approx(0.232 * 3.3 * 0.001024, rel=1e-12)
    assert e.E_tx == pytest.approx(7.84e-4, rel=1e-3)


def test_class2_sleep_energy_per_slot():
    e = per_slot_energies(ENERGY_CLASSES[2], 1024)
    assert e.E_sleep == pytest.approx(0.004e-3 * 3.3 * 1.024e-3, rel=1e-12)
    assert e.E_sleep == pytest.approx(1.35e-8, rel=1e-2)


def test_zero_slot_duration_rejected():
    with pytest.raises(ValueError):
        per_slot_energies(ENERGY_CLASSES[1], 0)


def test_transition_defaults_to_one_idle_slot():
    for prof in ENERGY_CLASSES.values():
        e = per_slot_energies(prof, 1024)
        assert e.E_st == e.E_id
        assert e.E_id >= e.E_sleep >= 0
    custom = EnergyProfile(9, 10, 10, 20, 30, 1, transition_energy=2.5e-3)
    assert per_slot_energies(custom, 1024).E_st == 2.5e-3


def test_bundled_classes_ordering():
    assert sorted(ENERGY_CLASSES) == [1, 2, 3, 4]
    for p in ENERGY_CLASSES.values():
        assert p.current_tx >= p.current_rx >= p.current_sleep > 0
        assert p.voltage == 3.3


def test_load_energy_classes_from_file(tmp_path):
    path = tmp_path / "classes.json"
    path.write_text(json.dumps({"voltage": 5.0, "classes": {"7": {"idle": 1, "cca": 1, "rx": 2, "tx": 3, "sleep": 0.5}}}))
    got = load_energy_classes(path)
    assert got[7].voltage == 5.0 and got[7].current_tx == 3.0


E = PerSlotEnergies(E_tx=2e-4, E_id=6e-5, E_sleep=1e-8, E_st=5e-5)
TS = 1000


def test_same_sta_zero_gap_is_transmit_only():
    assert energy_cost(0, ScheduleEntry(1, 0, 4000), True, E, TS) == pytest.approx(4 * 2e-4, rel=1e-12)


def test_different_sta_hand_value():
    assert energy_cost(0, ScheduleEntry(1, 0, 4000), False, E, TS) == pytest.approx(8.5e-4, rel=1e-12)


def test_same_sta_long_gap_takes_transition():
    # idling 3 slots costs 1.8e-4 > E_st
    assert energy_cost(0, ScheduleEntry(1, 3000, 7000), True, E, TS) == pytest.approx(4 * 2e-4 + 5e-5, rel=1e-12)


def test_negative_gap_rejected():
    with pytest.raises(ValueError):
        energy_cost(5000, ScheduleEntry(1, 4000, 6000), True, E, TS)


@given(st.integers(0, 5000), st.integers(0, 5000))
def test_same_sta_cost_monotone_then_flat(g1, g2):
    g1, g2 = sorted((g1, g2))
    c = lambda gap: energy_cost(0, ScheduleEntry(1, gap, gap + 2000), True, E, TS)
    switch = E.E_st / E.E_id * TS
    assert c(g1) <= c(g2) + 1e-18
    if g1 >= switch:
        assert c(g1) == c(g2)


@given(instances(min_n=1), st.randoms())
def test_sta_relabeling_leaves_objective_unchanged(inst, rnd):
    from twt_sched.model import Station, make_schedule, place_in_order, schedule_objective
    ids = [s.sta_id for s in inst.stations]
    perm = dict(zip(ids, rnd.sample(range(100, 100 + len(ids)), len(ids))))
    relabeled = Instance(
        inst.beacon_interval, inst.n_slots,
        tuple(Station(perm[s.sta_id], s.profile, s.link_rate) for s in inst.stations),
        tuple(t.__class__(t.id, perm[t.sta_id], t.bytes, t.gen_time, t.deadline, t.duration, t.priority)
              for t in inst.txs),
    )
    order = sorted(inst.txs, key=lambda t: (t.deadline, t.id))
    seq, t0 = [], 0
    for t in order:
        if max(t0, t.gen_time) + t.duration <= t.deadline:
            seq.append(t.id)
            t0 = max(t0, t.gen_time) + t.duration
    a = schedule_objective(inst, make_schedule(inst, place_in_order(inst, seq)), 0.3)
    b = schedule_objective(relabeled, make_schedule(relabeled, place_in_order(relabeled, seq)), 0.3)
    assert a == b


def test_normalize_examples():
    from conftest import make_instance
    inst = make_instance({i: (0, 1000, 50_000) for i in range(1, 11)}, priority={i: i for i in range(1, 11)})
    ctx = normalize(inst)
    assert ctx.p_max == 10 and ctx.p_hat(10) == 1.0
    single = make_instance({1: (0, 3000, 9000)})
    ctx1 = normalize(single)
    e = station_energies(single)[1]
    assert ctx1.e_max == pytest.approx(e.E_st + 3000 / 1024 * e.E_tx, rel=1e-12)


def test_normalize_empty_instance():
    with pytest.raises(ValueError):
        normalize(Instance())


@given(instances(min_n=1))
def test_normalized_values_in_unit_interval(inst):
    ctx = normalize(inst)
    table = EdgeCostTable(inst, ctx)
    energies = station_energies(inst)
    ts = inst.slot_duration
    for j, tj in enumerate(inst.txs):
        assert 0 < ctx.p_hat(tj.priority) <= 1
        for i in [-1] + list(range(len(inst.txs))):
            if i == j:
                continue
            prev_end = 0 if i < 0 else inst.txs[i].gen_time + inst.txs[i].duration
            start = max(prev_end, tj.gen_time)
            same = i >= 0 and inst.txs[i].sta_id == tj.sta_id
            ref = energy_cost(prev_end, ScheduleEntry(tj.id, start, start + tj.duration), same,
                              energies[tj.sta_id], ts) / ctx.e_max
            fast = table.e_hat(i, prev_end, j, start)
            assert fast == pytest.approx(ref, rel=1e-12, abs=1e-15)
            assert 0 <= fast <= 1 + 1e-12
            assert table.min_e_hat(j) <= fast + 1e-15

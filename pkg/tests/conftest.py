import os

import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

from twt_sched.energy import ENERGY_CLASSES
from twt_sched.model import Instance, Station, TransmissionRequest

settings.register_profile("default", max_examples=60, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("thorough", max_examples=500, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

MS = 1000


def make_instance(rows, sta_of=None, priority=None, energy_class=1, n_slots=100, beacon=102_400):
    """rows: {tx_id: (g, tau, d)} in microseconds."""
    sta_of = sta_of or {i: i for i in rows}
    stas = sorted(set(sta_of.values()))
    stations = tuple(Station(s, ENERGY_CLASSES[energy_class], 8.6e6) for s in stas)
    txs = tuple(
        TransmissionRequest(i, sta_of[i], 1000, g, d, tau, (priority or {}).get(i, 5))
        for i, (g, tau, d) in sorted(rows.items())
    )
    return Instance(beacon, n_slots, stations, txs)


@pytest.fixture
def eight_tx_instance():
    """Eight TXs on distinct STAs with overlapping windows (times in ms)."""
    rows = {2: (4, 5, 10), 3: (4, 12, 17), 7: (8, 4, 20), 5: (12, 3, 17),
            4: (4, 5, 20), 8: (16, 4, 24), 1: (18, 5, 27), 6: (20, 6, 32)}
    return make_instance({i: (g * MS, t * MS, d * MS) for i, (g, t, d) in rows.items()})


@st.composite
def instances(draw, max_n=7, min_n=0, shared_stas=True, grid=500, beacon=102_400):
    """Small valid instances on a coarse time grid, so ties and boundary touches occur."""
    n = draw(st.integers(min_n, max_n))
    n_stas = draw(st.integers(1, max(1, n))) if shared_stas else max(1, n)
    classes = draw(st.lists(st.sampled_from(sorted(ENERGY_CLASSES)), min_size=n_stas, max_size=n_stas))
    stations = tuple(Station(s + 1, ENERGY_CLASSES[c], 8.6e6) for s, c in enumerate(classes))
    cells = beacon // grid
    txs = []
    for j in range(n):
        sta = draw(st.integers(1, n_stas)) if shared_stas else j + 1
        tau = draw(st.integers(1, 30)) * grid
        g = draw(st.integers(0, min(cells // 2, cells - tau // grid))) * grid
        d = g + tau + draw(st.integers(0, 40)) * grid
        d = min(d, beacon)
        prio = draw(st.integers(1, 10))
        txs.append(TransmissionRequest(j, sta, 1000, g, d, tau, prio))
    return Instance(beacon, 100, stations, tuple(txs))


ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def verdict():
    """Record one PASS/FAIL line per acceptance criterion."""
    def record(tag: str, ok: bool, detail: str) -> bool:
        ACCEPTANCE_LINES.append(f"{'PASS' if ok else 'FAIL'} {tag}: {detail}")
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)

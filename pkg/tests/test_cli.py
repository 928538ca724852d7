import json

import pytest

from twt_sched.cli import BENCH_COLUMNS, derive_seed, main
from twt_sched.serialize import read_csv


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


@pytest.fixture
def inst16(tmp_path, capsys):
    path = tmp_path / "i16.json"
    assert run(capsys, "gen", "--preset", "paper16", "--seed", 3, "--out", path)[0] == 0
    return path


def test_gen_is_deterministic(capsys):
    a = run(capsys, "gen", "--preset", "small", "--seed", 1)[1]
    b = run(capsys, "gen", "--preset", "small", "--seed", 1)[1]
    c = run(capsys, "gen", "--preset", "small", "--seed", 1, "--instance", 1)[1]
    assert a == b != c
    assert len(json.loads(a)["txs"]) == 8


def test_derive_seed_splits_purposes():
    assert derive_seed(0, 16, 0, 0) != derive_seed(0, 16, 0, 1)
    assert derive_seed(0, 16, 0, 0) == derive_seed(0, 16, 0, 0)


def test_solve_then_rescore(tmp_path, capsys, inst16):
    sol = tmp_path / "sol.json"
    assert run(capsys, "solve", "--instance", inst16, "--out", sol)[0] == 0
    doc = json.loads(sol.read_text())
    assert doc["strategy"] == "tasper" and set(doc["stats"]) >= {"paths_created", "paths_pruned"}
    code, out, _ = run(capsys, "solve", "--instance", inst16, "--schedule", sol)
    assert code == 0
    assert json.loads(out)["objective"] == doc["objective"]


def test_solve_exact_small(tmp_path, capsys):
    path = tmp_path / "i8.json"
    run(capsys, "gen", "--preset", "small", "--out", path)
    code, out, _ = run(capsys, "solve", "--instance", path, "--strategy", "exact")
    assert code == 0 and json.loads(out)["stats"]["proven"] is True


def test_exit_codes(tmp_path, capsys, inst16):
    code, _, err = run(capsys, "solve", "--instance", inst16, "--strategy", "nope")
    assert code == 2 and json.loads(err)["error"] == "usage"
    code, _, err = run(capsys, "solve", "--instance", inst16, "--strategy", "exact")
    assert code == 4 and json.loads(err)["error"] == "solver_capacity"
    code, _, err = run(capsys, "solve", "--instance", tmp_path / "missing.json")
    assert code == 3
    code, _, _ = run(capsys, "solve", "--instance", inst16, "--beta", "1.5")
    assert code == 3


def test_invalid_instance_lists_violations(tmp_path, capsys, inst16):
    doc = json.loads(inst16.read_text())
    doc["txs"][0]["deadline"] = doc["txs"][0]["gen_time"]
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps(doc))
    code, _, err = run(capsys, "solve", "--instance", bad)
    assert code == 3
    assert any("gen+dur > deadline" in v for v in json.loads(err)["violations"])


def test_infeasible_schedule_rescore(tmp_path, capsys, inst16):
    sol = tmp_path / "sol.json"
    run(capsys, "solve", "--instance", inst16, "--out", sol)
    doc = json.loads(sol.read_text())
    e = doc["schedule"]["accepted"][0]
    e["end_time"] += 1
    sol.write_text(json.dumps(doc))
    code, _, err = run(capsys, "solve", "--instance", inst16, "--schedule", sol)
    assert code == 3 and json.loads(err)["error"] == "infeasible_schedule"


def test_bench_exact_too_large(tmp_path, capsys):
    code, _, _ = run(capsys, "bench", "--preset", "paper16", "--strategies", "exact", "--out", tmp_path / "x.csv")
    assert code == 4


BENCH = ["bench", "--preset", "small", "--strategies", "tasper,fifo,random", "--beta", "0.1,0.9",
         "--instances", 3, "--random-reps", 4]


def test_bench_rows_and_determinism(tmp_path, capsys):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert run(capsys, *BENCH, "--jobs", 1, "--out", a)[0] == 0
    assert run(capsys, *BENCH, "--jobs", 3, "--out", b)[0] == 0
    assert a.read_bytes() == b.read_bytes()
    rows = read_csv(a, BENCH_COLUMNS)
    # 3 instances x 2 betas x (tasper + fifo + 4 random replicates)
    assert len(rows) == 3 * 2 * (1 + 1 + 4)
    timing = read_csv(tmp_path / "a.timing.csv", ["wall_time_s"])
    assert len(timing) == len(rows)


def test_bench_concatenated(tmp_path, capsys):
    out = tmp_path / "c.csv"
    code = run(capsys, "bench", "--preset", "small", "--strategies", "tasper,fifo", "--beta", "0.9",
               "--instances", 2, "--horizon", 3, "--jobs", 1, "--out", out)[0]
    assert code == 0
    rows = read_csv(out)
    assert {r["horizon"] for r in rows} == {"3"} and all(r["objective"] == "" for r in rows)


def test_report(tmp_path, capsys):
    bench = tmp_path / "b.csv"
    run(capsys, "bench", "--preset", "paper16", "--strategies", "tasper,fifo", "--beta", "0.9",
        "--instances", 10, "--jobs", 1, "--out", bench)
    summary, plots = tmp_path / "s.csv", tmp_path / "plots"
    code, out, _ = run(capsys, "report", bench, "--out", summary, "--plot-dir", plots)
    assert code == 0 and "rejection_cost" in out
    rows = read_csv(summary)
    rej = {r["strategy"]: float(r["mean"]) for r in rows if r["metric"] == "rejection_cost"}
    assert rej["tasper"] < rej["fifo"]
    assert all(r["instances"] == "10" for r in rows)
    assert (plots / "rejection_cost.csv").exists()
    # a summary file can be re-read
    assert run(capsys, "report", summary)[0] == 0


def test_report_missing_file(tmp_path, capsys):
    assert run(capsys, "report", tmp_path / "nope.csv")[0] == 3


def test_module_entry_point():
    import subprocess
    import sys
    res = subprocess.run([sys.executable, "-m", "twt_sched", "gen", "--preset", "testbed"],
                         capture_output=True, text=True)
    assert res.returncode == 0 and len(json.loads(res.stdout)["txs"]) == 10

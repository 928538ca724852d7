"""twt-sched: generate instances, solve them, run benchmarks, summarize results.

Exit codes: 0 ok, 2 usage error, 3 validation or input error, 4 solver
capacity exceeded (exact oracle on a too-large instance). Errors are also
written to stderr as a one-line JSON object.

Seed splitting: every random draw derives from ``--seed`` through
``numpy.random.SeedSequence(seed, spawn_key=(n_stas, instance, purpose))``
with purpose 0 for instance generation and 1 for solver tie-breaking.
Random's replicate seeds are spawned from its solver seed.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time
from collections import defaultdict
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import gen
from .exact import DEFAULT_LIMIT_N, InstanceTooLarge
from .model import (
    FeasibilityError,
    SolveConfig,
    ValidationError,
    check_schedule_feasibility,
    schedule_objective,
    validate_instance,
)
from .serialize import (
    FormatError,
    instance_from_dict,
    instance_to_dict,
    read_csv,
    read_json,
    solution_from_dict,
    solution_to_dict,
    write_csv,
    write_json,
)
from .sim import (
    RANDOM_REPLICATES,
    STRATEGY_NAMES,
    aggregate,
    evaluate,
    replicate_seeds,
    run_concatenated,
    solve,
)

log = logging.getLogger("twt_sched")

EXIT_OK, EXIT_USAGE, EXIT_INVALID, EXIT_CAPACITY = 0, 2, 3, 4
PRESET_NAMES = ("testbed",) + tuple(gen.PRESETS)

BENCH_COLUMNS = [
    "preset", "n_stas", "instance_id", "strategy", "beta", "eta", "seed", "horizon",
    "rejection_cost", "energy_per_active_sta", "deadline_miss_pct", "accepted", "missed", "objective",
]
TIMING_COLUMNS = ["preset", "instance_id", "strategy", "beta", "eta", "seed", "wall_time_s"]
KEY_COLUMNS = ("preset", "strategy", "beta", "eta", "horizon")
METRIC_COLUMNS = ("rejection_cost", "energy_per_active_sta", "deadline_miss_pct", "accepted",
                  "missed", "objective", "wall_time_s")
SUMMARY_COLUMNS = ["preset", "n_stas", "strategy", "beta", "eta", "horizon", "metric", "mean", "ci95", "instances"]


class CliError(Exception):
    def __init__(self, code: int, kind: str, message: str, detail: Optional[list] = None):
        super().__init__(message)
        self.code, self.kind, self.detail = code, kind, detail


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise CliError(EXIT_USAGE, "usage", message)


def derive_seed(root: int, *key: int) -> int:
    return int(np.random.SeedSequence(root, spawn_key=tuple(key)).generate_state(1, dtype=np.uint32)[0])


def _csv_list(text: str, cast=str) -> list:
    items = [x.strip() for x in text.split(",") if x.strip()]
    if not items:
        raise CliError(EXIT_USAGE, "usage", f"empty list: {text!r}")
    try:
        return [cast(x) for x in items]
    except ValueError as exc:
        raise CliError(EXIT_USAGE, "usage", str(exc)) from exc


def _config(beta: float, eta: int, seed: int) -> SolveConfig:
    try:
        return SolveConfig(beta, eta, seed)
    except ValueError as exc:
        raise CliError(EXIT_INVALID, "invalid_config", str(exc)) from exc


def _preset_size(name: str) -> int:
    return 10 if name == "testbed" else gen.PRESETS[name]


def _build_instance(preset: str, seed: int, tau_factor: float, r_factor: float, n_stas: Optional[int] = None):
    if preset == "testbed":
        return gen.testbed_instance()
    n = n_stas if n_stas is not None else gen.PRESETS[preset]
    return gen.generate_instance(gen.GenParams(n_stas=n, seed=seed, tau_factor=tau_factor, r_factor=r_factor))


# ---- gen ------------------------------------------------------------------

def cmd_gen(args) -> int:
    if args.preset == "testbed" and args.n_stas is not None:
        raise CliError(EXIT_USAGE, "usage", "--n-stas does not apply to the testbed preset")
    n = args.n_stas if args.n_stas is not None else _preset_size(args.preset)
    seed = derive_seed(args.seed, n, args.instance, 0)
    try:
        inst = _build_instance(args.preset, seed, args.tau_factor, args.r_factor, args.n_stas)
    except ValueError as exc:
        raise CliError(EXIT_INVALID, "invalid_config", str(exc)) from exc
    text = write_json(args.out, instance_to_dict(inst))
    if args.out in (None, "-"):
        sys.stdout.write(text)
    log.info("generated %d TXs", len(inst.txs))
    return EXIT_OK


# ---- solve ----------------------------------------------------------------

def _load_instance(path: str):
    try:
        inst = instance_from_dict(read_json(path))
    except FileNotFoundError as exc:
        raise CliError(EXIT_INVALID, "bad_input", f"{path}: no such file") from exc
    except FormatError as exc:
        raise CliError(EXIT_INVALID, "bad_input", str(exc)) from exc
    violations = validate_instance(inst)
    if violations:
        raise CliError(EXIT_INVALID, "validation", "invalid instance", [str(v) for v in violations])
    return inst


def cmd_solve(args) -> int:
    inst = _load_instance(args.instance)
    cfg = _config(args.beta, args.eta, args.seed)
    if args.schedule:
        # score a previously written solution instead of solving
        try:
            doc = solution_from_dict(read_json(args.schedule))
        except (FileNotFoundError, FormatError) as exc:
            raise CliError(EXIT_INVALID, "bad_input", str(exc)) from exc
        sched, strategy, stats = doc["schedule"], doc.get("strategy", "given"), doc.get("stats")
        violations = check_schedule_feasibility(inst, sched)
        if violations:
            raise CliError(EXIT_INVALID, "infeasible_schedule", "schedule violates constraints",
                           [str(v) for v in violations])
    else:
        strategy = args.strategy
        if strategy == "exact" and len(inst.txs) > DEFAULT_LIMIT_N:
            raise CliError(EXIT_CAPACITY, "solver_capacity",
                           f"{len(inst.txs)} TXs exceeds exact-solver limit {DEFAULT_LIMIT_N}")
        try:
            sched, stats = solve(inst, strategy, cfg)
        except InstanceTooLarge as exc:
            raise CliError(EXIT_CAPACITY, "solver_capacity", str(exc)) from exc
    try:
        obj = schedule_objective(inst, sched, cfg.beta) if inst.txs else 0.0
    except FeasibilityError as exc:
        raise CliError(EXIT_INVALID, "infeasible_schedule", str(exc)) from exc
    doc = solution_to_dict(strategy, cfg.beta, cfg.eta, cfg.seed, sched, obj, stats)
    text = write_json(args.out, doc)
    if args.out in (None, "-"):
        sys.stdout.write(text)
    return EXIT_OK


# ---- bench ----------------------------------------------------------------

@dataclass(frozen=True)
class BenchSpec:
    presets: tuple[str, ...]
    strategies: tuple[str, ...]
    betas: tuple[float, ...] = (0.1, 0.5, 0.9)
    eta: int = 9
    instances: int = 100
    horizon: int = 1
    seed: int = 0
    random_reps: int = RANDOM_REPLICATES
    tau_factor: float = 0.2
    r_factor: float = 0.3

    def __post_init__(self):
        if not self.strategies:
            raise ValueError("no strategies given")
        if not self.betas:
            raise ValueError("no beta values given")
        if self.instances < 1 or self.horizon < 1 or self.random_reps < 1:
            raise ValueError("instances, horizon and random reps must be >= 1")

    def jobs(self) -> list[tuple]:
        out = []
        for preset in self.presets:
            count = 1 if preset == "testbed" else self.instances
            for i in range(count):
                for strat in self.strategies:
                    for beta in self.betas:
                        out.append((self, preset, i, strat, beta))
        return out


def _bench_job(job: tuple) -> tuple[list[dict], list[dict]]:
    spec, preset, i, strategy, beta = job
    n = _preset_size(preset)
    inst_seed = derive_seed(spec.seed, n, i, 0)
    solver_seed = derive_seed(spec.seed, n, i, 1)
    seeds = replicate_seeds(solver_seed, spec.random_reps) if strategy == "random" else [solver_seed]
    rows, timing = [], []
    base = {"preset": preset, "n_stas": n, "instance_id": i, "strategy": strategy, "beta": beta,
            "eta": spec.eta, "horizon": spec.horizon}
    if spec.horizon == 1:
        inst = _build_instance(preset, inst_seed, spec.tau_factor, spec.r_factor)
    else:
        stream = gen.instance_stream(n, spec.horizon, inst_seed, tau_factor=spec.tau_factor,
                                     r_factor=spec.r_factor)
    for s in seeds:
        cfg = SolveConfig(beta, spec.eta, s)
        if spec.horizon == 1:
            t0 = time.perf_counter()
            sched, _ = solve(inst, strategy, cfg)
            wall = time.perf_counter() - t0
            m = evaluate(inst, sched, beta)
        else:
            run = run_concatenated(stream, strategy, spec.horizon, cfg)
            wall = run.metrics.wall_time_s
            m = {
                "rejection_cost": run.metrics.mean_rejection_cost,
                "energy_per_active_sta": run.metrics.mean_energy_per_active_sta,
                "deadline_miss_pct": run.metrics.deadline_miss_pct,
                "accepted": int(run.metrics.accepted_count),
                "missed": sum(len(b.missed) for b in run.beacons),
                "objective": None,
            }
        rows.append({**base, "seed": s, **m})
        timing.append({"preset": preset, "instance_id": i, "strategy": strategy, "beta": beta,
                       "eta": spec.eta, "seed": s, "wall_time_s": wall})
    return rows, timing


def run_bench(spec: BenchSpec, jobs: int = 1) -> tuple[list[dict], list[dict]]:
    """All rows in job order; the result does not depend on ``jobs``."""
    work = spec.jobs()
    if jobs <= 1:
        results = [_bench_job(j) for j in work]
    else:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            results = list(ex.map(_bench_job, work, chunksize=max(1, len(work) // (jobs * 8))))
    rows = [r for rs, _ in results for r in rs]
    timing = [t for _, ts in results for t in ts]
    return rows, timing


def cmd_bench(args) -> int:
    presets = _csv_list(args.preset)
    for p in presets:
        if p not in PRESET_NAMES:
            raise CliError(EXIT_USAGE, "usage", f"unknown preset {p!r}; choose from {', '.join(PRESET_NAMES)}")
    strategies = _csv_list(args.strategies)
    for s in strategies:
        if s not in STRATEGY_NAMES:
            raise CliError(EXIT_USAGE, "usage", f"unknown strategy {s!r}; choose from {', '.join(STRATEGY_NAMES)}")
    betas = _csv_list(args.beta, float)
    for b in betas:
        _config(b, args.eta, 0)
    if "exact" in strategies:
        too_big = [p for p in presets if _preset_size(p) > DEFAULT_LIMIT_N]
        if too_big:
            raise CliError(EXIT_CAPACITY, "solver_capacity",
                           f"exact oracle limited to {DEFAULT_LIMIT_N} TXs; presets too large: {', '.join(too_big)}")
        if args.horizon > 1:
            raise CliError(EXIT_CAPACITY, "solver_capacity", "exact oracle is not available for multi-beacon runs")
    try:
        spec = BenchSpec(tuple(presets), tuple(strategies), tuple(betas), args.eta, args.instances,
                         args.horizon, args.seed, args.random_reps, args.tau_factor, args.r_factor)
    except ValueError as exc:
        raise CliError(EXIT_INVALID, "invalid_config", str(exc)) from exc
    jobs = args.jobs if args.jobs is not None else (os.cpu_count() or 1)
    log.info("bench: %d jobs on %d workers", len(spec.jobs()), jobs)
    rows, timing = run_bench(spec, jobs)
    write_csv(args.out, BENCH_COLUMNS, rows)
    timing_path = args.timing or str(Path(args.out).with_suffix("")) + ".timing.csv"
    write_csv(timing_path, TIMING_COLUMNS, timing)
    log.info("wrote %d rows to %s", len(rows), args.out)
    return EXIT_OK


# ---- report ---------------------------------------------------------------

def summarize(rows: Sequence[dict]) -> list[dict]:
    """Mean and 95% half-width per (preset, strategy, beta, eta, horizon) and metric.

    Rows sharing an instance (Random's replicate seeds) are averaged first,
    so each instance counts once.
    """
    if not rows:
        return []
    metrics = [m for m in METRIC_COLUMNS if m in rows[0]]
    if not metrics:
        raise FormatError("no metric columns found")
    per_inst: dict[tuple, dict[str, dict[str, list[float]]]] = defaultdict(lambda: defaultdict(lambda: defaultdict(list)))
    n_of = {}
    for r in rows:
        key = tuple(r.get(k, "") for k in KEY_COLUMNS)
        n_of[key] = r.get("n_stas", "")
        for m in metrics:
            if r.get(m, "") != "":
                per_inst[key][r.get("instance_id", "")][m].append(float(r[m]))
    out = []
    for key in sorted(per_inst, key=_key_order):
        insts = per_inst[key]
        for m in metrics:
            vals = [sum(v[m]) / len(v[m]) for _, v in sorted(insts.items()) if v.get(m)]
            if not vals:
                continue
            if len(vals) >= 2:
                mean, ci = aggregate(vals)
            else:
                mean, ci = vals[0], None
            out.append(dict(zip(KEY_COLUMNS, key), n_stas=n_of[key], metric=m, mean=mean, ci95=ci,
                            instances=len(vals)))
    return out


def _key_order(key: tuple) -> tuple:
    preset, strategy, beta, eta, horizon = key
    n = _preset_size(preset) if preset in PRESET_NAMES else 0
    return (n, preset, strategy, float(beta or 0), int(eta or 0), int(horizon or 1))


def cmd_report(args) -> int:
    rows: list[dict] = []
    for path in args.input:
        try:
            got = read_csv(path)
        except FileNotFoundError as exc:
            raise CliError(EXIT_INVALID, "bad_input", f"{path}: no such file") from exc
        rows.extend(got)
    try:
        if rows and "metric" in rows[0]:
            summary = [dict(r, mean=float(r["mean"]), ci95=float(r["ci95"]) if r["ci95"] else None) for r in rows]
        else:
            summary = summarize(rows)
    except (FormatError, ValueError, KeyError) as exc:
        raise CliError(EXIT_INVALID, "bad_input", str(exc)) from exc
    if args.out:
        write_csv(args.out, SUMMARY_COLUMNS, summary)
    _print_table(summary)
    if args.plot_dir:
        _write_plot_data(summary, Path(args.plot_dir))
    return EXIT_OK


def _print_table(summary: list[dict]) -> None:
    fmt = "{:<9} {:<7} {:>5} {:>4} {:<22} {:>14} {:>12} {:>5}"
    print(fmt.format("preset", "strategy", "beta", "eta", "metric", "mean", "ci95", "n"))
    for r in summary:
        ci = "" if r["ci95"] is None else f"{r['ci95']:.4g}"
        print(fmt.format(r["preset"], r["strategy"], str(r["beta"]), str(r["eta"]), r["metric"],
                         f"{r['mean']:.6g}", ci, str(r["instances"])))


def _write_plot_data(summary: list[dict], out_dir: Path) -> None:
    """One CSV per metric: x = n_stas, one series per (strategy, beta)."""
    out_dir.mkdir(parents=True, exist_ok=True)
    by_metric = defaultdict(list)
    for r in summary:
        by_metric[r["metric"]].append(r)
    for metric, rs in sorted(by_metric.items()):
        write_csv(out_dir / f"{metric}.csv", ["n_stas", "strategy", "beta", "eta", "horizon", "mean", "ci95"], rs)


# ---- entry point ----------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="twt-sched", description="TWT acceptance and scheduling engine")
    sub = p.add_subparsers(dest="cmd", required=True, parser_class=_Parser)

    g = sub.add_parser("gen", help="write one instance as JSON")
    g.add_argument("--preset", choices=PRESET_NAMES, default="paper16")
    g.add_argument("--n-stas", type=int, help="override the preset's STA count")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--instance", type=int, default=0, help="instance index within the seed's family")
    g.add_argument("--tau-factor", type=float, default=0.2)
    g.add_argument("--r-factor", type=float, default=0.3)
    g.add_argument("--out", help="output path (default stdout)")
    g.set_defaults(func=cmd_gen)

    s = sub.add_parser("solve", help="solve an instance and write schedule + stats JSON")
    s.add_argument("--instance", required=True)
    s.add_argument("--strategy", choices=STRATEGY_NAMES, default="tasper")
    s.add_argument("--beta", type=float, default=0.9)
    s.add_argument("--eta", type=int, default=9)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--schedule", help="score this solution JSON instead of solving")
    s.add_argument("--out", help="output path (default stdout)")
    s.set_defaults(func=cmd_solve)

    b = sub.add_parser("bench", help="run strategies over generated instances, write metrics CSV")
    b.add_argument("--preset", default="paper16", help="comma-separated presets")
    b.add_argument("--strategies", default="tasper,sf,fifo,pf,random,hsa")
    b.add_argument("--beta", default="0.1,0.5,0.9", help="comma-separated beta values")
    b.add_argument("--eta", type=int, default=9)
    b.add_argument("--instances", type=int, default=100)
    b.add_argument("--horizon", type=int, default=1, help="beacon intervals per run")
    b.add_argument("--random-reps", type=int, default=RANDOM_REPLICATES)
    b.add_argument("--tau-factor", type=float, default=0.2)
    b.add_argument("--r-factor", type=float, default=0.3)
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--jobs", type=int, help="worker processes (default: CPU count)")
    b.add_argument("--out", required=True)
    b.add_argument("--timing", help="wall-time sidecar CSV (default: <out>.timing.csv)")
    b.set_defaults(func=cmd_bench)

    r = sub.add_parser("report", help="summarize bench CSVs (mean and 95%% CI)")
    r.add_argument("input", nargs="+")
    r.add_argument("--out", help="summary CSV path")
    r.add_argument("--plot-dir", help="directory for per-metric plot-data CSVs")
    r.set_defaults(func=cmd_report)
    return p


def _setup_logging() -> None:
    level = os.environ.get("TWT_SCHED_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)


def main(argv: Optional[Sequence[str]] = None) -> int:
    _setup_logging()
    try:
        args = build_parser().parse_args(argv)
        return args.func(args)
    except CliError as exc:
        err = {"error": exc.kind, "message": str(exc), "exit_code": exc.code}
        if exc.detail:
            err["violations"] = exc.detail
        sys.stderr.write(json.dumps(err) + "\n")
        return exc.code
    except ValidationError as exc:
        sys.stderr.write(json.dumps({"error": "validation", "message": str(exc), "exit_code": EXIT_INVALID,
                                     "violations": [str(v) for v in exc.violations]}) + "\n")
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())

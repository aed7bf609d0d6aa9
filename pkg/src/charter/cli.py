"""Command-line experiment runner.

Subcommands: ``run``, ``sweep``, ``validate-params``, ``bench-vaidya``.
Module errors exit with status 2 and print ``error: <ClassName>: <message>``
on stderr.
"""

import argparse
import concurrent.futures
import csv
import hashlib
import math
import os
import statistics
import sys
import time
from dataclasses import astuple, dataclass, fields
from pathlib import Path

import numpy as np

from .baseline import run_dpsgd
from .config import SWEEP_AXES, ExperimentConfig, read_config, validate_config
from .exceptions import CharterError, ConfigRejected
from .mechanisms import charter_privacy_ledger, derive_params
from .orchestrator import run_charter
from .problems import builtin_problems, make_problem
from .vaidya import VaidyaConfig, run_cutting_plane

CSV_VERSION = 1


@dataclass
class ResultRow:
    run_id: str
    seed: int
    problem: str
    d: int
    M: int
    N: int
    eps: float
    delta: float
    K: int
    J0: int
    J1: int
    cc_bits: float
    k_star: int
    excess_risk: float
    wall_ms: float
    algo: str


RESULT_COLUMNS = [f.name for f in fields(ResultRow)]


def _fmt(value):
    # repr gives the shortest round-trip form for floats
    return repr(value) if isinstance(value, float) else str(value)


def format_row(row):
    return [_fmt(v) for v in astuple(row)]


def _run_id(cfg, seed, algo):
    key = f"{cfg.problem}|{sorted(cfg.problem_kwargs().items())}|{cfg.d}|{cfg.M}|{cfg.N}|{cfg.K}|" \
          f"{cfg.eps!r}|{cfg.delta!r}|{cfg.delta_err!r}|{cfg.gamma!r}|{cfg.eta!r}|{seed}|{algo}"
    return f"{algo}-{hashlib.sha1(key.encode()).hexdigest()[:10]}"


def minimal_n(cfg, problem):
    """Smallest N meeting the fresh-sample floor (a fixed point, since K
    grows with N)."""
    if cfg.K is not None:
        return _floor_n(cfg, problem, 3)
    N = 3
    for _ in range(50):
        nxt = _floor_n(cfg, problem, N)
        if nxt <= N:
            return N
        N = nxt
    raise ConfigRejected("could not find an N satisfying the sample floor")


def _floor_n(cfg, problem, N):
    params = derive_params(cfg.d, cfg.M, N, problem.diameter, problem.sigma_g, problem.sigma_f, cfg.gamma,
                           cfg.privacy(), K=cfg.K, check_budget=False)
    return max(3, math.ceil(params.n_floor))


def run_cell(cfg, seed):
    """All rows (CHARTER, then the baseline if enabled) for one seed."""
    problem = make_problem(cfg.problem, cfg.d, cfg.M, seed=seed, **cfg.problem_kwargs())
    N = cfg.N if cfg.N is not None else minimal_n(cfg, problem)
    cfg = cfg.replace(N=N)
    t0 = time.perf_counter()
    tr = run_charter(problem, cfg.M, N, cfg.privacy(), cfg.vaidya(), seed=seed, K=cfg.K,
                     override_n_floor=cfg.override_n_floor)
    wall = (time.perf_counter() - t0) * 1e3 if cfg.wall_time else 0.0
    p = tr.params
    rows = [ResultRow(_run_id(cfg, seed, "charter"), seed, cfg.problem, cfg.d, cfg.M, N, float(cfg.eps),
                      float(cfg.delta), p.K, p.J0, p.J1, float(tr.cc_bits), tr.k_star,
                      float(tr.excess_risk), float(wall), "charter")]
    transcripts = {rows[0].run_id: tr}
    if cfg.baseline:
        t0 = time.perf_counter()
        res = run_dpsgd(problem, cfg.M, N, cfg.eps, cfg.delta, rounds=cfg.baseline_rounds,
                        batch_size=cfg.baseline_batch_size, step_size=cfg.baseline_step_size, seed=seed)
        wall = (time.perf_counter() - t0) * 1e3 if cfg.wall_time else 0.0
        # the baseline returns an averaged iterate: no k*, 32-bit floats, no loss stage
        rows.append(ResultRow(_run_id(cfg, seed, "dpsgd"), seed, cfg.problem, cfg.d, cfg.M, N,
                              float(cfg.eps), float(cfg.delta), res.rounds, 32, 0, float(res.cc_bits), -1,
                              float(res.excess_risk), float(wall), "dpsgd"))
    return rows, transcripts


class _RowWriter:
    """Single writer; flushes after every row.  ``path=None`` writes stdout."""

    def __init__(self, path):
        self._fh = open(path, "w", newline="") if path else sys.stdout
        self._own = bool(path)
        self._w = csv.writer(self._fh, lineterminator="\n")
        self._w.writerow(RESULT_COLUMNS)

    def write(self, row):
        self._w.writerow(format_row(row))
        self._fh.flush()

    def close(self):
        if self._own:
            self._fh.close()


def _transcript_dir(cfg):
    if cfg.transcripts:
        return Path(cfg.transcripts)
    if cfg.out:
        return Path(cfg.out).parent
    return None


def preflight(cfg):
    """Derive parameters for the first seed so bad configs fail before any
    output is written."""
    problem = make_problem(cfg.problem, cfg.d, cfg.M, seed=cfg.seeds[0], **cfg.problem_kwargs())
    N = cfg.N if cfg.N is not None else minimal_n(cfg, problem)
    derive_params(cfg.d, cfg.M, N, problem.diameter, problem.sigma_g, problem.sigma_f, cfg.gamma,
                  cfg.privacy(), K=cfg.K)


def cmd_run(cfg):
    preflight(cfg)
    out_dir = _transcript_dir(cfg)
    writer = _RowWriter(cfg.out)
    try:
        for seed in cfg.seeds:
            rows, transcripts = run_cell(cfg, seed)
            for row in rows:
                writer.write(row)
            if out_dir is not None:
                out_dir.mkdir(parents=True, exist_ok=True)
                for run_id, tr in transcripts.items():
                    tr.write(out_dir / f"{run_id}.transcript")
    finally:
        writer.close()
    return 0


def sweep_cells(cfg):
    """Cartesian product of the sweep axes (in ``SWEEP_AXES`` order) x seeds."""
    validate_config(cfg)
    axes = [(a, cfg.sweep[a]) for a in SWEEP_AXES if a in cfg.sweep]
    combos = [{}]
    for name, values in axes:
        combos = [dict(c, **{name: v}) for c in combos for v in values]
    return [(cfg.replace(**combo), seed) for combo in combos for seed in cfg.seeds]


def _sweep_job(job):
    cell_cfg, seed = job
    rows, _ = run_cell(cell_cfg, seed)
    return rows


def pool_size(n_jobs):
    cap = os.environ.get("CHARTER_THREADS")
    limit = os.cpu_count() or 1
    if cap:
        try:
            limit = int(cap)
        except ValueError:
            raise ConfigRejected(f"CHARTER_THREADS must be an integer, got {cap!r}") from None
        if limit < 1:
            raise ConfigRejected("CHARTER_THREADS must be positive")
    return max(1, min(limit, n_jobs))


def summarize(rows):
    """Per-cell median and interquartile range of the excess risk."""
    groups = {}
    for r in rows:
        groups.setdefault((r.algo, r.problem, r.d, r.M, r.N, r.eps), []).append(r.excess_risk)
    out = []
    for key, ers in groups.items():
        q1, q3 = np.percentile(ers, [25, 75])
        out.append(key + (len(ers), statistics.median(ers), float(q3 - q1)))
    return out


SUMMARY_COLUMNS = ["algo", "problem", "d", "M", "N", "eps", "n_runs", "median_excess_risk", "iqr_excess_risk"]


def cmd_sweep(cfg):
    jobs = sweep_cells(cfg)
    writer = _RowWriter(cfg.out)
    collected = []
    try:
        workers = pool_size(len(jobs))
        if workers == 1:
            results = map(_sweep_job, jobs)
            for rows in results:
                for row in rows:
                    writer.write(row)
                    collected.append(row)
        else:
            with concurrent.futures.ProcessPoolExecutor(max_workers=workers) as pool:
                for rows in pool.map(_sweep_job, jobs):
                    for row in rows:
                        writer.write(row)
                        collected.append(row)
    finally:
        writer.close()
    summary = summarize(collected)
    if cfg.out:
        path = Path(cfg.out)
        with open(path.with_name(path.stem + ".summary.csv"), "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(SUMMARY_COLUMNS)
            for rec in summary:
                w.writerow([_fmt(v) for v in rec])
    return 0


def cmd_validate_params(cfg, stream=None):
    stream = stream or sys.stdout
    problem = make_problem(cfg.problem, cfg.d, cfg.M, seed=cfg.seeds[0], **cfg.problem_kwargs())
    N = cfg.N if cfg.N is not None else minimal_n(cfg, problem)
    privacy = cfg.privacy()
    params = derive_params(cfg.d, cfg.M, N, problem.diameter, problem.sigma_g, problem.sigma_f, cfg.gamma,
                           privacy, K=cfg.K)
    pr = lambda *a: print(*a, file=stream)  # noqa: E731
    pr(f"problem {cfg.problem} d={cfg.d} M={cfg.M} N={N} R={_fmt(problem.diameter)} "
       f"sigma_g={_fmt(problem.sigma_g)} sigma_f={_fmt(problem.sigma_f)} gamma={_fmt(cfg.gamma)}")
    for name in ("K", "G0", "G1", "sigma0_sq", "sigma1_sq", "D0", "D1", "J0", "J1"):
        pr(f"{name} = {_fmt(getattr(params, name))}")
    pr(f"batch_size = {params.batch_size}")
    pr(f"n_floor = {_fmt(params.n_floor)}" + ("" if N >= params.n_floor else "  (N is below the floor)"))
    if privacy.private:
        ledger = charter_privacy_ledger(params, privacy)
        for mechanism, eps, delta, _ in ledger.entries:
            pr(f"ledger {mechanism} eps={_fmt(eps)} delta={_fmt(delta)}")
        for stage, (eps, delta) in ledger.stages.items():
            pr(f"composed {stage} eps={_fmt(eps)} delta={_fmt(delta)}")
        eps, delta = ledger.composed
        pr(f"composed total eps={_fmt(eps)} delta={_fmt(delta)}")
    else:
        pr("ledger non-private (no noise)")
    pr(f"predicted_cc = {params.predicted_cc()}")
    return 0


def cmd_bench_vaidya(args, stream=None):
    """Exact-subgradient cutting-plane runs on the max-abs instance."""
    stream = stream or sys.stdout
    w = csv.writer(stream, lineterminator="\n")
    w.writerow(["d", "iters", "gamma", "eta", "adds", "drops", "noops", "final_rows", "best_excess_risk",
                "wall_ms"])
    cfg_base = VaidyaConfig(eta=args.eta, gamma=args.gamma, K=args.iters)
    for d in args.d:
        problem = make_problem("max-abs", d, 1, seed=args.seed[0] if args.seed else 0)
        t0 = time.perf_counter()
        res = run_cutting_plane(problem.domain(), cfg_base, lambda x, k: problem.true_grad(x))
        wall = (time.perf_counter() - t0) * 1e3 if not args.no_wall_time else 0.0
        kinds = [s.kind for s in res.steps]
        best = float(np.min(problem.true_loss(res.iterates)) - problem.L_star)
        w.writerow([d, args.iters, _fmt(args.gamma), _fmt(args.eta), kinds.count("add"), kinds.count("drop"),
                    kinds.count("noop"), res.final.n_rows, _fmt(best), _fmt(wall)])
    return 0


def _parse_eps(text):
    return math.inf if text.lower() in ("inf", "+inf") else float(text)


def _add_experiment_flags(p):
    p.add_argument("--config", help="flat 'section.key = value' config file")
    p.add_argument("--problem", choices=sorted(builtin_problems()))
    p.add_argument("--d", type=int)
    p.add_argument("--M", type=int)
    p.add_argument("--N", type=int, help="samples per client (default: smallest N meeting the floor)")
    p.add_argument("--R", type=float, help="domain diameter")
    p.add_argument("--K", type=int, help="override the derived iteration count")
    p.add_argument("--eps", type=_parse_eps, help="privacy budget, or 'inf'")
    p.add_argument("--delta", type=float)
    p.add_argument("--delta-err", type=float)
    p.add_argument("--gamma", type=float)
    p.add_argument("--eta", type=float)
    p.add_argument("--center-tol", type=float)
    p.add_argument("--seed", type=int, action="append", help="repeatable")
    p.add_argument("--out", help="CSV path (default: stdout)")
    p.add_argument("--transcripts", help="directory for transcript files")
    p.add_argument("--override-n-floor", action="store_true")
    p.add_argument("--baseline", action="store_true", help="also run the DP-SGD baseline")
    p.add_argument("--no-wall-time", action="store_true", help="write wall_ms as 0 for byte-stable output")


_FLAG_FIELDS = {"problem": "problem", "d": "d", "M": "M", "N": "N", "R": "R", "K": "K", "eps": "eps",
                "delta": "delta", "delta_err": "delta_err", "gamma": "gamma", "eta": "eta",
                "center_tol": "center_tol", "seed": "seeds", "out": "out", "transcripts": "transcripts"}


def config_from_args(args):
    cfg = read_config(args.config) if args.config else ExperimentConfig()
    changes = {f: getattr(args, a) for a, f in _FLAG_FIELDS.items() if getattr(args, a) is not None}
    if args.override_n_floor:
        changes["override_n_floor"] = True
    if args.baseline:
        changes["baseline"] = True
    if args.no_wall_time:
        changes["wall_time"] = False
    return validate_config(cfg.replace(**changes))


def build_parser():
    parser = argparse.ArgumentParser(prog="charter", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    _add_experiment_flags(sub.add_parser("run", help="run CHARTER once per seed"))
    _add_experiment_flags(sub.add_parser("sweep", help="grid of runs from the sweep.* config axes"))
    _add_experiment_flags(sub.add_parser("validate-params", help="print derived parameters and the ledger"))
    b = sub.add_parser("bench-vaidya", help="deterministic cutting-plane benchmark")
    b.add_argument("--d", type=int, nargs="+", default=[2, 3, 4])
    b.add_argument("--iters", type=int, default=300)
    b.add_argument("--gamma", type=float, default=0.05)
    b.add_argument("--eta", type=float, default=0.9)
    b.add_argument("--seed", type=int, action="append")
    b.add_argument("--out")
    b.add_argument("--no-wall-time", action="store_true")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        if args.command == "bench-vaidya":
            if args.out:
                with open(args.out, "w", newline="") as fh:
                    return cmd_bench_vaidya(args, fh)
            return cmd_bench_vaidya(args)
        cfg = config_from_args(args)
        if args.command == "run":
            return cmd_run(cfg)
        if args.command == "sweep":
            return cmd_sweep(cfg)
        return cmd_validate_params(cfg)
    except CharterError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

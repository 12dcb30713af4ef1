"""Multi-trial benchmark protocol, checkpoint statistics and CSV output.

For each (problem, trial) a single trial seed is derived from the master
seed and shared by every algorithm, so the initial proposal and the first
population are identical across algorithms. After that the runs diverge
because their proposals differ.
"""

import csv
import io
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from . import _rng
from .ce_core import CEConfig, TrialResult, default_checkpoints, run_ce
from .crossval import CandidateGrid, check_grid, run_plmco_ce
from .distributions import Smoothing
from .objectives import make_problem

RAW_HEADER = ["problem", "algorithm", "trial", "evals", "best_g", "kappa_sel", "k_sel"]
AGG_HEADER = ["problem", "algorithm", "evals", "mean", "ci95", "median", "min", "max"]


@dataclass(frozen=True)
class Algorithm:
    name: str
    model: str
    kappa: float = 0.10
    n_components: int = 1
    cv: bool = False


ALGORITHMS = {
    "CES05": Algorithm("CES05", "single", 0.05),
    "CES10": Algorithm("CES10", "single", 0.10),
    "CES15": Algorithm("CES15", "single", 0.15),
    "CEM05": Algorithm("CEM05", "mixture", 0.05, 3),
    "CEM10": Algorithm("CEM10", "mixture", 0.10, 3),
    "CEM15": Algorithm("CEM15", "mixture", 0.15, 3),
    "CESX": Algorithm("CESX", "single", cv=True),
    "CEMX": Algorithm("CEMX", "mixture", n_components=3, cv=True),
}


@dataclass(frozen=True)
class BenchSettings:
    """Run-wide knobs. ``pop_size``/``budget`` of None mean 50*d and 2e4*d."""

    pop_size: int = None
    budget: int = None
    smoothing: Smoothing = Smoothing()
    kappas: tuple = (0.05, 0.10, 0.15)
    component_counts: tuple = (1, 2, 3)
    folds: int = 4
    archive_window: int = 1
    n_checkpoints: int = 50

    def pop_for(self, dim):
        return self.pop_size if self.pop_size is not None else 50 * dim

    def budget_for(self, dim):
        return self.budget if self.budget is not None else 20_000 * dim


def make_run(algorithm, dim, settings):
    """CE config and (for CV algorithms) the candidate grid."""
    algo = ALGORITHMS[algorithm]
    if algo.cv:
        counts = (1,) if algo.model == "single" else tuple(settings.component_counts)
        grid = CandidateGrid(tuple(settings.kappas), counts, settings.folds)
        kappa, K = max(grid.kappas), max(counts)
    else:
        grid, kappa, K = None, algo.kappa, algo.n_components
    cfg = CEConfig(pop_size=settings.pop_for(dim), kappa=kappa, model=algo.model, n_components=K,
                   smoothing=settings.smoothing, max_evals=settings.budget_for(dim),
                   archive_window=settings.archive_window)
    return cfg, grid


def validate(problems, algorithms, settings):
    """All configuration violations as readable strings."""
    errs = []
    for name in algorithms:
        if name not in ALGORITHMS:
            errs.append(f"unknown algorithm {name!r}; valid: {', '.join(ALGORITHMS)}")
    for pname in problems:
        try:
            prob = make_problem(pname)
        except ValueError as exc:
            errs.append(str(exc))
            continue
        for name in algorithms:
            if name not in ALGORITHMS:
                continue
            cfg, grid = make_run(name, prob.dim, settings)
            if grid is None:
                errs += [f"{name} on {prob.key}: {e}" for e in cfg.problems(prob.dim)]
            else:
                base = replace(cfg, kappa=max(grid.kappas)).problems(prob.dim)
                errs += [f"{name} on {prob.key}: {e}" for e in base + check_grid(grid, cfg, prob.dim)]
    return errs


def trial_seed(master_seed, problem_key, trial):
    return _rng.derive_seed(master_seed, _rng.stable_hash(problem_key), trial)


def checkpoints_for(dim, settings):
    return default_checkpoints(settings.pop_for(dim), settings.budget_for(dim), settings.n_checkpoints)


def run_one(problem_name, algorithm, trial, master_seed, settings):
    prob = make_problem(problem_name)
    cfg, grid = make_run(algorithm, prob.dim, settings)
    seed = trial_seed(master_seed, prob.key, trial)
    cps = checkpoints_for(prob.dim, settings)
    if grid is None:
        return run_ce(prob, cfg, seed, cps, algorithm, trial)
    return run_plmco_ce(prob, cfg, grid, seed, cps, algorithm, trial)


def _run_packed(args):
    return run_one(*args)


def worker_count(threads=None):
    """Workers from the argument or ``MCO_CE_THREADS`` (0 = all cores)."""
    if threads is None:
        threads = int(os.environ.get("MCO_CE_THREADS", "0") or 0)
    return threads if threads > 0 else (os.cpu_count() or 1)


def run_benchmark(problems, algorithms, trials, master_seed, settings=BenchSettings(), threads=None):
    """Run every (problem, algorithm, trial); results ordered by
    (problem, algorithm, trial) regardless of scheduling."""
    if not problems or not algorithms or trials < 1:
        raise ValueError("need at least one problem, one algorithm and one trial")
    jobs = [(p, a, t, master_seed, settings) for p in problems for a in algorithms for t in range(trials)]
    workers = min(worker_count(threads), len(jobs))
    if workers <= 1:
        results = [_run_packed(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            results = list(ex.map(_run_packed, jobs, chunksize=1))
    return sorted(results, key=lambda r: (r.problem, r.algorithm, r.trial))


@dataclass(frozen=True, eq=False)
class AggregateStats:
    problem: str
    algorithm: str
    evals: np.ndarray
    mean: np.ndarray
    ci95: np.ndarray
    median: np.ndarray
    min: np.ndarray
    max: np.ndarray
    n: int


def align(result, checkpoints):
    """best_g at each checkpoint, carrying the last value forward (NaN before
    the first record)."""
    evals = result.column("evals")
    best = result.column("best_g")
    idx = np.searchsorted(evals, np.asarray(checkpoints), side="right") - 1
    out = np.where(idx >= 0, best[np.clip(idx, 0, None)], np.nan)
    return out


def aggregate(results, g_star, checkpoints):
    """Per-algorithm statistics of ``best_g - g_star`` on the checkpoint grid.

    With ``g_star=None`` the raw best_g is summarized. The 95% half-width is
    ``1.96 * s / sqrt(n)`` with the sample standard deviation (0 for n=1).
    """
    if not results:
        raise ValueError("no results to aggregate")
    offset = 0.0 if g_star is None else float(g_star)
    groups = {}
    for r in results:
        groups.setdefault((r.problem, r.algorithm), []).append(r)
    cps = np.asarray(checkpoints)
    out = {}
    for (prob, algo), rs in sorted(groups.items()):
        M = np.vstack([align(r, cps) for r in rs]) - offset
        n = M.shape[0]
        sd = M.std(axis=0, ddof=1) if n > 1 else np.zeros(M.shape[1])
        out[(prob, algo)] = AggregateStats(prob, algo, cps.copy(), M.mean(axis=0), 1.96 * sd / np.sqrt(n),
                                           np.median(M, axis=0), M.min(axis=0), M.max(axis=0), n)
    return out


def _num(v):
    return format(float(v), ".17g")


def raw_rows(results):
    rows = []
    for r in sorted(results, key=lambda r: (r.problem, r.algorithm, r.trial)):
        for s in r.series:
            rows.append([r.problem, r.algorithm, str(r.trial), str(int(s.evals)), _num(s.best_g),
                         _num(s.kappa_sel), str(int(s.k_sel))])
    return rows


def agg_rows(stats):
    rows = []
    for key in sorted(stats):
        s = stats[key]
        for i in range(len(s.evals)):
            rows.append([s.problem, s.algorithm, str(int(s.evals[i]))]
                        + [_num(getattr(s, f)[i]) for f in ("mean", "ci95", "median", "min", "max")])
    return rows


def _write(path, header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(buf.getvalue())


def write_csv(path, results=None, stats=None):
    """Write raw trial series or aggregate statistics (pass exactly one)."""
    if (results is None) == (stats is None):
        raise ValueError("pass either results or stats")
    if results is not None:
        _write(path, RAW_HEADER, raw_rows(results))
    else:
        _write(path, AGG_HEADER, agg_rows(stats))


def read_aggregate_csv(path):
    """Read an aggregate CSV back into ``{(problem, algorithm): AggregateStats}``."""
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        missing = [c for c in AGG_HEADER if c not in (reader.fieldnames or [])]
        if missing:
            raise ValueError(f"aggregate CSV is missing columns: {', '.join(missing)}")
        rows = list(reader)
    groups = {}
    for row in rows:
        groups.setdefault((row["problem"], row["algorithm"]), []).append(row)
    out = {}
    for key, rs in groups.items():
        col = {f: np.array([float(r[f]) for r in rs]) for f in AGG_HEADER[2:]}
        out[key] = AggregateStats(key[0], key[1], col["evals"], col["mean"], col["ci95"], col["median"],
                                  col["min"], col["max"], n=0)
    return out

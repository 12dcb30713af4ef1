"""Cross-validated CE (PLMCO-CE).

Each iteration splits the pooled samples into k folds. For every candidate
(elite fraction, component count) it refits the proposal on k-1 folds with
the ordinary CE update and scores the refit on the held-out fold by the
importance-weighted mean of G,

    (1/m) * sum_i  q_hat(x_i) / q_gen(x_i) * G(x_i),

where q_gen is the distribution that actually generated x_i. Within each
component count the best elite fraction wins (ties: larger fraction); across
counts the lowest best score wins (ties: fewer components). The winner is
then refit on all pooled samples, with smoothing.

CV refits are not smoothed: smoothing mixes the same previous proposal into
every candidate and would only damp the score differences.
"""

import dataclasses
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np

from . import _rng
from .ce_core import (
    RATIO_CAP,
    ConfigError,
    TrialResult,
    _advance,
    at_checkpoints,
    draw_population,
    elite_indices,
    elite_weights,
    fit_model,
    n_elite,
    pooled,
    run_loop,
    select_elite,
    update_params,
)

NEAR_ZERO_RATIO = 1e-12


@dataclass(frozen=True)
class CandidateGrid:
    kappas: Tuple[float, ...] = (0.05, 0.10, 0.15)
    component_counts: Tuple[int, ...] = (1,)
    folds: int = 4

    def candidates(self):
        return [(kappa, K) for K in self.component_counts for kappa in self.kappas]


CESX_GRID = CandidateGrid((0.05, 0.10, 0.15), (1,))
CEMX_GRID = CandidateGrid((0.05, 0.10, 0.15), (1, 2, 3))


@dataclass(frozen=True, eq=False)
class FoldSpec:
    k: int
    assignment: np.ndarray

    def heldout(self, j):
        return np.flatnonzero(self.assignment == j)

    def train(self, j):
        return np.flatnonzero(self.assignment != j)

    def sizes(self):
        return np.bincount(self.assignment, minlength=self.k)


def kfold_partition(n, k, rng):
    """Random partition of ``range(n)`` into k folds whose sizes differ by at most one."""
    if k < 1:
        raise ValueError("k must be >= 1")
    if n < k:
        raise ValueError(f"cannot split {n} samples into {k} folds")
    assignment = np.empty(n, dtype=np.int64)
    assignment[rng.permutation(n)] = np.arange(n) % k
    return FoldSpec(k, assignment)


@dataclass(frozen=True)
class ScoreDiagnostics:
    n: int
    n_capped: int
    n_near_zero: int


def heldout_score(theta, heldout, return_diagnostics=False):
    """Importance-weighted held-out estimate of ``E_theta[G]``, normalized by
    the number of held-out samples. Ratios are capped at 1e12."""
    if len(heldout) == 0:
        raise ValueError("empty held-out set")
    log_ratio = theta.logpdf(heldout.x) - heldout.gen_logpdf
    ratio = np.exp(np.minimum(log_ratio, np.log(RATIO_CAP)))
    score = float(np.mean(ratio * heldout.g))
    if not return_diagnostics:
        return score
    diag = ScoreDiagnostics(len(heldout), int(np.sum(log_ratio > np.log(RATIO_CAP))),
                            int(np.sum(ratio < NEAR_ZERO_RATIO)))
    return score, diag


@dataclass
class CandidateScore:
    kappa: float
    K: int
    feasible: bool
    fold_scores: Optional[np.ndarray] = None
    n_capped: int = 0
    n_near_zero: int = 0
    n_reduced: int = 0

    @property
    def mean(self):
        return None if self.fold_scores is None else float(np.mean(self.fold_scores))


def candidate_feasible(n, kappa, folds, dim):
    """Every training split must yield at least dim + 1 elites."""
    smallest_train = n - int(folds.sizes().max())
    return n_elite(smallest_train, kappa) >= dim + 1


def cv_evaluate_candidate(pool, kappa, K, folds, model, seed, t, tag=0):
    """Mean held-out score of one (kappa, K) candidate over the folds.

    ``tag`` keys the EM substreams so candidates fit independently.
    """
    if folds.k < 2:
        raise ValueError("cross-validation needs at least 2 folds")
    dim = pool.x.shape[1]
    out = CandidateScore(float(kappa), int(K), candidate_feasible(len(pool), kappa, folds, dim))
    if not out.feasible:
        return out
    scores = np.empty(folds.k)
    for j in range(folds.k):
        train = pool.take(folds.train(j))
        idx, _ = elite_indices(train.g, kappa)
        X = train.x[idx]
        rng = _rng.substream(seed, t, _rng.CV_FIT, tag, j)
        theta_hat = fit_model(X, np.ones(len(idx)), model, K, rng)
        if theta_hat.n_components < K:
            out.n_reduced += 1
        scores[j], diag = heldout_score(theta_hat, pool.take(folds.heldout(j)), return_diagnostics=True)
        out.n_capped += diag.n_capped
        out.n_near_zero += diag.n_near_zero
    out.fold_scores = scores
    return out


def pick_winner(means):
    """Two-stage selection from ``{(kappa, K): mean score}``.

    Per K the lowest score wins, ties to the larger kappa; across K the
    lowest per-K best wins, ties to the smaller K. Returns None when empty.
    """
    best_per_k = {}
    for (kappa, K), s in means.items():
        cur = best_per_k.get(K)
        if cur is None or s < cur[1] or (s == cur[1] and kappa > cur[0]):
            best_per_k[K] = (kappa, s)
    winner = None
    for K in sorted(best_per_k):
        kappa, s = best_per_k[K]
        if winner is None or s < winner[2]:
            winner = (kappa, K, s)
    return None if winner is None else (winner[0], winner[1])


@dataclass
class CVReport:
    candidates: List[CandidateScore]
    winner: Tuple[float, int]
    fallback: bool = False

    @property
    def means(self):
        return {(c.kappa, c.K): c.mean for c in self.candidates if c.feasible}


def cv_select(pool, grid, folds, model, seed, t):
    """Score every grid candidate and pick the winner.

    If nothing is feasible, fall back to (largest kappa, K=1) and flag it.
    """
    cands = [cv_evaluate_candidate(pool, kappa, K, folds, model, seed, t, tag=i)
             for i, (kappa, K) in enumerate(grid.candidates())]
    means = {(c.kappa, c.K): c.mean for c in cands if c.feasible}
    winner = pick_winner(means)
    if winner is None:
        return CVReport(cands, (max(grid.kappas), 1), fallback=True)
    return CVReport(cands, winner)


def check_grid(grid, cfg, dim):
    errs = []
    if not grid.kappas or not grid.component_counts:
        errs.append("candidate grid is empty")
    if grid.folds < 2:
        errs.append(f"cross-validation needs >= 2 folds (got {grid.folds})")
    if any(not 0 < k < 1 for k in grid.kappas):
        errs.append(f"grid kappas must lie in (0, 1): {grid.kappas}")
    if any(K < 1 for K in grid.component_counts):
        errs.append(f"component counts must be >= 1: {grid.component_counts}")
    if cfg.model == "single" and tuple(grid.component_counts) != (1,):
        errs.append("a single-Gaussian model needs component_counts == (1,)")
    if cfg.pop_size * cfg.archive_window < grid.folds:
        errs.append("fewer pooled samples than folds")
    return errs


def plmco_ce_step(state, problem, cfg, grid, reports=None):
    """One PLMCO-CE iteration; appends the CVReport to ``reports`` if given."""
    pop, proposal = draw_population(state, problem, cfg)
    pool = pooled(state, pop, cfg.archive_window)
    folds = kfold_partition(len(pool), grid.folds, _rng.substream(state.seed, state.t, _rng.FOLDS))
    report = cv_select(pool, grid, folds, cfg.model, state.seed, state.t)
    kappa, K = report.winner
    elite, gamma = select_elite(pool, kappa)
    rng = _rng.substream(state.seed, state.t, _rng.FIT)
    theta = update_params(state.theta, elite.x, elite_weights(elite, "ce_unity"), cfg.model, K,
                          cfg.smoothing, state.t + 1, rng)
    if reports is not None:
        reports.append(report)
    return _advance(state, pop, proposal, theta, gamma, kappa, K, cfg.archive_window)


def run_plmco_ce(problem, cfg, grid, seed, checkpoints=None, algorithm="PLMCO", trial=0, reports=None):
    # cfg.kappa is unused here; check the base settings at the largest grid kappa
    errs = dataclasses.replace(cfg, kappa=max(grid.kappas)).problems(problem.dim)
    errs += check_grid(grid, cfg, problem.dim)
    if errs:
        raise ConfigError("; ".join(errs))
    state, _ = run_loop(problem, cfg, seed, lambda s, p: plmco_ce_step(s, p, cfg, grid, reports))
    return TrialResult(algorithm, problem.key, trial, at_checkpoints(state.history, checkpoints))

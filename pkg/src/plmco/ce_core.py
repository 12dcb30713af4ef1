"""Cross-entropy method for continuous minimization.

One iteration draws a population from the current proposal, keeps the best
``ceil(kappa * n)`` samples, refits the proposal to those elites (single
Gaussian: weighted mean/covariance; mixture: weighted EM), and smooths the
refit toward the previous proposal.

Randomness follows a keyed-substream discipline (see ``_rng``): the
population at iteration ``t`` depends only on ``(seed, t)`` and the current
proposal, never on how many random numbers other steps consumed.
"""

import dataclasses
import json
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np

from . import _rng
from .distributions import (
    GaussianParams,
    MixtureParams,
    Smoothing,
    em_fit_mixture,
    smooth_update,
    weighted_gaussian_mle,
)
from .objectives import EvalCounter

RATIO_CAP = 1e12


class ConfigError(ValueError):
    pass


class BudgetExhausted(RuntimeError):
    pass


@dataclass(frozen=True)
class CEConfig:
    """Settings for one CE run.

    ``model`` is ``"single"`` or ``"mixture"``; ``n_components`` is used by
    fixed-kappa mixture runs.
    """

    pop_size: int
    kappa: float = 0.10
    model: str = "single"
    n_components: int = 1
    smoothing: Smoothing = Smoothing()
    max_evals: int = 10_000
    archive_window: int = 1

    def problems(self, dim):
        """List every violated constraint for a problem of dimension ``dim``."""
        out = []
        if self.pop_size < 2:
            out.append(f"pop_size must be >= 2 (got {self.pop_size})")
        if not 0.0 < self.kappa < 1.0:
            out.append(f"kappa must lie in (0, 1) (got {self.kappa})")
        elif self.pop_size >= 2 and n_elite(self.pop_size, self.kappa) < dim + 1:
            out.append(f"ceil(kappa * pop_size) = {n_elite(self.pop_size, self.kappa)} elites "
                       f"is below dim + 1 = {dim + 1}")
        if self.model not in ("single", "mixture"):
            out.append(f"model must be 'single' or 'mixture' (got {self.model!r})")
        if self.n_components < 1 or (self.model == "single" and self.n_components != 1):
            out.append(f"invalid n_components {self.n_components} for model {self.model!r}")
        if self.max_evals < self.pop_size:
            out.append(f"max_evals {self.max_evals} is below pop_size {self.pop_size}")
        if self.archive_window < 1:
            out.append("archive_window must be >= 1")
        s = self.smoothing
        if not (0 <= s.alpha <= 1 and 0 <= s.beta <= 1 and s.q >= 0):
            out.append(f"smoothing constants out of range: {s}")
        return out

    def validate(self, dim):
        errs = self.problems(dim)
        if errs:
            raise ConfigError("; ".join(errs))


def n_elite(n, kappa):
    # the epsilon keeps e.g. 0.15 * 100 from rounding up to 16
    return max(1, math.ceil(kappa * n - 1e-9))


@dataclass(frozen=True, eq=False)
class TaggedSamples:
    """Evaluated points with the id and log-density of their generator."""

    x: np.ndarray
    g: np.ndarray
    gen_id: np.ndarray
    gen_logpdf: np.ndarray

    def __len__(self):
        return self.g.shape[0]

    def take(self, idx):
        return TaggedSamples(self.x[idx], self.g[idx], self.gen_id[idx], self.gen_logpdf[idx])

    @staticmethod
    def concat(parts):
        parts = list(parts)
        if len(parts) == 1:
            return parts[0]
        return TaggedSamples(*(np.concatenate([getattr(p, f) for p in parts])
                               for f in ("x", "g", "gen_id", "gen_logpdf")))


@dataclass(frozen=True)
class StepRecord:
    evals: int
    best_g: float
    gamma: float
    kappa_sel: float
    k_sel: int


@dataclass(frozen=True, eq=False)
class CEState:
    seed: int
    t: int
    theta: object
    initial: GaussianParams
    archive: Tuple[TaggedSamples, ...] = ()
    generators: Dict[int, object] = field(default_factory=dict)
    best_x: Optional[np.ndarray] = None
    best_g: float = math.inf
    gamma: float = math.nan
    evals_used: int = 0
    history: Tuple[StepRecord, ...] = ()


def initial_gaussian(problem):
    center = 0.5 * (problem.lower + problem.upper)
    half = 0.5 * (problem.upper - problem.lower)
    return GaussianParams.create(center, np.diag(half ** 2))


def init_state(problem, cfg, seed):
    """Starting state.

    The first population always comes from the region-centered Gaussian so
    every algorithm sees the same initial samples. For mixtures, the
    components of theta_0 sit at uniform random points of the region and
    share the region covariance.
    """
    g0 = initial_gaussian(problem)
    if cfg.model == "single":
        theta = g0
    else:
        rng = _rng.substream(seed, 0, _rng.INIT)
        K = cfg.n_components
        centers = rng.uniform(problem.lower, problem.upper, size=(K, problem.dim))
        theta = MixtureParams.create(np.full(K, 1.0 / K),
                                     [GaussianParams.create(c, g0.cov) for c in centers])
    return CEState(seed=int(seed), t=0, theta=theta, initial=g0)


def draw_population(state, problem, cfg):
    """Sample and evaluate one population; returns ``(samples, proposal)``."""
    if state.evals_used + cfg.pop_size > cfg.max_evals:
        raise BudgetExhausted(f"{state.evals_used} + {cfg.pop_size} exceeds budget {cfg.max_evals}")
    proposal = state.initial if state.t == 0 else state.theta
    rng = _rng.substream(state.seed, state.t, _rng.POPULATION)
    X = proposal.sample(cfg.pop_size, rng)
    g = problem.evaluate(X)
    lp = proposal.logpdf(X)
    ids = np.full(cfg.pop_size, state.t, dtype=np.int64)
    return TaggedSamples(X, g, ids, lp), proposal


def elite_indices(g, kappa):
    """Indices of the ``ceil(kappa * n)`` smallest values (stable on ties) and gamma."""
    g = np.asarray(g)
    idx = np.argsort(g, kind="stable")[: n_elite(len(g), kappa)]
    return idx, float(g[idx[-1]])


def select_elite(samples, kappa):
    if len(samples) == 0:
        raise ValueError("no samples to select from")
    idx, gamma = elite_indices(samples.g, kappa)
    return samples.take(idx), gamma


def elite_weights(elite, mode="ce_unity"):
    """Fitting weights for elites.

    ``ce_unity`` gives every elite weight one. ``likelihood_ratio`` divides
    the (unit) indicator by the generating density, capped at 1e12.
    """
    if mode == "ce_unity":
        return np.ones(len(elite))
    if mode == "likelihood_ratio":
        return np.minimum(np.exp(-elite.gen_logpdf), RATIO_CAP)
    raise ValueError(f"unknown weighting mode {mode!r}")


def fit_model(X, w, model, K, rng):
    if model == "single":
        return weighted_gaussian_mle(X, w)
    return em_fit_mixture(X, w, K, rng)


def update_params(theta, X, w, model, K, smoothing, t, rng):
    """Refit to weighted elites and smooth toward ``theta`` at iteration ``t`` (>= 1)."""
    return smooth_update(theta, fit_model(X, w, model, K, rng), t, smoothing)


def _advance(state, pop, proposal, theta, gamma, kappa, k, window):
    archive = (state.archive + (pop,))[-window:]
    keep = {int(a.gen_id[0]) for a in archive}
    generators = {i: p for i, p in state.generators.items() if i in keep}
    generators[state.t] = proposal
    j = int(np.argmin(pop.g))
    best_x, best_g = state.best_x, state.best_g
    if pop.g[j] < best_g:
        best_x, best_g = pop.x[j].copy(), float(pop.g[j])
    evals = state.evals_used + len(pop)
    rec = StepRecord(evals, best_g, gamma, float(kappa), int(k))
    return dataclasses.replace(state, t=state.t + 1, theta=theta, archive=archive,
                               generators=generators, best_x=best_x, best_g=best_g,
                               gamma=gamma, evals_used=evals, history=state.history + (rec,))


def pooled(state, pop, window):
    """The new population plus archived populations within the window."""
    return TaggedSamples.concat((state.archive + (pop,))[-window:])


def ce_step(state, problem, cfg):
    pop, proposal = draw_population(state, problem, cfg)
    pool = pooled(state, pop, cfg.archive_window)
    elite, gamma = select_elite(pool, cfg.kappa)
    w = elite_weights(elite, "ce_unity")
    rng = _rng.substream(state.seed, state.t, _rng.FIT)
    theta = update_params(state.theta, elite.x, w, cfg.model, cfg.n_components,
                          cfg.smoothing, state.t + 1, rng)
    return _advance(state, pop, proposal, theta, gamma, cfg.kappa, cfg.n_components,
                    cfg.archive_window)


@dataclass(frozen=True)
class TrialResult:
    algorithm: str
    problem: str
    trial: int
    series: Tuple[StepRecord, ...]

    def column(self, name):
        return np.array([getattr(r, name) for r in self.series])


def default_checkpoints(pop_size, budget, n=50):
    """About ``n`` geometrically spaced eval counts from pop_size to the
    budget, snapped down to whole iterations."""
    last = (budget // pop_size) * pop_size
    raw = np.geomspace(pop_size, last, n)
    snapped = np.unique((np.floor(raw / pop_size + 1e-9) * pop_size).astype(np.int64))
    snapped = snapped[snapped >= pop_size]
    if snapped[-1] != last:
        snapped = np.append(snapped, last)
    return [int(c) for c in snapped]


def at_checkpoints(history, checkpoints):
    """Last record at or before each checkpoint, without duplicates."""
    if checkpoints is None:
        return tuple(history)
    evals = np.array([r.evals for r in history])
    out = []
    for c in checkpoints:
        i = int(np.searchsorted(evals, c, side="right")) - 1
        if i >= 0 and (not out or out[-1] is not history[i]):
            out.append(history[i])
    return tuple(out)


def run_loop(problem, cfg, seed, step, state=None):
    counter = EvalCounter(problem)
    state = init_state(problem, cfg, seed) if state is None else state
    while state.evals_used + cfg.pop_size <= cfg.max_evals:
        state = step(state, counter)
    return state, counter


def run_ce(problem, cfg, seed, checkpoints=None, algorithm="CE", trial=0):
    """Run fixed-kappa CE until the budget is spent."""
    cfg.validate(problem.dim)
    state, _ = run_loop(problem, cfg, seed, lambda s, p: ce_step(s, p, cfg))
    return TrialResult(algorithm, problem.key, trial, at_checkpoints(state.history, checkpoints))


# -- persistence ---------------------------------------------------------------

def _params_to_dict(p):
    if isinstance(p, GaussianParams):
        return {"kind": "gaussian", "mean": p.mean.tolist(), "cov": p.cov.tolist(), "chol": p.chol.tolist()}
    return {"kind": "mixture", "weights": p.weights.tolist(),
            "components": [_params_to_dict(c) for c in p.components]}


def _params_from_dict(d):
    if d["kind"] == "gaussian":
        return GaussianParams._frozen(np.array(d["mean"]), np.array(d["cov"]), np.array(d["chol"]))
    w = np.array(d["weights"])
    w.setflags(write=False)
    return MixtureParams(w, tuple(_params_from_dict(c) for c in d["components"]))


def _samples_to_dict(s):
    return {"x": s.x.tolist(), "g": s.g.tolist(), "gen_id": s.gen_id.tolist(),
            "gen_logpdf": s.gen_logpdf.tolist()}


def _samples_from_dict(d, dim):
    return TaggedSamples(np.array(d["x"], dtype=float).reshape(-1, dim), np.array(d["g"], dtype=float),
                         np.array(d["gen_id"], dtype=np.int64), np.array(d["gen_logpdf"], dtype=float))


def state_to_json(state):
    """Serialize a state; floats are written with ``repr`` so the round trip is exact."""
    return json.dumps({
        "seed": state.seed, "t": state.t,
        "theta": _params_to_dict(state.theta), "initial": _params_to_dict(state.initial),
        "archive": [_samples_to_dict(a) for a in state.archive],
        "generators": {str(k): _params_to_dict(v) for k, v in state.generators.items()},
        "best_x": None if state.best_x is None else state.best_x.tolist(),
        "best_g": state.best_g, "gamma": state.gamma, "evals_used": state.evals_used,
        "history": [dataclasses.astuple(r) for r in state.history],
    })


def state_from_json(text):
    d = json.loads(text)
    initial = _params_from_dict(d["initial"])
    return CEState(
        seed=d["seed"], t=d["t"], theta=_params_from_dict(d["theta"]), initial=initial,
        archive=tuple(_samples_from_dict(a, initial.dim) for a in d["archive"]),
        generators={int(k): _params_from_dict(v) for k, v in d["generators"].items()},
        best_x=None if d["best_x"] is None else np.array(d["best_x"]),
        best_g=d["best_g"], gamma=d["gamma"], evals_used=d["evals_used"],
        history=tuple(StepRecord(*r) for r in d["history"]),
    )

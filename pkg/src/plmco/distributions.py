"""Gaussian and Gaussian-mixture proposal distributions.

Both classes are immutable. Fitting routines take points as an ``(n, d)``
array with a matching ``(n,)`` array of nonnegative weights, and an explicit
``numpy.random.Generator`` wherever randomness is involved.
"""

from dataclasses import dataclass, field
from typing import List

import numpy as np
from scipy.linalg import solve_triangular

JITTER_FLOOR = 1e-12
JITTER_REL = 1e-10
JITTER_RETRIES = 3

EM_MAX_ITER = 200
EM_TOL = 1e-8
EM_MIN_WEIGHT = 1e-6

_LOG_2PI = np.log(2.0 * np.pi)


def _logsumexp_rows(a):
    # rows always hold at least one finite entry (component log-densities)
    m = a.max(axis=1)
    return m + np.log(np.sum(np.exp(a - m[:, None]), axis=1))


class InvalidDistributionError(ValueError):
    """Parameters are non-finite or cannot be made positive definite."""


class EmptyFitError(ValueError):
    """All fitting weights are zero."""


def _jitter(cov):
    d = cov.shape[0]
    return max(JITTER_FLOOR, JITTER_REL * float(np.trace(cov)) / d)


def _factor(cov, force_jitter):
    """Cholesky-factor ``cov``, adding jitter when forced or when needed.

    Returns the (possibly regularized) covariance and its lower factor.
    """
    d = cov.shape[0]
    if not force_jitter:
        try:
            return cov, np.linalg.cholesky(cov)
        except np.linalg.LinAlgError:
            pass
    lam = _jitter(cov)
    eye = np.eye(d)
    for _ in range(JITTER_RETRIES + 1):
        reg = cov + lam * eye
        try:
            return reg, np.linalg.cholesky(reg)
        except np.linalg.LinAlgError:
            lam *= 10.0
    raise InvalidDistributionError("covariance is not positive definite after regularization")


def regularize_covariance(cov):
    """Symmetrize and add the jitter ``max(1e-12, 1e-10 * trace / d) * I``.

    Returns ``(covariance, cholesky_factor)``.
    """
    cov = np.asarray(cov, dtype=float)
    cov = 0.5 * (cov + cov.T)
    if not np.all(np.isfinite(cov)):
        raise InvalidDistributionError("non-finite covariance")
    return _factor(cov, force_jitter=True)


@dataclass(frozen=True, eq=False)
class GaussianParams:
    """Multivariate normal with a cached lower Cholesky factor.

    Build instances with :meth:`create`; it validates, symmetrizes and
    factors the covariance.
    """

    mean: np.ndarray
    cov: np.ndarray
    chol: np.ndarray

    @classmethod
    def create(cls, mean, cov):
        mean = np.array(mean, dtype=float).reshape(-1)
        cov = np.array(cov, dtype=float)
        if cov.ndim == 0:
            cov = cov.reshape(1, 1)
        d = mean.shape[0]
        if cov.shape != (d, d):
            raise InvalidDistributionError(f"covariance shape {cov.shape} does not match dimension {d}")
        if not (np.all(np.isfinite(mean)) and np.all(np.isfinite(cov))):
            raise InvalidDistributionError("non-finite distribution parameters")
        cov = 0.5 * (cov + cov.T)
        cov, chol = _factor(cov, force_jitter=False)
        return cls._frozen(mean, cov, chol)

    @classmethod
    def _frozen(cls, mean, cov, chol):
        for a in (mean, cov, chol):
            a.setflags(write=False)
        return cls(mean, cov, chol)

    @property
    def dim(self):
        return self.mean.shape[0]

    @property
    def n_components(self):
        return 1

    def sample(self, n, rng):
        z = rng.standard_normal((n, self.dim))
        return self.mean + z @ self.chol.T

    def logpdf(self, x):
        """Log-density at one point ``(d,)`` or many points ``(n, d)``."""
        x = np.asarray(x, dtype=float)
        single = x.ndim == 1
        X = np.atleast_2d(x)
        diff = X - self.mean
        z = solve_triangular(self.chol, diff.T, lower=True, check_finite=False)
        out = (-0.5 * self.dim * _LOG_2PI - np.sum(np.log(np.diag(self.chol)))
               - 0.5 * np.sum(z * z, axis=0))
        return float(out[0]) if single else out


@dataclass(frozen=True, eq=False)
class MixtureParams:
    """Finite Gaussian mixture; weights sum to one."""

    weights: np.ndarray
    components: tuple

    @classmethod
    def create(cls, weights, components):
        w = np.array(weights, dtype=float).reshape(-1)
        components = tuple(components)
        if len(components) < 1 or w.shape[0] != len(components):
            raise InvalidDistributionError("mixture needs K >= 1 components with one weight each")
        if not np.all(np.isfinite(w)) or np.any(w < 0) or w.sum() <= 0:
            raise InvalidDistributionError("mixture weights must be finite, nonnegative and not all zero")
        dims = {c.dim for c in components}
        if len(dims) != 1:
            raise InvalidDistributionError("mixture components differ in dimension")
        w = w / w.sum()
        w.setflags(write=False)
        return cls(w, components)

    @classmethod
    def single(cls, gaussian):
        return cls.create([1.0], [gaussian])

    @property
    def dim(self):
        return self.components[0].dim

    @property
    def n_components(self):
        return len(self.components)

    def sample(self, n, rng):
        labels = rng.choice(self.n_components, size=n, p=self.weights)
        out = np.empty((n, self.dim))
        for k, comp in enumerate(self.components):
            idx = np.flatnonzero(labels == k)
            if idx.size:
                out[idx] = comp.sample(idx.size, rng)
        return out

    def component_logpdfs(self, X):
        """``(n, K)`` array of ``log w_k + log N_k(x)``."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        with np.errstate(divide="ignore"):
            logw = np.log(self.weights)
        return np.column_stack([logw[k] + c.logpdf(X) for k, c in enumerate(self.components)])

    def logpdf(self, x):
        x = np.asarray(x, dtype=float)
        single = x.ndim == 1
        out = _logsumexp_rows(self.component_logpdfs(x))
        return float(out[0]) if single else out


def as_mixture(params):
    if isinstance(params, MixtureParams):
        return params
    return MixtureParams.single(params)


# Module-level spellings of the core operations.

def sample_gaussian(params, n, rng):
    if n < 1:
        raise ValueError("n must be >= 1")
    return params.sample(n, rng)


def logpdf_gaussian(params, x):
    return params.logpdf(x)


def logpdf_mixture(params, x):
    return params.logpdf(x)


def _check_weighted(X, w):
    X = np.atleast_2d(np.asarray(X, dtype=float))
    w = np.asarray(w, dtype=float).reshape(-1)
    if X.shape[0] != w.shape[0]:
        raise ValueError("points and weights differ in length")
    if np.any(w < 0) or not np.all(np.isfinite(w)):
        raise ValueError("weights must be finite and nonnegative")
    if w.sum() <= 0:
        raise EmptyFitError("all weights are zero")
    return X, w


def _weighted_moments(X, w):
    W = w.sum()
    mean = w @ X / W
    diff = X - mean
    cov = (diff.T * w) @ diff / W
    return mean, 0.5 * (cov + cov.T)


def weighted_gaussian_mle(X, w):
    """Weighted mean and covariance, regularized.

    Parameters
    ----------
    X : array, shape (n, d)
    w : array, shape (n,)
        Nonnegative weights, not all zero.
    """
    X, w = _check_weighted(X, w)
    mean, cov = _weighted_moments(X, w)
    cov, chol = regularize_covariance(cov)
    return GaussianParams._frozen(mean, cov, chol)


@dataclass
class EMInfo:
    log_likelihood: List[float] = field(default_factory=list)
    # index into log_likelihood where a component was reseeded; the
    # likelihood is only guaranteed monotone between restarts
    restarts: List[int] = field(default_factory=list)
    n_iter: int = 0
    k_requested: int = 0
    k_used: int = 0
    converged: bool = False

    @property
    def reduced(self):
        return self.k_used < self.k_requested


def _farthest_point_init(X, w, K, rng):
    support = np.flatnonzero(w > 0)
    first = rng.choice(support, p=w[support] / w[support].sum())
    centers = [first]
    d2 = np.sum((X[support] - X[first]) ** 2, axis=1)
    for _ in range(1, K):
        nxt = support[int(np.argmax(d2))]
        centers.append(nxt)
        d2 = np.minimum(d2, np.sum((X[support] - X[nxt]) ** 2, axis=1))
    C = X[centers]
    dist = np.sum((X[:, None, :] - C[None, :, :]) ** 2, axis=2)
    resp = np.zeros((X.shape[0], K))
    resp[np.arange(X.shape[0]), np.argmin(dist, axis=1)] = 1.0
    return resp


def _m_step(X, w, resp, global_cov, rng, reseeds_left, prev=None, prev_logpdf=None):
    """Weighted M-step; reseeds degenerate components.

    With ``prev`` given (and ``prev_logpdf``, its per-component
    log-densities at X without the weights), a refit component whose jittered covariance scores
    worse on the expected complete-data log-likelihood than the previous
    component keeps the previous one. That keeps the step a (generalized)
    EM step, so the likelihood cannot drop because of the jitter.

    Returns the new mixture, whether a reseed happened, and the remaining
    reseed budget.
    """
    d = X.shape[1]
    K = resp.shape[1]
    W = w.sum()
    rw = resp * w[:, None]
    weights = rw.sum(axis=0) / W
    comps = []
    reseeded = False
    for k in range(K):
        moments = _weighted_moments(X, rw[:, k]) if weights[k] > 0 else None
        degenerate = (moments is None or weights[k] < EM_MIN_WEIGHT
                      or float(np.trace(moments[1])) <= d * JITTER_FLOOR)
        fresh = K > 1 and degenerate and reseeds_left > 0
        if fresh:
            idx = rng.choice(X.shape[0], p=w / W)
            moments = (X[idx].copy(), global_cov)
            weights[k] = max(weights[k], 1.0 / K)
            reseeded = True
            reseeds_left -= 1
        elif moments is None:
            # out of reseeds; zero-weight placeholder
            moments = (w @ X / W, global_cov)
        cov, chol = regularize_covariance(moments[1])
        comp = GaussianParams._frozen(np.array(moments[0], dtype=float), cov, chol)
        if prev is not None and not fresh:
            if rw[:, k] @ prev_logpdf[:, k] > rw[:, k] @ comp.logpdf(X):
                comp = prev.components[k]
        comps.append(comp)
    return MixtureParams.create(weights, comps), reseeded, reseeds_left


def em_fit_mixture(X, w, K, rng, init=None, max_iter=EM_MAX_ITER, tol=EM_TOL, return_info=False):
    """Fit a K-component Gaussian mixture by weighted EM.

    The objective is the weighted log-likelihood ``sum_i w_i log q(x_i)``.
    Responsibilities are seeded by nearest-center assignment to K points
    chosen by farthest-point seeding (first point drawn with probability
    proportional to weight), unless ``init`` supplies starting parameters.
    Iteration stops when the relative improvement falls below ``tol`` or
    after ``max_iter`` E-steps.

    If K exceeds the number of distinct positively-weighted points, K is
    reduced to that number; ``info.reduced`` reports it.
    """
    X, w = _check_weighted(X, w)
    if K < 1:
        raise ValueError("K must be >= 1")
    info = EMInfo(k_requested=int(K))
    pos = w > 0
    n_support = np.unique(X[pos], axis=0).shape[0]
    K = min(int(K), n_support) if init is None else init.n_components
    info.k_used = K

    _, global_cov = _weighted_moments(X, w)
    if init is None:
        resp = _farthest_point_init(X, w, K, rng)
        params, _, budget = _m_step(X, w, resp, global_cov, rng, 2 * K)
    else:
        params, budget = as_mixture(init), 2 * K

    prev = None
    while True:
        lp = params.component_logpdfs(X)
        lse = _logsumexp_rows(lp)
        ll = float(w @ lse)
        info.log_likelihood.append(ll)
        info.n_iter += 1
        if prev is not None and abs(ll - prev) <= tol * max(1.0, abs(prev)):
            info.converged = True
            break
        if info.n_iter >= max_iter:
            break
        resp = np.exp(lp - lse[:, None])
        with np.errstate(invalid="ignore", divide="ignore"):
            # NaN for zero-weight components; the comparison then keeps the refit
            comp_lp = lp - np.log(params.weights)
        params, reseeded, budget = _m_step(X, w, resp, global_cov, rng, budget, params, comp_lp)
        if reseeded:
            info.restarts.append(len(info.log_likelihood))
            prev = None
        else:
            prev = ll
    return (params, info) if return_info else params


@dataclass(frozen=True)
class Smoothing:
    """Dynamic smoothing constants.

    ``alpha`` blends means and mixture weights; the covariance blend
    coefficient decays as ``beta - beta * (1 - 1/t) ** q``.
    """

    alpha: float = 0.9
    beta: float = 0.9
    q: float = 5.0

    def beta_at(self, t):
        if t < 1:
            raise ValueError("smoothing iteration t must be >= 1")
        return self.beta - self.beta * (1.0 - 1.0 / t) ** self.q


def _match_components(old, fitted):
    """For each fitted component, the index of the old component it pairs with.

    Greedy: repeatedly pair the closest unmatched means. Leftover fitted
    components (when fitted has more) pair with their nearest old one.
    """
    om = np.array([c.mean for c in old.components])
    fm = np.array([c.mean for c in fitted.components])
    dist = np.sum((fm[:, None, :] - om[None, :, :]) ** 2, axis=2)
    match = [-1] * len(fm)
    used_f, used_o = set(), set()
    order = np.argsort(dist, axis=None, kind="stable")
    for flat in order:
        i, j = divmod(int(flat), len(om))
        if i in used_f or j in used_o:
            continue
        match[i] = j
        used_f.add(i)
        used_o.add(j)
        if len(used_f) == len(fm) or len(used_o) == len(om):
            break
    for i in range(len(fm)):
        if match[i] < 0:
            match[i] = int(np.argmin(dist[i]))
    return match


def _blend_gaussian(old, fitted, a, b):
    mean = a * fitted.mean + (1.0 - a) * old.mean
    cov = b * fitted.cov + (1.0 - b) * old.cov
    return GaussianParams.create(mean, cov)


def smooth_update(old, fitted, t, smoothing=Smoothing()):
    """Blend ``fitted`` parameters toward ``old``; the result has fitted's kind.

    When both are mixtures of the same size each fitted component is blended
    with its greedily matched old component and the weights are blended with
    ``alpha``. When the component counts differ, unmatched fitted components
    reuse their nearest old component.
    """
    a = smoothing.alpha
    b = smoothing.beta_at(t)
    if isinstance(fitted, GaussianParams) and isinstance(old, GaussianParams):
        return _blend_gaussian(old, fitted, a, b)
    old_m = as_mixture(old)
    fit_m = as_mixture(fitted)
    if old_m.dim != fit_m.dim:
        raise ValueError("cannot smooth distributions of different dimension")
    match = _match_components(old_m, fit_m)
    comps = [_blend_gaussian(old_m.components[j], c, a, b) for c, j in zip(fit_m.components, match)]
    weights = a * fit_m.weights + (1.0 - a) * old_m.weights[match]
    out = MixtureParams.create(weights / weights.sum(), comps)
    if isinstance(fitted, GaussianParams):
        return out.components[0]
    return out

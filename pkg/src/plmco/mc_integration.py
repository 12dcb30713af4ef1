"""Importance-sampled integration, the variance-optimal 1-D proposal,
the empirical bias/variance split, and naive Monte Carlo optimization.
"""

from dataclasses import dataclass

import numpy as np


class InvalidProposalError(ValueError):
    """A proposal assigned zero density to a point it generated."""


@dataclass(frozen=True)
class Uniform1D:
    low: float = 0.0
    high: float = 1.0

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        inside = (x >= self.low) & (x <= self.high)
        return np.where(inside, 1.0 / (self.high - self.low), 0.0)

    def sample(self, m, rng):
        return rng.uniform(self.low, self.high, size=m)


class PiecewiseConstantDensity:
    """Density constant on each cell of a uniform grid, sampled by inverse CDF."""

    def __init__(self, edges, probs):
        self.edges = np.asarray(edges, dtype=float)
        self.probs = np.asarray(probs, dtype=float) / np.sum(probs)
        self.width = np.diff(self.edges)
        self._cdf = np.concatenate([[0.0], np.cumsum(self.probs)])
        self._cdf[-1] = 1.0

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        idx = np.clip(np.searchsorted(self.edges, x, side="right") - 1, 0, len(self.probs) - 1)
        inside = (x >= self.edges[0]) & (x <= self.edges[-1])
        return np.where(inside, self.probs[idx] / self.width[idx], 0.0)

    def cdf(self, x):
        x = np.clip(np.asarray(x, dtype=float), self.edges[0], self.edges[-1])
        idx = np.clip(np.searchsorted(self.edges, x, side="right") - 1, 0, len(self.probs) - 1)
        frac = (x - self.edges[idx]) / self.width[idx]
        return self._cdf[idx] + frac * self.probs[idx]

    def sample(self, m, rng):
        u = rng.uniform(size=m)
        idx = np.searchsorted(self._cdf, u, side="right") - 1
        # side="right" never lands on a zero-mass cell since u < 1
        idx = np.clip(idx, 0, len(self.probs) - 1)
        frac = (u - self._cdf[idx]) / self.probs[idx]
        return self.edges[idx] + np.clip(frac, 0.0, 1.0) * self.width[idx]


@dataclass(frozen=True)
class ISEstimate:
    value: float
    n: int
    ratio_min: float
    ratio_max: float
    ratio_mean: float


def importance_estimate(f, h, m, rng):
    """Average of ``f(x) / h(x)`` over ``m`` draws from ``h``.

    ``f`` must accept an array of points; ``h`` needs ``sample(m, rng)`` and
    ``pdf(x)``.
    """
    if m < 1:
        raise ValueError("m must be >= 1")
    x = h.sample(m, rng)
    dens = np.asarray(h.pdf(x), dtype=float)
    if np.any(dens <= 0):
        raise InvalidProposalError("proposal density is zero at a sampled point")
    ratios = np.asarray(f(x), dtype=float) / dens
    return ISEstimate(float(np.mean(ratios)), int(m), float(ratios.min()), float(ratios.max()),
                      float(ratios.mean()))


def optimal_importance_density_1d(f, domain=(0.0, 1.0), grid=10_000):
    """Piecewise-constant approximation of ``|f| / integral |f|`` on a uniform grid.

    Cell masses use the midpoint rule.
    """
    lo, hi = map(float, domain)
    edges = np.linspace(lo, hi, grid + 1)
    mid = 0.5 * (edges[:-1] + edges[1:])
    mass = np.abs(np.asarray(f(mid), dtype=float)) * np.diff(edges)
    if not np.sum(mass) > 0:
        raise ValueError("integral of |f| over the domain is zero")
    return PiecewiseConstantDensity(edges, mass)


@dataclass(frozen=True)
class BiasVarianceReport:
    """Squared error split of a set of estimates around a known truth.

    ``variance`` is the population (divide-by-N) variance, which makes
    ``mse == bias_sq + variance`` exact. The estimator/target coupling term
    is not modeled: the truth is treated as a fixed number.
    """

    mse: float
    bias_sq: float
    variance: float


def empirical_bias_variance(estimates, truth):
    est = np.asarray(estimates, dtype=float).reshape(-1)
    if est.size == 0:
        raise ValueError("need at least one estimate")
    mean = est.mean()
    return BiasVarianceReport(
        mse=float(np.mean((est - truth) ** 2)),
        bias_sq=float((mean - truth) ** 2),
        variance=float(np.mean((est - mean) ** 2)),
    )


def naive_mco_argmin(thetas, f_theta, x, h_x):
    """Return the theta minimizing ``mean(f_theta(theta, x) / h_x)``.

    Ties go to the lowest index.
    """
    thetas = list(thetas)
    if not thetas:
        raise ValueError("need at least one theta")
    h_x = np.asarray(h_x, dtype=float)
    if np.any(h_x <= 0):
        raise InvalidProposalError("sample densities must be positive")
    scores = [float(np.mean(np.asarray(f_theta(th, x), dtype=float) / h_x)) for th in thetas]
    return thetas[int(np.argmin(scores))]

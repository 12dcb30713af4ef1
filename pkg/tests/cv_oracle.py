"""Brute-force reference for cross-validated candidate selection.

Re-derives every candidate's fold scores with plain loops and a
hand-written density, then takes the argmin over the full grid with the tie rules
written as a single sort key. Only the model fit itself (MLE / EM with the
same substream) is shared with the library.
"""

import math

import numpy as np

from plmco import _rng
from plmco.distributions import em_fit_mixture, weighted_gaussian_mle


def normal_pdf(mean, cov, X):
    """Density of N(mean, cov) at the rows of X via slogdet and a linear solve."""
    d = len(mean)
    diff = X - mean
    _, logdet = np.linalg.slogdet(cov)
    quad = np.einsum("ij,ij->i", diff, np.linalg.solve(cov, diff.T).T)
    return np.exp(-0.5 * (d * math.log(2 * math.pi) + logdet + quad))


def density(theta, X):
    comps = getattr(theta, "components", None)
    if comps is None:
        return normal_pdf(theta.mean, theta.cov, X)
    return sum(w * normal_pdf(c.mean, c.cov, X) for w, c in zip(theta.weights, comps))


def fold_score(theta, xs, gs, gen_logpdfs):
    total = 0.0
    for p, g, lp in zip(density(theta, xs), gs, gen_logpdfs):
        log_ratio = math.log(p) if p > 0 else -math.inf
        ratio = math.exp(min(log_ratio - lp, math.log(1e12)))
        total += ratio * g
    return total / len(gs)


def candidate_mean(pool, kappa, K, assignment, k, model, seed, t, tag):
    d = pool.x.shape[1]
    scores = []
    for j in range(k):
        train = [i for i in range(len(pool.g)) if assignment[i] != j]
        held = [i for i in range(len(pool.g)) if assignment[i] == j]
        n_el = max(1, math.ceil(kappa * len(train) - 1e-9))
        if n_el < d + 1:
            return None
        order = sorted(train, key=lambda i: (pool.g[i], train.index(i)))[:n_el]
        X = pool.x[order]
        rng = _rng.substream(seed, t, _rng.CV_FIT, tag, j)
        if model == "single":
            theta = weighted_gaussian_mle(X, np.ones(len(order)))
        else:
            theta = em_fit_mixture(X, np.ones(len(order)), K, rng)
        scores.append(fold_score(theta, pool.x[held], pool.g[held], pool.gen_logpdf[held]))
    return sum(scores) / k


def exhaustive_winner(pool, grid, assignment, model, seed, t):
    """Return ((kappa, K), means). Ties: within a K larger kappa, across K smaller K."""
    table = {}
    for tag, (kappa, K) in enumerate(grid.candidates()):
        m = candidate_mean(pool, kappa, K, assignment, grid.folds, model, seed, t, tag)
        if m is not None:
            table[(kappa, K)] = m
    if not table:
        return (max(grid.kappas), 1), table
    # per K keep the best kappa, then compare the per-K winners
    per_k = {}
    for K in sorted({K for _, K in table}):
        rows = [(s, -kappa) for (kappa, KK), s in table.items() if KK == K]
        s, neg_kappa = min(rows)
        per_k[K] = (s, -neg_kappa)
    best_K = min(per_k, key=lambda K: (per_k[K][0], K))
    return (per_k[best_K][1], best_K), table

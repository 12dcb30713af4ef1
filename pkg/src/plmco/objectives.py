"""Analytic black-box test problems.

Every objective accepts a single point ``(d,)`` or a batch ``(n, d)`` and
is minimized. Single points are evaluated through the batch path so the two
agree bitwise.
"""

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

# Dixon & Szego (1978) Shekel table.
SHEKEL_A = np.array([
    [4.0, 4.0, 4.0, 4.0],
    [1.0, 1.0, 1.0, 1.0],
    [8.0, 8.0, 8.0, 8.0],
    [6.0, 6.0, 6.0, 6.0],
    [3.0, 7.0, 3.0, 7.0],
    [2.0, 9.0, 2.0, 9.0],
    [5.0, 5.0, 3.0, 3.0],
    [8.0, 1.0, 8.0, 1.0],
    [6.0, 2.0, 6.0, 2.0],
    [7.0, 3.6, 7.0, 3.6],
])
SHEKEL_C = np.array([0.1, 0.2, 0.2, 0.4, 0.4, 0.6, 0.3, 0.7, 0.5, 0.5])

# Dixon & Szego (1978) six-dimensional Hartman table.
HARTMAN6_ALPHA = np.array([1.0, 1.2, 3.0, 3.2])
HARTMAN6_A = np.array([
    [10.0, 3.0, 17.0, 3.5, 1.7, 8.0],
    [0.05, 10.0, 17.0, 0.1, 8.0, 14.0],
    [3.0, 3.5, 1.7, 10.0, 17.0, 8.0],
    [17.0, 8.0, 0.05, 10.0, 0.1, 14.0],
])
HARTMAN6_P = 1e-4 * np.array([
    [1312.0, 1696.0, 5569.0, 124.0, 8283.0, 5886.0],
    [2329.0, 4135.0, 8307.0, 3736.0, 1004.0, 9991.0],
    [2348.0, 1451.0, 3522.0, 2883.0, 3047.0, 6650.0],
    [4047.0, 8828.0, 8732.0, 5743.0, 1091.0, 381.0],
])

# Hougen-Watson reaction kinetics: partial pressures of hydrogen,
# n-pentane and isopentane, and the observed reaction rate.
HOUGEN_REACTANTS = np.array([
    [470.0, 300.0, 10.0],
    [285.0, 80.0, 10.0],
    [470.0, 300.0, 120.0],
    [470.0, 80.0, 120.0],
    [470.0, 80.0, 10.0],
    [100.0, 190.0, 10.0],
    [100.0, 80.0, 65.0],
    [470.0, 190.0, 65.0],
    [100.0, 300.0, 54.0],
    [100.0, 300.0, 120.0],
    [100.0, 80.0, 120.0],
    [285.0, 300.0, 10.0],
    [285.0, 190.0, 120.0],
])
HOUGEN_RATE = np.array([8.55, 3.79, 4.82, 0.02, 2.75, 14.39, 2.54, 4.35, 13.00, 8.50, 0.05, 11.32, 3.13])
HOUGEN_GUARD = 1e-12
HOUGEN_PENALTY = 1e12

# Minimizers refined offline by BFGS from the known basins.
_SHEKEL_XSTAR = {
    5: [4.000037152819676, 4.00013327659156, 4.000037152819677, 4.00013327659156],
    7: [4.000572916185823, 4.000689366185305, 3.9994897088591506, 3.9996061588586316],
    10: [4.000746531581399, 4.000592934125663, 3.999663398053477, 3.9995098005970395],
}
_HARTMAN6_XSTAR = [0.20168951100965768, 0.15001069181688867, 0.47687397422528266,
                   0.2753324304910242, 0.3116516166020012, 0.6573005340634703]


def _batch(x, dim=None):
    X = np.atleast_2d(np.asarray(x, dtype=float))
    if dim is not None and X.shape[1] != dim:
        raise ValueError(f"expected dimension {dim}, got {X.shape[1]}")
    return X


def _finish(x, out):
    return float(out[0]) if np.ndim(x) == 1 else out


def eval_rosenbrock(x):
    X = _batch(x)
    if X.shape[1] < 2:
        raise ValueError("rosenbrock needs n >= 2")
    a, b = X[:, :-1], X[:, 1:]
    return _finish(x, np.sum((1.0 - a) ** 2 + 100.0 * (a ** 2 - b) ** 2, axis=1))


def eval_woods(x):
    """Woods function with ``100 (x2 - x1)^2`` as its first term."""
    X = _batch(x, 4)
    x1, x2, x3, x4 = X.T
    out = (100.0 * (x2 - x1) ** 2 + (1.0 - x1) ** 2 + 90.0 * (x4 - x3 ** 2) ** 2 + (1.0 - x3) ** 2
           + 10.1 * ((1.0 - x2) ** 2 + (1.0 - x4) ** 2) + 19.8 * (1.0 - x2) * (1.0 - x4))
    return _finish(x, out)


def eval_woods_classic(x):
    """Woods function with the usual ``100 (x2 - x1^2)^2`` first term."""
    X = _batch(x, 4)
    x1, x2, x3, x4 = X.T
    out = (100.0 * (x2 - x1 ** 2) ** 2 + (1.0 - x1) ** 2 + 90.0 * (x4 - x3 ** 2) ** 2 + (1.0 - x3) ** 2
           + 10.1 * ((1.0 - x2) ** 2 + (1.0 - x4) ** 2) + 19.8 * (1.0 - x2) * (1.0 - x4))
    return _finish(x, out)


def eval_shekel(x, m=10):
    if m not in (5, 7, 10):
        raise ValueError("Shekel m must be 5, 7 or 10")
    X = _batch(x, 4)
    A, c = SHEKEL_A[:m], SHEKEL_C[:m]
    sq = np.sum((X[:, None, :] - A[None, :, :]) ** 2, axis=2)
    return _finish(x, -np.sum(1.0 / (sq + c), axis=1))


def eval_hartman6(x):
    X = _batch(x, 6)
    inner = np.sum(HARTMAN6_A[None, :, :] * (X[:, None, :] - HARTMAN6_P[None, :, :]) ** 2, axis=2)
    return _finish(x, -np.sum(HARTMAN6_ALPHA * np.exp(-inner), axis=1))


def hougen_rates(beta):
    """Model rates ``(b1 x2 - x3 / b5) / (1 + b2 x1 + b3 x2 + b4 x3)``; unguarded."""
    B = _batch(beta, 5)
    x1, x2, x3 = HOUGEN_REACTANTS.T
    num = B[:, 0:1] * x2 - x3 / B[:, 4:5]
    den = 1.0 + B[:, 1:2] * x1 + B[:, 2:3] * x2 + B[:, 3:4] * x3
    return num / den


def eval_hougen(beta):
    """Residual sum of squares of the Hougen-Watson model.

    Points with ``|b5| < 1e-12`` or any ``|denominator| < 1e-12`` get
    ``1e12 * (1 + violation)`` where the violation is measured in units of
    the guard.
    """
    B = _batch(beta, 5)
    x1, x2, x3 = HOUGEN_REACTANTS.T
    den = 1.0 + B[:, 1:2] * x1 + B[:, 2:3] * x2 + B[:, 3:4] * x3
    b5 = B[:, 4]
    viol = (np.sum(np.maximum(0.0, HOUGEN_GUARD - np.abs(den)), axis=1)
            + np.maximum(0.0, HOUGEN_GUARD - np.abs(b5))) / HOUGEN_GUARD
    bad = viol > 0
    safe_b5 = np.where(bad, 1.0, b5)
    safe_den = np.where(bad[:, None], 1.0, den)
    pred = (B[:, 0:1] * x2 - x3 / safe_b5[:, None]) / safe_den
    rss = np.sum((HOUGEN_RATE - pred) ** 2, axis=1)
    return _finish(beta, np.where(bad, HOUGEN_PENALTY * (1.0 + viol), rss))


@dataclass(frozen=True, eq=False)
class Problem:
    """A minimization problem with its initial sampling box.

    ``g_star``/``x_star`` are ``None`` when the optimum is not pinned.
    """

    name: str
    dim: int
    func: Callable
    lower: np.ndarray
    upper: np.ndarray
    g_star: Optional[float] = None
    x_star: Optional[np.ndarray] = None

    def __call__(self, x):
        return self.func(x)

    def evaluate(self, X):
        return np.asarray(self.func(_batch(X, self.dim)), dtype=float)

    @property
    def key(self):
        return f"{self.name}:{self.dim}"


class EvalCounter:
    """Wraps a problem and counts point evaluations."""

    def __init__(self, problem):
        self.problem = problem
        self.calls = 0

    def __call__(self, x):
        self.calls += 1
        return self.problem(x)

    def evaluate(self, X):
        X = _batch(X, self.problem.dim)
        self.calls += X.shape[0]
        return self.problem.evaluate(X)


def _box(lo, hi, d):
    return np.full(d, float(lo)), np.full(d, float(hi))


def _rosenbrock(dim):
    if dim is None:
        dim = 4
    if dim < 2:
        raise ValueError("rosenbrock needs dim >= 2")
    return Problem("rosenbrock", dim, eval_rosenbrock, *_box(-2, 2, dim), 0.0, np.ones(dim))


def _fixed(name, d, func, lo, hi, g_star=None, x_star=None):
    def build(dim):
        if dim is not None and dim != d:
            raise ValueError(f"{name} is {d}-dimensional, got dim={dim}")
        xs = None if x_star is None else np.array(x_star, dtype=float)
        gs = None if xs is None else (g_star if g_star is not None else float(func(xs)))
        return Problem(name, d, func, *_box(lo, hi, d), gs, xs)
    return build


def _shekel_func(m):
    def f(x):
        return eval_shekel(x, m)
    f.__name__ = f"shekel{m}"
    return f


REGISTRY = {
    "rosenbrock": _rosenbrock,
    "woods": _fixed("woods", 4, eval_woods, -3, 3, 0.0, [1.0, 1.0, 1.0, 1.0]),
    "classic_woods": _fixed("classic_woods", 4, eval_woods_classic, -3, 3, 0.0, [1.0, 1.0, 1.0, 1.0]),
    "shekel5": _fixed("shekel5", 4, _shekel_func(5), 0, 10, -10.153199679058227, _SHEKEL_XSTAR[5]),
    "shekel7": _fixed("shekel7", 4, _shekel_func(7), 0, 10, -10.40294056681866, _SHEKEL_XSTAR[7]),
    "shekel10": _fixed("shekel10", 4, _shekel_func(10), 0, 10, -10.536409816692043, _SHEKEL_XSTAR[10]),
    "hartman6": _fixed("hartman6", 6, eval_hartman6, 0, 1, -3.3223680114155143, _HARTMAN6_XSTAR),
    "hougen": _fixed("hougen", 5, eval_hougen, 0, 3),
}


def make_problem(name, dim=None):
    """Build a registered problem; ``name`` may carry the dimension as ``name:dim``."""
    if ":" in name:
        name, d = name.split(":", 1)
        d = int(d)
        if dim is not None and dim != d:
            raise ValueError(f"conflicting dimensions {d} and {dim} for {name}")
        dim = d
    try:
        build = REGISTRY[name]
    except KeyError:
        raise ValueError(f"unknown problem {name!r}; known: {', '.join(REGISTRY)}") from None
    return build(dim)

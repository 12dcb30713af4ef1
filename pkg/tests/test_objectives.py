import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from plmco.objectives import (
    REGISTRY,
    EvalCounter,
    eval_hartman6,
    eval_hougen,
    eval_rosenbrock,
    eval_shekel,
    eval_woods,
    eval_woods_classic,
    make_problem,
)

# least-squares fit of the Hougen-Watson data, computed offline with
# scipy.optimize.least_squares from several starts
HOUGEN_BETA_LS = np.array([1.25258559, 0.0627758, 0.04004774, 0.11241476, 1.19137765])
HOUGEN_RSS_LS = 0.2989009807534587


def woods_reference(x):
    # written out term by term, independent of the vectorized version
    x1, x2, x3, x4 = (float(v) for v in x)
    return (100 * (x2 - x1) ** 2 + (1 - x1) ** 2 + 90 * (x4 - x3 ** 2) ** 2 + (1 - x3) ** 2
            + 10.1 * ((1 - x2) ** 2 + (1 - x4) ** 2) + 19.8 * (1 - x2) * (1 - x4))


def test_rosenbrock_values():
    assert eval_rosenbrock(np.ones(7)) == 0.0
    assert eval_rosenbrock(np.zeros(4)) == 3.0
    assert eval_rosenbrock(np.array([-1.0, 1.0])) == 4.0
    with pytest.raises(ValueError):
        eval_rosenbrock(np.array([1.0]))


def test_woods_values():
    assert eval_woods(np.ones(4)) == 0.0
    assert eval_woods(np.zeros(4)) == pytest.approx(42.0, abs=1e-12)
    assert eval_woods_classic(np.ones(4)) == 0.0


def test_woods_swap_against_reference():
    rng = np.random.default_rng(0)
    for _ in range(20):
        x = rng.uniform(-3, 3, 4)
        swapped = np.concatenate([x[2:], x[:2]])
        assert eval_woods(x) == pytest.approx(woods_reference(x), rel=1e-13)
        assert eval_woods(swapped) == pytest.approx(woods_reference(swapped), rel=1e-13)


def test_woods_variants_differ_off_optimum():
    x = np.array([2.0, 1.0, 0.5, 0.5])
    assert eval_woods(x) != eval_woods_classic(x)


def test_shekel_values():
    assert eval_shekel(np.full(4, 4.0), 5) <= -10.0
    far = eval_shekel(np.full(4, 1e3), 5)
    assert -1e-4 < far < 0
    with pytest.raises(ValueError):
        eval_shekel(np.zeros(4), 6)


def test_shekel_minima_pinned():
    for name, value in (("shekel5", -10.1532), ("shekel7", -10.4029), ("shekel10", -10.5364)):
        p = make_problem(name)
        assert p.g_star == pytest.approx(value, abs=1e-3)
        assert p(p.x_star) == pytest.approx(p.g_star, abs=1e-9)


def test_hartman6_values():
    p = make_problem("hartman6")
    assert p(p.x_star) == pytest.approx(-3.3224, abs=1e-3)
    assert abs(eval_hartman6(np.full(6, 10.0))) < 1e-6


@settings(max_examples=100, deadline=None)
@given(arrays(np.float64, 6, elements=st.floats(-5, 5)))
def test_hartman6_range(x):
    v = eval_hartman6(x)
    assert -8.4 < v <= 0


def test_hougen_at_least_squares_fit():
    assert eval_hougen(HOUGEN_BETA_LS) == pytest.approx(HOUGEN_RSS_LS, rel=1e-3)


@settings(max_examples=100, deadline=None)
@given(arrays(np.float64, 5, elements=st.floats(0.01, 3)))
def test_hougen_positive(beta):
    assert eval_hougen(beta) > 0


def test_hougen_guard():
    for b5 in (1e-3, 1e-9, 1e-13, 0.0):
        v = eval_hougen(np.array([1.0, 0.1, 0.1, 0.1, b5]))
        assert np.isfinite(v) and v > 0
    bad = eval_hougen(np.array([1.0, 0.1, 0.1, 0.1, 0.0]))
    assert bad >= 1e12


def test_batch_matches_single():
    rng = np.random.default_rng(1)
    for name in REGISTRY:
        p = make_problem(name)
        X = rng.uniform(p.lower, p.upper, (9, p.dim))
        batch = p.evaluate(X)
        single = np.array([p(x) for x in X])
        assert np.array_equal(batch, single)


def test_registry_contract():
    rng = np.random.default_rng(2)
    for name in REGISTRY:
        p = make_problem(name)
        X = rng.uniform(p.lower, p.upper, (50, p.dim))
        assert np.all(np.isfinite(p.evaluate(X)))
        if p.x_star is not None:
            assert abs(p(p.x_star) - p.g_star) <= 1e-9


def test_make_problem():
    p = make_problem("rosenbrock", 8)
    assert p.g_star == 0.0 and np.array_equal(p.x_star, np.ones(8))
    assert make_problem("rosenbrock:10").dim == 10
    h = make_problem("hartman6", 6)
    assert np.array_equal(h.lower, np.zeros(6)) and np.array_equal(h.upper, np.ones(6))
    assert make_problem("hougen").g_star is None
    with pytest.raises(ValueError):
        make_problem("woods", 5)
    with pytest.raises(ValueError):
        make_problem("nosuch")
    with pytest.raises(ValueError):
        make_problem("rosenbrock:3", 4)


def test_eval_counter_counts_rows():
    c = EvalCounter(make_problem("woods"))
    c.evaluate(np.zeros((5, 4)))
    c(np.zeros(4))
    assert c.calls == 6

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from egap.errors import SolverError
from egap.profile import performance_profile, ratios, read_metrics, tau_tilde


def enumerate_profile(T, tau):
    """Direct count over the ratio matrix, one problem at a time."""
    n_p, n_s = len(T), len(T[0])
    rho = []
    for s in range(n_s):
        hits = 0
        for p in range(n_p):
            best = min(T[p])
            if math.isfinite(T[p][s]) and math.log2(T[p][s] / best) <= tau:
                hits += 1
        rho.append(hits / n_p)
    return rho


def test_two_by_two_example():
    T = [[1.0, 2.0], [4.0, 2.0]]
    rho = performance_profile(T, [0.0, 1.0])
    np.testing.assert_array_equal(rho[0], [0.5, 0.5])
    np.testing.assert_array_equal(rho[1], [1.0, 1.0])
    assert tau_tilde(T) == 1.0


def test_single_solver_is_constant_one():
    rho = performance_profile([[3.0], [7.0], [0.5]], [0.0, 0.5, 4.0])
    np.testing.assert_array_equal(rho, np.ones((3, 1)))


def test_failure_plateaus_below_one():
    T = [[1.0, math.inf], [2.0, 1.0], [1.0, math.nan]]
    rho = performance_profile(T, [0.0, 1.0, 100.0])
    assert rho[-1, 0] == 1.0
    assert rho[-1, 1] == pytest.approx(1 / 3)
    all_failed = ratios([[math.inf, math.inf]])
    assert np.all(np.isinf(all_failed))


def test_invalid_inputs():
    with pytest.raises(SolverError) as err:
        ratios(np.zeros((0, 2)))
    assert err.value.code == "no-data"
    with pytest.raises(SolverError):
        ratios([[1.0, 0.0]])


def test_read_metrics(tmp_path):
    a = tmp_path / "a.csv"
    a.write_text("problem,solver,value\np1,s1,1\np1,s2,2\np2,s1,fail\n")
    b = tmp_path / "b.csv"
    b.write_text("problem,solver,value\np2,s2,3\np3,s1,\n")
    problems, solvers, T = read_metrics([a, b])
    assert problems == ["p1", "p2", "p3"] and solvers == ["s1", "s2"]
    np.testing.assert_array_equal(T, [[1, 2], [math.inf, 3], [math.inf, math.inf]])
    empty = tmp_path / "e.csv"
    empty.write_text("problem,solver,value\n")
    with pytest.raises(SolverError) as err:
        read_metrics([empty])
    assert err.value.code == "no-data"


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 6), st.integers(1, 4), st.integers(0, 10_000),
       st.lists(st.floats(0.0, 5.0), min_size=1, max_size=6))
def test_profile_matches_enumeration(n_p, n_s, seed, taus):
    rng = np.random.default_rng(seed)
    T = rng.uniform(0.1, 10.0, (n_p, n_s))
    T[rng.random((n_p, n_s)) < 0.2] = math.inf
    rho = performance_profile(T, taus)
    for i, tau in enumerate(taus):
        np.testing.assert_allclose(rho[i], enumerate_profile(T.tolist(), tau), atol=1e-15)
    # monotone in tau and bounded by one
    order = np.argsort(taus)
    assert np.all(np.diff(rho[order], axis=0) >= 0) and np.all(rho <= 1)


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(0.01, 100.0), min_size=1, max_size=8))
def test_solver_against_itself(col):
    T = np.column_stack([col, col])
    np.testing.assert_array_equal(performance_profile(T, [0.0])[0], [1.0, 1.0])

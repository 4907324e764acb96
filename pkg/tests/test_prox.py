import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from egap import prox as P
from egap.errors import SolverError

GRID = np.arange(-5.0, 5.0 + 5e-6, 1e-5)


def grid_prox(value, lam, v, lo=-5.0, hi=5.0):
    """Brute-force 1-D prox over a 1e-5 grid restricted to [lo, hi]."""
    z = GRID[(GRID >= lo) & (GRID <= hi)]
    return z[np.argmin(value(z) + (z - v) ** 2 / (2 * lam))]


def test_func_eval_examples():
    assert P.func_eval(P.l1(), P.ALL, [1.0, -2.0]) == 3.0
    assert P.func_eval(P.group_l2(np.array([0, 0])), P.ALL, [3.0, 4.0]) == 5.0
    assert P.func_eval(P.zero(), P.box(0.0, 1.0), [1.5]) == np.inf


def test_prox_examples():
    np.testing.assert_allclose(P.prox_eval(P.l1(), P.ALL, 1.0, [2.0, 0.5, -3.0]), [1.0, 0.0, -2.0])
    np.testing.assert_allclose(P.prox_eval(P.group_l2(np.array([0, 0])), P.ALL, 1.0, [3.0, 4.0]), [2.4, 3.2])
    np.testing.assert_allclose(P.prox_eval(P.zero(), P.box(0.0, 1.0), 0.7, [1.5, -0.2]), [1.0, 0.0])


def test_hinge_prox_against_grid():
    f = P.hinge_sum(np.array([1.0]))
    z = P.prox_eval(f, P.ALL, 1.0, [0.5])
    assert z[0] == pytest.approx(1.0)
    for v in (-2.0, -0.3, 0.2, 0.9, 1.7):
        for label in (1.0, -1.0):
            hinge = P.hinge_sum(np.array([label]))
            got = P.prox_eval(hinge, P.ALL, 0.8, [v])[0]
            ref = grid_prox(lambda t: np.maximum(1 - label * t, 0.0), 0.8, v)
            assert got == pytest.approx(ref, abs=2e-5)


def test_strongly_convexify_examples():
    f = P.strongly_convexify(P.zero(), 2.0, 0.0)
    assert P.prox_eval(f, P.ALL, 1.0, [3.0])[0] == pytest.approx(1.0)
    g = P.strongly_convexify(P.l1(), 1.0, 0.0)
    assert g.sigma_f == 1.0
    assert P.prox_eval(g, P.ALL, 1.0, [4.0])[0] == pytest.approx(1.5)


def test_elastic_net_prox_against_grid():
    f = P.strongly_convexify(P.l1(), 0.1, 0.0)
    rng = np.random.default_rng(5)
    for v in rng.uniform(-4, 4, 5):
        got = P.prox_eval(f, P.ALL, 0.9, [v])[0]
        ref = grid_prox(lambda t: np.abs(t) + 0.05 * t * t, 0.9, v)
        assert got == pytest.approx(ref, abs=2e-5)


def test_group_norm_over_box_against_grid():
    # two coordinates in one group, box [-0.5, 2]^2; grid search in 2-D
    f = P.group_l2(np.array([0, 0]))
    X = P.box(-0.5, 2.0)
    v = np.array([3.0, -1.5])
    got = P.prox_eval(f, X, 0.7, v)
    g = np.linspace(-0.5, 2.0, 1001)
    Z1, Z2 = np.meshgrid(g, g, indexing="ij")
    obj = np.hypot(Z1, Z2) + ((Z1 - v[0]) ** 2 + (Z2 - v[1]) ** 2) / 1.4
    i, j = np.unravel_index(np.argmin(obj), obj.shape)
    assert np.hypot(Z1[i, j], Z2[i, j]) + np.sum((np.array([Z1[i, j], Z2[i, j]]) - v) ** 2) / 1.4 >= \
        np.linalg.norm(got) + np.sum((got - v) ** 2) / 1.4 - 1e-12
    np.testing.assert_allclose(got, [Z1[i, j], Z2[i, j]], atol=5e-3)


def test_group_norm_box_excluding_origin():
    with pytest.raises(SolverError) as err:
        P.prox_eval(P.group_l2(np.array([0, 0])), P.box(1.0, 2.0), 1.0, [3.0, 3.0])
    assert err.value.code == "no-prox-rule"


def test_indicator_zero_and_l2_norm():
    assert np.all(P.prox_eval(P.indicator_zero(), P.ALL, 1.0, [4.0, -2.0]) == 0.0)
    np.testing.assert_allclose(P.prox_eval(P.l2_norm(1.0), P.ALL, 1.0, [3.0, 4.0]), [2.4, 3.2])


def test_invalid_specs():
    with pytest.raises(SolverError):
        P.FunctionSpec("nuclear")
    with pytest.raises(ValueError):
        P.group_l2(np.array([0, 2]))
    with pytest.raises(ValueError):
        P.prox_eval(P.l1(), P.ALL, 0.0, [1.0])


def test_linear_argmin_needs_strong_convexity():
    with pytest.raises(SolverError) as err:
        P.linear_argmin(P.l1(), P.ALL, [1.0])
    assert err.value.code == "needs-strong-convexity"


def test_fenchel_young_gap_is_zero_at_subgradient():
    x = np.array([1.0, 0.0, -2.0])
    s = np.array([1.0, 0.3, -1.0])
    assert P.fenchel_young_gap(P.l1(), P.ALL, x, s) == pytest.approx(0.0, abs=1e-15)
    assert P.fenchel_young_gap(P.l1(), P.ALL, x, np.array([0.5, 0.3, -1.0])) == pytest.approx(0.5)


CASES = [
    (P.l1(1.0), P.ALL),
    (P.l1(0.5), P.box(-1.0, 2.0)),
    (P.zero(), P.box(-1.0, 1.0)),
    (P.zero(), P.nonneg()),
    (P.group_l2(np.array([0, 1, 0, 1])), P.ALL),
    (P.group_l2(np.array([0, 1, 0, 1])), P.box(-0.7, 1.3)),
    (P.strongly_convexify(P.l1(), 0.1), P.ALL),
    (P.squared_l2(2.0, 0.5), P.box(0.0, 1.0)),
    (P.l2_norm(1.0), P.ALL),
    (P.hinge_sum(np.array([1.0, -1.0, 1.0, -1.0])), P.ALL),
]


def prox_objective(f, X, lam, v, z):
    return P.func_eval(f, X, z) + float(np.sum((z - v) ** 2)) / (2 * lam)


@settings(max_examples=60, deadline=None)
@given(st.sampled_from(range(len(CASES))), st.floats(0.05, 5.0), st.integers(0, 10_000))
def test_prox_optimality(case, lam, seed):
    f, X = CASES[case]
    rng = np.random.default_rng(seed)
    v = rng.uniform(-3, 3, 4)
    z = P.prox_eval(f, X, lam, v)
    assert X.contains(z)
    best = prox_objective(f, X, lam, v, z)
    candidates = [X.project(rng.uniform(-3, 3, 4)) for _ in range(200)]
    for i in range(4):
        for sgn in (1.0, -1.0):
            e = np.zeros(4)
            e[i] = sgn * 1e-4
            candidates.append(X.project(z + e))
    for zt in candidates:
        assert prox_objective(f, X, lam, v, zt) >= best - 1e-9


@settings(max_examples=60, deadline=None)
@given(st.sampled_from(range(len(CASES))), st.floats(0.05, 5.0), st.integers(0, 10_000))
def test_prox_nonexpansive(case, lam, seed):
    f, X = CASES[case]
    rng = np.random.default_rng(seed)
    v1, v2 = rng.uniform(-3, 3, 4), rng.uniform(-3, 3, 4)
    d = np.linalg.norm(P.prox_eval(f, X, lam, v1) - P.prox_eval(f, X, lam, v2))
    assert d <= np.linalg.norm(v1 - v2) + 1e-12


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000), st.floats(0.1, 3.0))
def test_separable_prox_is_blockwise(seed, lam):
    rng = np.random.default_rng(seed)
    parts = [CASES[0], CASES[5], CASES[9]]
    term = P.SeparableTerm(parts, [4, 4, 4])
    v = rng.uniform(-3, 3, 12)
    expected = np.concatenate([P.prox_eval(f, X, lam, v[4 * i:4 * i + 4]) for i, (f, X) in enumerate(parts)])
    np.testing.assert_array_equal(term.prox(lam, v), expected)


@settings(max_examples=40, deadline=None)
@given(st.sampled_from([0, 1, 2, 4, 6, 8]), st.integers(0, 10_000))
def test_fenchel_young_gap_nonnegative(case, seed):
    f, X = CASES[case]
    rng = np.random.default_rng(seed)
    x = X.project(rng.uniform(-2, 2, 4))
    s = rng.uniform(-2, 2, 4)
    s = s * P.dual_scale(f, X, s)
    gap = P.fenchel_young_gap(f, X, x, s)
    assert gap is not None and gap >= -1e-12
    c = P.conjugate(f, X, s)
    assert gap == pytest.approx(P.func_eval(f, X, x) + c - s @ x, abs=1e-9)

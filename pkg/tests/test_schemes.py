import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from egap import prox as P
from egap import schedule as S
from egap import schemes as E
from egap import smoothing as sm
from egap.errors import SolverError
from egap.problems import Block, ConstrainedProblem, make_basis_pursuit, make_elastic_net, reference_solve_lp

TAU0 = 2 / (1 + math.sqrt(5))


def box_1d(b=0.5, f=None):
    return ConstrainedProblem([Block(P.zero() if f is None else f, P.box(-1.0, 1.0), np.eye(1))], np.array([b]))


def bregman_run(pb, scheme, c, gamma0=1.0, center=None, **kw):
    smoother = sm.make_smoother(pb, sm.BREGMAN, center=center, L_bar=kw.pop("L_bar", None))
    cfg = E.SolverConfig(scheme, smoother, ("const", c), gamma0, **kw)
    return E.Run(pb, cfg)


def random_bounded(seed, m=8, n=20):
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((m, n))
    x0 = rng.uniform(-0.5, 0.5, n)
    return ConstrainedProblem([Block(P.l1(), P.box(-1.0, 1.0), A)], A @ x0)


# starting points ----------------------------------------------------------

def test_start_point_examples():
    run = bregman_run(box_1d(), E.TWO_P1D, 1.0, center=[0.0], L_bar=1.0)
    it = E.start_point(run, 1.0, 1.0)
    assert it.x_bar[0] == 0.0 and it.y_bar[0] == -0.5
    pb = ConstrainedProblem([Block(P.l1(), P.ALL, np.eye(1))], np.array([1.0]))
    run = bregman_run(pb, E.TWO_P1D, 1.0, center=[0.0], L_bar=1.0)
    it = E.start_point(run, 1.0, 1.0)
    assert it.x_bar[0] == 0.0 and it.y_bar[0] == -1.0


def test_dual_first_start_from_feasible_center():
    pb = box_1d(b=0.25, f=P.l1())
    run = bregman_run(pb, E.TWO_P1D, 1.0, center=[0.25], L_bar=1.0)
    it = E.start_point(run, 1.0, 2.0, E.DUAL_FIRST)
    assert it.y_bar[0] == 0.0
    assert it.x_bar[0] == pytest.approx(P.prox_eval(P.l1(), P.box(-1.0, 1.0), 2.0, [0.25])[0])


def test_start_point_needs_product():
    run = bregman_run(box_1d(), E.TWO_P1D, 1.0, center=[0.0], L_bar=1.0)
    with pytest.raises(SolverError) as err:
        E.start_point(run, 0.5, 1.0)
    assert err.value.code == "init-product"


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000), st.sampled_from([E.PRIMAL_FIRST, E.DUAL_FIRST]), st.floats(1.0, 4.0))
def test_start_point_gap_property(seed, variant, excess):
    pb = random_bounded(seed, 4, 7)
    run = bregman_run(pb, E.TWO_P1D, 1.0)
    gamma0 = float(np.random.default_rng(seed).uniform(0.2, 3.0))
    beta0 = excess * run.L_bar / gamma0
    it = E.start_point(run, gamma0, beta0, variant)
    G = sm.smoothed_gap(pb, run.smoother, it.x_bar, it.y_bar, gamma0, beta0)
    assert G <= -gamma0 * sm.prox_distance(pb, run.smoother, it.x_bar) + 1e-8


# kernels on the 1-D instance ----------------------------------------------

def test_2p1d_hand_example():
    run = bregman_run(box_1d(), E.TWO_P1D, 1.0, center=[0.0], L_bar=1.0)
    st0 = E.SolverState(E.start_point(run, 1.0, 1.0), S.generic_start(1.0, 1.0, 1.0))
    st1 = E.step_2p1d(run, st0)
    assert abs(st1.it.x_bar[0] - 0.5) <= 1e-12
    assert abs(st1.it.y_bar[0] + 0.5) <= 1e-12
    assert abs(st1.sched.gamma - 0.5) <= 1e-12 and abs(st1.sched.beta - 0.5) <= 1e-12


def test_1p2d_hand_example():
    run = bregman_run(box_1d(), E.ONE_P2D, 0.0, center=[0.0], L_bar=1.0)
    st0 = E.SolverState(E.start_point(run, 1.0, 1.0), S.generic_start(1.0, 1.0, 0.0))
    assert st0.sched.tau == pytest.approx(TAU0, rel=1e-15)
    st1 = E.step_1p2d(run, st0)
    assert abs(st1.it.x_bar[0] - TAU0 * 0.5) <= 1e-12
    assert abs(st1.it.y_bar[0] + 0.5) <= 1e-12
    assert abs(st1.sched.beta - (1 - TAU0)) <= 1e-12
    assert st1.sched.gamma == 1.0


def test_2p1d_step_against_direct_formulas():
    pb = random_bounded(3, 3, 5)
    run = bregman_run(pb, E.TWO_P1D, 1.0)
    sched = S.generic_start(1.5, run.L_bar, 1.0)
    it = E.start_point(run, sched.gamma, sched.beta)
    st1 = E.step_2p1d(run, E.SolverState(it, sched))
    A, b, L, tau = pb.A.dense(), pb.b, run.L_bar, sched.tau
    x_star = pb.term.prox(1 / sched.gamma, -A.T @ it.y_bar / sched.gamma)
    x_hat = (1 - tau) * it.x_bar + tau * x_star
    beta1 = (1 - tau) * sched.beta
    y_hat = (A @ x_hat - b) / beta1
    x_new = pb.term.prox(beta1 / L, x_hat - beta1 / L * A.T @ y_hat)
    np.testing.assert_allclose(st1.x_star_prev, x_star, atol=1e-12)
    np.testing.assert_allclose(st1.it.x_bar, x_new, atol=1e-12)
    np.testing.assert_allclose(st1.it.y_bar, (1 - tau) * it.y_bar + tau * y_hat, atol=1e-12)
    np.testing.assert_allclose(st1.it.residual, A @ x_new - b, atol=1e-12)


def test_2p1d_fixed_point_at_solution():
    # x* = 0.5 is interior and f = 0, so y* = 0; x*_gamma(0) = x_c = 0.5 keeps the iterate put
    pb = box_1d()
    run = bregman_run(pb, E.TWO_P1D, 1.0, center=[0.5], L_bar=1.0)
    it = E.PrimalDualIterate(np.array([0.5]), np.array([0.0]), np.array([0.0]), 0.0, np.array([0.0]))
    st1 = E.step_2p1d(run, E.SolverState(it, S.generic_start(1.0, 1.0, 1.0)))
    assert st1.it.x_bar[0] == 0.5 and st1.it.y_bar[0] == 0.0


def test_1p2d_fixed_point_dual():
    pb = box_1d()
    run = bregman_run(pb, E.ONE_P2D, 0.0, center=[0.5], L_bar=1.0)
    it = E.PrimalDualIterate(np.array([0.5]), np.array([0.0]), np.array([0.0]), 0.0)
    st1 = E.step_1p2d(run, E.SolverState(it, S.generic_start(1.0, 1.0, 0.0)))
    assert st1.it.y_bar[0] == 0.0 and st1.it.x_bar[0] == 0.5


# strongly convex ----------------------------------------------------------

def test_sc_argmin_against_grid():
    f = P.strongly_convexify(P.l1(), 0.1)
    pb = ConstrainedProblem([Block(f, P.ALL, np.eye(1))], np.array([0.3]))
    grid = np.arange(-40.0, 40.0, 1e-4)
    for y in (-2.5, -0.4, 0.7, 1.9):
        ref = grid[np.argmin(np.abs(grid) + 0.05 * grid ** 2 + y * grid)]
        closed = np.sign(-y) * max(abs(y) - 1.0, 0.0) / 0.1
        got = pb.term.linear_argmin(np.array([y]))[0]
        assert got == pytest.approx(closed, abs=1e-12)
        assert got == pytest.approx(ref, abs=1e-4)


def test_sc_start_and_tau_sequence():
    pb = make_elastic_net(3, 6, 12, 2)
    run = E.Run(pb, E.SolverConfig(E.ONE_P2D_SC))
    state = E._initial_state(run)
    assert state.sched.tau == pytest.approx((math.sqrt(5) - 1) / 2)
    x0 = pb.term.linear_argmin(np.zeros(12))
    np.testing.assert_allclose(state.it.x_bar, x0)
    np.testing.assert_allclose(state.it.y_bar, pb.residual(x0) / run.L_f)
    nxt = E.step(run, state)
    assert nxt.sched.tau == pytest.approx(S.sc_next_tau(state.sched.tau))


def test_sc_needs_strong_convexity():
    pb = make_basis_pursuit(1, 4, 8, 2)
    with pytest.raises(SolverError) as err:
        E.Run(pb, E.SolverConfig(E.TWO_P1D_SC))
    assert err.value.code == "needs-strong-convexity"


# inexact ------------------------------------------------------------------

def al_run(pb, scheme, **kw):
    return E.Run(pb, E.SolverConfig(scheme, sm.make_smoother(pb, sm.AUGLAG), ("const", 0.0), 1.0, **kw))


@pytest.mark.parametrize("delta", [1e-3, 1e-5])
def test_i1p2d_matches_exact_step(delta):
    pb = box_1d(f=P.l1())
    exact = al_run(pb, E.ONE_P2D)
    inexact = al_run(pb, E.I1P2D)
    it = E.PrimalDualIterate(np.array([0.2]), np.array([-0.3]), pb.residual([0.2]), 0.2)
    sched = S.generic_start(1.0, 1.0, 0.0)
    a = E.step_1p2d(exact, E.SolverState(it, sched), delta=1e-12)
    b = E.step_i1p2d(inexact, E.SolverState(it, sched, delta=delta), delta_k=delta)
    assert abs(a.it.x_bar[0] - b.it.x_bar[0]) <= 10 * delta
    assert abs(a.it.y_bar[0] - b.it.y_bar[0]) <= 10 * delta


def test_i1p2d_inner_cap_logs_event():
    pb = make_basis_pursuit(2, 6, 12, 2)
    trace = E.solve(pb, E.SolverConfig(E.I1P2D, sm.make_smoother(pb, sm.AUGLAG), delta0=1e-9,
                                       inner_max_iter=5, max_iter=5, record_wall=False))
    assert len(trace.records) == 6
    assert any(ev["event"] == "inner-budget" for ev in trace.events)


def test_i1p2d_feasible_iterate_dual_shrinks():
    pb = box_1d(f=P.l1())
    run = al_run(pb, E.I1P2D)
    it = E.PrimalDualIterate(np.array([0.5]), np.array([0.8]), np.array([0.0]), 0.5)
    sched = S.generic_start(1.0, 1.0, 0.0)
    st1 = E.step_i1p2d(run, E.SolverState(it, sched, delta=1e-8), delta_k=1e-8)
    x_t = st1.x_star_prev
    expected_y = (1 - sched.tau) * 0.8 + sched.gamma * pb.residual(x_t)[0]
    assert st1.it.y_bar[0] == pytest.approx(expected_y, abs=1e-14)


# ADMM ---------------------------------------------------------------------

def two_block_qp(seed, identity=False):
    rng = np.random.default_rng(seed)
    A1 = np.eye(2) if identity else rng.standard_normal((3, 2))
    A2 = np.eye(2) if identity else rng.standard_normal((3, 2))
    c1, c2 = rng.standard_normal(2), rng.standard_normal(2)
    b = rng.standard_normal(A1.shape[0])
    blocks = [Block(P.squared_l2(1.0, c1), P.ALL, A1), Block(P.squared_l2(1.0, c2), P.ALL, A2)]
    return ConstrainedProblem(blocks, b), (A1, A2, c1, c2, b)


def admm_state(run, x, y):
    r = run.problem.residual(x)
    it = E.PrimalDualIterate(x, y, r, run.problem.objective(x))
    return E.SolverState(it, E._admm_sched(0, run.gamma0), x_raw=x)


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_admm_reduces_to_standard_admm(seed):
    pb, (A1, A2, c1, c2, b) = two_block_qp(seed)
    run = E.Run(pb, E.SolverConfig(E.ADMM_NEW, gamma0=3.0))
    rng = np.random.default_rng(seed + 10)
    x, y = rng.standard_normal(4), rng.standard_normal(3)
    rho = 0.7
    out = E.step_admm_new(run, admm_state(run, x, y), params=(0.0, 0.0, 1.0, rho, rho))
    # standard ADMM by normal equations of each block
    x1 = np.linalg.solve(np.eye(2) + rho * A1.T @ A1, c1 - A1.T @ (rho * (A2 @ x[2:] - b) + y))
    x2 = np.linalg.solve(np.eye(2) + rho * A2.T @ A2, c2 - A2.T @ (rho * (A1 @ x1 - b) + y))
    y_new = y + rho * (A1 @ x1 + A2 @ x2 - b)
    np.testing.assert_allclose(out.x_raw, np.concatenate([x1, x2]), atol=1e-10)
    np.testing.assert_allclose(out.it.y_bar, y_new, atol=1e-10)


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_padmm_equals_admm_for_identity_blocks(seed):
    pb, _ = two_block_qp(seed, identity=True)
    pb = ConstrainedProblem([Block(P.l1(), P.box(-1.0, 1.0), np.eye(2)), Block(P.l1(0.5), P.ALL, np.eye(2))], pb.b)
    a = E.Run(pb, E.SolverConfig(E.ADMM_NEW, gamma0=3.0))
    p = E.Run(pb, E.SolverConfig(E.PADMM_NEW, gamma0=3.0))
    rng = np.random.default_rng(seed)
    x = np.concatenate([rng.uniform(-1, 1, 2), rng.standard_normal(2)])
    y = rng.standard_normal(2)
    sa = E.step_admm_new(a, admm_state(a, x, y))
    sp = E.step_padmm_new(p, admm_state(p, x, y))
    np.testing.assert_allclose(sa.it.x_bar, sp.it.x_bar, atol=1e-10)
    np.testing.assert_allclose(sa.it.y_bar, sp.it.y_bar, atol=1e-10)


def test_padmm_shift_point_by_hand():
    # 2x2 block with f1 = 0: the prox is the identity, so x1 is the shifted point itself
    A1 = np.array([[2.0, 0.0], [1.0, 1.0]])
    pb = ConstrainedProblem([Block(P.zero(), P.ALL, A1), Block(P.zero(), P.ALL, np.eye(2))], np.array([1.0, -1.0]))
    run = E.Run(pb, E.SolverConfig(E.PADMM_NEW, gamma0=3.0))
    x = np.array([0.5, -0.5, 0.2, 0.1])
    y_hat = np.array([0.3, -0.2])
    gamma1, rho, eta = 1.0, 0.5, 0.75
    x1, _, _ = E._padmm_blocks(run, x, y_hat, 0.5, gamma1, rho, eta)
    kappa = gamma1 + rho
    alpha = 1 / np.linalg.norm(A1, 2) ** 2
    r = A1 @ x[:2] + x[2:] - pb.b
    g1 = x[:2] - alpha / kappa * (A1.T @ (rho * r + y_hat) + gamma1 * A1.T @ A1 @ x[:2])
    np.testing.assert_allclose(x1, g1, atol=1e-14)


def test_padmm_stationary_at_center():
    pb = ConstrainedProblem([Block(P.zero(), P.ALL, np.eye(2)), Block(P.zero(), P.ALL, np.eye(2))], np.zeros(2))
    run = E.Run(pb, E.SolverConfig(E.PADMM_NEW, gamma0=3.0))
    x1, _, _ = E._padmm_blocks(run, np.zeros(4), np.zeros(2), 0.5, 1.0, 0.5, 0.75)
    np.testing.assert_array_equal(x1, np.zeros(2))


def test_admm_needs_two_blocks():
    with pytest.raises(SolverError) as err:
        E.Run(make_basis_pursuit(1, 4, 8, 2), E.SolverConfig(E.ADMM_NEW))
    assert err.value.code == "needs-two-blocks"


def test_admm_schedule_in_state():
    sched = E._admm_sched(0, 3.0)
    assert (sched.tau, sched.gamma, sched.beta) == pytest.approx((0.75, 3.0, 9 / 7))
    assert sched.gamma_next == pytest.approx(2.0)


# inequality constraints ---------------------------------------------------

def test_dual_update_inequality_examples():
    np.testing.assert_array_equal(E.dual_update_inequality([-1.0, 2.0]), [0.0, 2.0])
    np.testing.assert_array_equal(E.dual_update_inequality([-1.0, -3.0]), [0.0, 0.0])
    v = np.array([0.0, 4.0])
    np.testing.assert_array_equal(E.dual_update_inequality(v), v)


@pytest.mark.parametrize("scheme", [E.TWO_P1D, E.ONE_P2D])
def test_inequality_duals_stay_nonnegative(scheme):
    rng = np.random.default_rng(8)
    A = rng.standard_normal((4, 6))
    pb = ConstrainedProblem([Block(P.l1(), P.box(-1.0, 1.0), A)], rng.standard_normal(4) - 1.0, sense="ineq")
    smoother = sm.make_smoother(pb, sm.BREGMAN)
    duals = []
    cfg = E.SolverConfig(scheme, smoother, K_total=200, max_iter=200, terminate=False, record_wall=False)
    E.solve(pb, cfg, observer=lambda s: duals.append(s.it.y_bar))
    assert min(float(d.min()) for d in duals) >= 0.0


# driver -------------------------------------------------------------------

def test_max_iter_zero_keeps_start_only():
    pb = make_basis_pursuit(1, 4, 8, 2)
    smoother = sm.make_smoother(pb, sm.AUGLAG)
    trace = E.solve(pb, E.SolverConfig(E.ONE_P2D, smoother, max_iter=0))
    assert len(trace.records) == 1 and trace.records[0].k == 0
    assert trace.status == E.MAX_ITER


def test_validation_errors():
    pb = make_basis_pursuit(1, 4, 8, 2)
    with pytest.raises(SolverError) as err:
        E.Run(pb, E.SolverConfig(E.I1P2D, sm.make_smoother(pb, sm.BREGMAN)))
    assert err.value.code == "scheme-smoother"
    with pytest.raises(SolverError) as err:
        E.Run(pb, E.SolverConfig(E.ONE_P2D, sm.make_smoother(pb, sm.BREGMAN)))
    assert err.value.code == "config"
    with pytest.raises(SolverError):
        E.Run(pb, E.SolverConfig("3p3d", None))


def test_gamma0_auto_resolution():
    pb = ConstrainedProblem([Block(P.l1(), P.box(-1.0, 1.0), 2 * np.eye(2))], np.zeros(2))
    brg = sm.make_smoother(pb, sm.BREGMAN, L_bar=4.0)
    assert E.resolve_gamma0(pb, E.SolverConfig(E.TWO_P1D, brg)) == 2.0
    assert E.resolve_gamma0(pb, E.SolverConfig(E.ONE_P2D, brg, K_total=9)) == pytest.approx(2 * math.sqrt(8) / 10)
    assert E.resolve_gamma0(pb, E.SolverConfig(E.TWO_P1D, sm.make_smoother(pb, sm.AUGLAG))) == 1.0


def test_kicked_runs_disable_certificates():
    pb = random_bounded(0, 3, 6)
    smoother = sm.make_smoother(pb, sm.BREGMAN)
    trace = E.solve(pb, E.SolverConfig(E.ONE_P2D, smoother, ("kick", 10.0, 1.02), K_total=50, max_iter=20,
                                       certify=True, record_wall=False))
    assert trace.header["certificates_enabled"] is False
    assert trace.header["disabled_reason"]


def test_bp_converges_with_1p2d():
    pb = make_basis_pursuit(1, 24, 64, 4)
    smoother = sm.make_smoother(pb, sm.BREGMAN, center=np.zeros(64))
    # gamma0 is fixed by K = 2000; feasibility then decays like 1/k^2 and crosses 1e-6 near k = 38000
    trace = E.solve(pb, E.SolverConfig(E.ONE_P2D, smoother, K_total=2000, max_iter=60000, record_wall=False))
    assert trace.status == E.CONVERGED
    assert trace.records[-1].feas_rel <= 1e-6
    assert 2000 < trace.records[-1].k < 60000


def test_infeasible_target_hits_max_iter():
    # x in [-0.1, 0.1] cannot reach A x = 5
    pb = ConstrainedProblem([Block(P.zero(), P.box(-0.1, 0.1), np.ones((1, 3)))], np.array([5.0]))
    trace = E.solve(pb, E.SolverConfig(E.TWO_P1D, sm.make_smoother(pb, sm.BREGMAN), max_iter=300,
                                       record_wall=False))
    assert trace.status == E.MAX_ITER
    tail = [r.feas_abs for r in trace.records[-50:]]
    assert min(tail) == pytest.approx(4.7, abs=1e-6)


def test_same_config_same_trace():
    pb = random_bounded(5, 4, 9)
    cfg = E.SolverConfig(E.TWO_P1D, sm.make_smoother(pb, sm.BREGMAN), max_iter=50, record_wall=False)
    a, b = E.solve(pb, cfg), E.solve(pb, cfg)
    assert [vars(r) for r in a.records] == [vars(r) for r in b.records]


# properties ---------------------------------------------------------------

@pytest.mark.parametrize("scheme", [E.TWO_P1D, E.ONE_P2D])
@pytest.mark.parametrize("seed", range(20))
def test_firm_contraction(scheme, seed):
    pb = random_bounded(seed)
    smoother = sm.make_smoother(pb, sm.BREGMAN)
    cfg = E.SolverConfig(scheme, smoother, K_total=200, max_iter=200, certify=True, terminate=False,
                         record_wall=False)
    boxes = []
    trace = E.solve(pb, cfg, observer=lambda s: boxes.append(s.it.x_bar))
    assert trace.status == E.MAX_ITER, trace.events
    recs = trace.records
    assert len(recs) == 201
    for prev, cur in zip(recs, recs[1:]):
        assert cur.psi >= -1e-10
        assert cur.gap <= (1 - prev.tau) * prev.gap - cur.psi + 1e-7 * (1 + abs(prev.gap))
    assert all(np.all(np.abs(x) <= 1.0) for x in boxes)


@pytest.mark.parametrize("scheme", [E.ONE_P2D_SC, E.TWO_P1D_SC, E.ONE_P2D_LG, E.ADMM_NEW])
def test_iterates_stay_in_box(scheme):
    rng = np.random.default_rng(21)
    A = rng.standard_normal((3, 6))
    b = A @ rng.uniform(-0.5, 0.5, 6)
    f = P.strongly_convexify(P.l1(), 0.5)
    if scheme == E.ADMM_NEW:
        pb = ConstrainedProblem([Block(f, P.box(-1.0, 1.0), A[:, :3]), Block(P.l1(), P.box(-1.0, 1.0), A[:, 3:])], b)
        cfg = E.SolverConfig(scheme, max_iter=60, record_wall=False)
    elif scheme == E.ONE_P2D_LG:
        pb = ConstrainedProblem([Block(P.l1(), P.box(-1.0, 1.0), A)], b)
        cfg = E.SolverConfig(scheme, sm.make_smoother(pb, sm.BREGMAN), max_iter=60, record_wall=False)
    else:
        pb = ConstrainedProblem([Block(f, P.box(-1.0, 1.0), A)], b)
        cfg = E.SolverConfig(scheme, max_iter=60, record_wall=False)
    xs = []
    E.solve(pb, cfg, observer=lambda s: xs.append(s.it.x_bar))
    assert all(np.all(np.abs(x) <= 1.0) for x in xs)


@pytest.mark.parametrize("seed", range(3))
def test_weak_duality_against_reference(seed):
    pb = make_basis_pursuit(seed, 5, 10, 2)
    ref = reference_solve_lp(pb)
    smoother = sm.make_smoother(pb, sm.BREGMAN)
    cfg = E.SolverConfig(E.TWO_P1D, smoother, max_iter=150, terminate=False, record_wall=False)
    pairs = []
    E.solve(pb, cfg, observer=lambda s: pairs.append((s.it.x_bar, s.it.y_bar)))
    y_norm = float(np.linalg.norm(ref.y))
    for x, y in pairs:
        # g(y) <= g_gamma(y) at gamma = 1e-10, up to gamma ||x*||^2 / 2
        g = sm.smoothed_dual_value(pb, smoother, y, 1e-10)
        assert pb.objective(x) - g >= -y_norm * np.linalg.norm(pb.residual(x)) - 1e-8

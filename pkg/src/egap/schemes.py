"""Iteration kernels and the outer driver.

Every kernel maps a :class:`SolverState` at iteration ``k`` to the state at
``k + 1``.  The iterate carries the cached residual ``A x_bar - b`` (and,
where a kernel can keep it up to date by linear combinations, ``A^T y_bar``),
so the basic kernels touch the operator as rarely as the method allows:

* 2P1D: 2 prox, 2 ``A``, 1 ``A^T`` per iteration,
* 1P2D: 1 prox, 1 ``A``, 1 ``A^T`` per iteration.

A :class:`Run` owns the counters for one solve.  Certification mode adds
the smoothed gap ``G_k`` and the decay term ``psi_k`` to each record and
checks ``G_{k+1} <= (1 - tau_k) G_k - psi_k`` after every step; the extra
argmin this needs is counted like any other.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field, replace
from typing import Any

import numpy as np

from . import schedule as sch
from . import smoothing as sm
from . import subsolver as sub
from .errors import SolverError
from .linop import adjoint_apply, apply, spectral_norm_sq

TWO_P1D = "2p1d"
ONE_P2D = "1p2d"
TWO_P1D_SC = "2p1d-sc"
ONE_P2D_SC = "1p2d-sc"
ONE_P2D_LG = "1p2d-lg"
I1P2D = "i1p2d"
I2P1D = "i2p1d"
ADMM_NEW = "admm-new"
PADMM_NEW = "padmm-new"
SCHEMES = (TWO_P1D, ONE_P2D, TWO_P1D_SC, ONE_P2D_SC, ONE_P2D_LG, I1P2D, I2P1D, ADMM_NEW, PADMM_NEW)
GENERIC = (TWO_P1D, ONE_P2D, ONE_P2D_LG, I1P2D, I2P1D)

PRIMAL_FIRST = "primal-first"
DUAL_FIRST = "dual-first"

CONVERGED = "converged"
MAX_ITER = "max-iter"
CERTIFICATE_FAILED = "certificate-failed"
INNER_BUDGET = "inner-budget"

CONTRACTION_TOL = 1e-7
ADMM_INNER_DELTA = 1e-10


@dataclass(frozen=True)
class SolverConfig:
    """Everything a solve needs besides the problem.

    ``c_policy`` is ``("const", c)``, ``("kick", s, mult)`` or
    ``("diameter",)``; ``None`` selects the scheme's default constant.
    ``gamma0 = "auto"`` resolves to the value the matching convergence
    result prescribes.
    """

    scheme: str
    smoother: sm.SmootherConfig | None = None
    c_policy: tuple | None = None
    gamma0: float | str = "auto"
    K_total: int | None = None
    eps_f: float = 1e-6
    eps_x: float = 1e-6
    max_iter: int = 1000
    delta0: float = 1e-4
    inner_max_iter: int | None = None
    certify: bool = False
    start: str = PRIMAL_FIRST
    center_policy: str = "fixed"
    terminate: bool = True
    record_wall: bool = True


@dataclass(frozen=True)
class PrimalDualIterate:
    x_bar: np.ndarray
    y_bar: np.ndarray
    residual: np.ndarray
    f_val: float
    Aty: np.ndarray | None = None


@dataclass(frozen=True)
class SolverState:
    it: PrimalDualIterate
    sched: Any
    k: int = 0
    psi: float | None = None
    inner_iters: int = 0
    x_raw: np.ndarray | None = None
    x_star_prev: np.ndarray | None = None
    delta: float | None = None
    q: float | None = None
    center: np.ndarray | None = None
    dual_gap: float = math.inf
    gap_beta: float | None = None


@dataclass
class Counters:
    prox: int = 0
    A: int = 0
    At: int = 0

    def snapshot(self) -> tuple[int, int, int]:
        return self.prox, self.A, self.At


@dataclass
class IterationRecord:
    k: int
    f_val: float
    obj_residual: float | None
    feas_abs: float
    feas_rel: float
    gamma: float
    beta: float
    tau: float
    psi: float | None
    inner_iters: int
    wall_ns: int
    gap: float | None = None
    n_prox: int = 0
    n_A: int = 0
    n_At: int = 0
    feas_bound: float | None = None
    obj_upper: float | None = None
    obj_lower: float | None = None


RECORD_FIELDS = tuple(IterationRecord.__dataclass_fields__)


@dataclass
class Trace:
    header: dict
    records: list[IterationRecord] = field(default_factory=list)
    status: str = MAX_ITER
    events: list[dict] = field(default_factory=list)
    final: PrimalDualIterate | None = None


class Run:
    """One solve: the problem, the configuration, resolved constants and counters."""

    def __init__(self, problem, cfg: SolverConfig, counters: bool = True) -> None:
        validate(problem, cfg)
        self.problem = problem
        self.cfg = cfg
        self.counters = Counters()
        self.count = counters
        self.ineq = problem.sense == "ineq"
        self.events: list[dict] = []
        self.smoother = cfg.smoother
        self.L_bar = cfg.smoother.L_bar if cfg.smoother is not None else None
        self.gamma0 = resolve_gamma0(problem, cfg)
        self.c_policy = cfg.c_policy if cfg.c_policy is not None else ("const", default_c(cfg.scheme))
        self.certificates_on, self.disabled_reason = _certificate_gate(cfg, self.c_policy)
        if cfg.scheme in (TWO_P1D_SC, ONE_P2D_SC):
            self.A_norm_sq = spectral_norm_sq(problem.A)
            self.L_f = self.A_norm_sq / problem.term.sigma_f
        self.D_traj = 0.0

    # counted oracles -----------------------------------------------------
    def res(self, x) -> np.ndarray:
        self.counters.A += 1
        return apply(self.problem.A, x) - self.problem.b

    def At(self, y) -> np.ndarray:
        self.counters.At += 1
        return adjoint_apply(self.problem.A, y)

    def clamp(self, y) -> np.ndarray:
        return np.maximum(y, 0.0) if self.ineq else y

    def feas(self, r) -> float:
        return float(np.linalg.norm(np.maximum(r, 0.0) if self.ineq else r))

    def smoothed_argmin(self, y, gamma, Aty=None, x0=None, delta=None) -> tuple[np.ndarray, int]:
        """``x*_gamma(y)`` with the run's smoother; returns the point and inner iterations."""
        self.counters.prox += 1
        if self.smoother.kind == sm.BREGMAN:
            if Aty is None:
                Aty = self.At(y)
            return self.problem.term.prox(1.0 / gamma, self.smoother.center - Aty / gamma), 0
        delta = sm.AL_DELTA if delta is None else delta
        res = _inner(self, lambda: sub.solve_aug_lagrangian(self.problem, y, gamma, delta, x0=x0,
                                                           max_iter=self.cfg.inner_max_iter))
        return res.x, res.iterations

    def prox_S(self, x_hat, y_hat, beta, Aty_hat=None, delta=None) -> tuple[np.ndarray, int]:
        """``prox_{Sf}(x_hat, y_hat; beta)`` for the smoother's ``S``."""
        self.counters.prox += 1
        if self.smoother.S_choice == sm.IDENTITY:
            if Aty_hat is None:
                Aty_hat = self.At(y_hat)
            lam = beta / self.L_bar
            return self.problem.term.prox(lam, x_hat - lam * Aty_hat), 0
        delta = sm.AL_DELTA if delta is None else delta
        res = _inner(self, lambda: sub.solve_inexact_prox_Af(self.problem, x_hat, y_hat, beta, delta,
                                                            self.L_bar, max_iter=self.cfg.inner_max_iter))
        return res.x, res.iterations

    def d_b(self, x, r=None) -> float:
        return sm.prox_distance(self.problem, self.smoother, x, r)


def _inner(run: Run, solve):
    try:
        return solve()
    except SolverError as err:
        if err.code != "inner-budget":
            raise
        run.events.append({"event": "inner-budget", "bound": err.payload.get("bound"),
                           "iterations": err.payload.get("iterations")})
        return sub.FistaResult(err.payload["x"], err.payload["iterations"], err.payload["bound"], math.nan)


# configuration ------------------------------------------------------------

def _matrix() -> dict:
    from importlib import resources

    try:
        import tomllib
    except ModuleNotFoundError:
        import tomli as tomllib
    with resources.files("egap").joinpath("data/variants.toml").open("rb") as fh:
        return tomllib.load(fh)["schemes"]


VARIANTS = _matrix()


def default_c(scheme: str) -> float:
    return float(VARIANTS[scheme]["default_c"])


def bound_family(cfg: SolverConfig) -> str:
    kind = cfg.smoother.kind if cfg.smoother is not None else "none"
    return VARIANTS[cfg.scheme]["bound"].get(kind, "")


def validate(problem, cfg: SolverConfig) -> None:
    """Check a configuration against the variant matrix and the problem's structure."""
    if cfg.scheme not in VARIANTS:
        raise SolverError("config", f"unknown scheme {cfg.scheme!r}")
    row = VARIANTS[cfg.scheme]
    kind = cfg.smoother.kind if cfg.smoother is not None else "none"
    if kind not in row["smoothers"]:
        raise SolverError("scheme-smoother", f"scheme {cfg.scheme} does not accept smoother {kind}")
    needs = list(row["requires"]) + list(row.get(f"requires_for_{kind}", []))
    if "strong-convexity" in needs and not problem.term.sigma_f > 0:
        raise SolverError("needs-strong-convexity", f"{cfg.scheme} needs a strongly convex objective")
    if "two-blocks" in needs and len(problem.blocks) != 2:
        raise SolverError("needs-two-blocks", f"{cfg.scheme} needs exactly two blocks")
    if "K_total" in needs and cfg.gamma0 == "auto" and not cfg.K_total:
        raise SolverError("config", f"{cfg.scheme} with the {kind} smoother needs K_total")
    if cfg.start not in (PRIMAL_FIRST, DUAL_FIRST):
        raise SolverError("config", f"unknown start variant {cfg.start!r}")
    if cfg.center_policy not in ("fixed", "previous-argmin"):
        raise SolverError("config", f"unknown center policy {cfg.center_policy!r}")
    if cfg.max_iter < 0:
        raise SolverError("config", "max_iter must be nonnegative")
    if problem.sense == "ineq" and (cfg.scheme not in (TWO_P1D, ONE_P2D) or kind != sm.BREGMAN):
        raise SolverError("config", "inequality constraints are handled by 2p1d and 1p2d with the Bregman smoother")
    if cfg.c_policy is not None and cfg.c_policy[0] == "diameter" and kind != sm.BREGMAN:
        raise SolverError("config", "the diameter c_k policy needs the Bregman smoother")


# decision: gamma0-auto
def resolve_gamma0(problem, cfg: SolverConfig) -> float:
    if cfg.gamma0 != "auto":
        return float(cfg.gamma0)
    s = cfg.scheme
    if s in (ADMM_NEW, PADMM_NEW):
        return 3.0
    if s in (TWO_P1D_SC, ONE_P2D_SC):
        return 0.0
    L = cfg.smoother.L_bar
    if cfg.smoother.kind == sm.AUGLAG:
        return 1.0
    if s == ONE_P2D:
        return 2.0 * math.sqrt(2.0 * L) / (cfg.K_total + 1)
    return math.sqrt(L)


# decision: certificate-gate
def _certificate_gate(cfg: SolverConfig, c_policy) -> tuple[bool, str | None]:
    if c_policy[0] != "const":
        return False, "kicked or adaptive c_k"
    if cfg.center_policy != "fixed":
        return False, "moving prox center"
    if c_policy[1] != default_c(cfg.scheme) and cfg.scheme in GENERIC:
        return False, "c_k differs from the published schedule"
    if cfg.scheme == I2P1D:
        return False, "no convergence result for i2p1d"
    if cfg.scheme == PADMM_NEW:
        return False, "no convergence result for the linearized ADMM step"
    return True, None


# starting points ----------------------------------------------------------

def start_point(run: Run, gamma0: float, beta0: float, variant: str = PRIMAL_FIRST) -> PrimalDualIterate:
    """Starting iterate with ``G_{gamma0 beta0}(w0) <= -gamma0 d_b(S x0, S x_c)``.

    ``primal-first`` takes ``x0 = x*_{gamma0}(0)`` and ``y0 = (A x0 - b)/beta0``;
    ``dual-first`` takes ``y0 = (A x_c - b)/beta0`` and
    ``x0 = prox_{Sf}(x_c, y0; beta0)``.
    """
    L = run.L_bar
    if beta0 * gamma0 < L * (1 - 1e-12):
        raise SolverError("init-product", f"beta0*gamma0={beta0 * gamma0} is below L_bar={L}")
    m = run.problem.m
    if variant == PRIMAL_FIRST:
        x0, _ = run.smoothed_argmin(np.zeros(m), gamma0, Aty=np.zeros(run.problem.n))
        r0 = run.res(x0)
        y0 = run.clamp(r0 / beta0)
    else:
        rc = run.res(run.smoother.center)
        y0 = run.clamp(rc / beta0)
        x0, _ = run.prox_S(run.smoother.center, y0, beta0)
        r0 = run.res(x0)
    Aty = run.At(y0) if run.cfg.scheme in (TWO_P1D, I2P1D) else None
    return PrimalDualIterate(x0, y0, r0, run.problem.objective(x0), Aty)


def _initial_state(run: Run) -> SolverState:
    cfg, s = run.cfg, run.cfg.scheme
    if s in (TWO_P1D_SC, ONE_P2D_SC):
        st = sch.sc_start(run.L_f)
        x0 = run.problem.term.linear_argmin(np.zeros(run.problem.n))
        run.counters.prox += 1
        r0 = run.res(x0)
        y0 = r0 / run.L_f
        it = PrimalDualIterate(x0, y0, r0, run.problem.objective(x0), run.At(y0))
        return SolverState(it, st)
    if s in (ADMM_NEW, PADMM_NEW):
        return admm_start(run)
    if s == ONE_P2D_LG:
        st = sch.lg_start(run.L_bar)
        if cfg.gamma0 != "auto":
            st = replace(st, gamma=run.gamma0, beta=run.L_bar / run.gamma0)
    else:
        c0 = run.c_policy[1] if run.c_policy[0] == "const" else default_c(s)
        variant = sch.GENERIC_2P1D if s in (TWO_P1D, I2P1D) else sch.GENERIC_1P2D
        st = sch.generic_start(run.gamma0, run.L_bar, c0, variant=variant)
    delta = cfg.delta0 if s in (I1P2D, I2P1D) else None
    if s == I1P2D:
        res = _inner(run, lambda: sub.solve_aug_lagrangian(run.problem, np.zeros(run.problem.m), st.gamma,
                                                          delta, max_iter=cfg.inner_max_iter))
        run.counters.prox += 1
        x0 = res.x
        r0 = run.res(x0)
        y0 = r0 / st.beta
        it = PrimalDualIterate(x0, y0, r0, run.problem.objective(x0))
        run.D_traj = 0.5 * float(r0 @ r0)
        return SolverState(it, st, delta=delta, x_star_prev=x0, inner_iters=res.iterations)
    it = start_point(run, st.gamma, st.beta, cfg.start)
    return SolverState(it, st, delta=delta, x_star_prev=it.x_bar, center=run.smoother.center)


# kernels ------------------------------------------------------------------

def _combine(a, u, b, v):
    return a * u + b * v


def step_2p1d(run: Run, state: SolverState, delta: float | None = None) -> SolverState:
    """Two primal steps and one dual step.

    Order: ``x*_{gamma_k}(y_bar)``, its residual, ``x_hat`` and its residual by
    combination, the parameter update, ``y_hat = r_hat / beta_{k+1}``,
    ``A^T y_hat``, the prox step, its residual, and ``y_bar`` (with ``A^T y_bar``)
    by combination.
    """
    it, st = state.it, state.sched
    tau = st.tau
    x_star, n1 = run.smoothed_argmin(it.y_bar, st.gamma, Aty=it.Aty, x0=state.x_star_prev, delta=delta)
    r_star = run.res(x_star)
    x_hat = _combine(1 - tau, it.x_bar, tau, x_star)
    r_hat = _combine(1 - tau, it.residual, tau, r_star)
    nxt = _advance(run, state)
    beta1 = nxt.beta
    y_hat = run.clamp(r_hat / beta1)
    Aty_hat = run.At(y_hat)
    x_new, n2 = run.prox_S(x_hat, y_hat, beta1, Aty_hat, delta=delta)
    r_new = run.res(x_new)
    y_new = _combine(1 - tau, it.y_bar, tau, y_hat)
    Aty_new = _combine(1 - tau, it.Aty, tau, Aty_hat)
    psi = tau * tau / (2 * beta1) * float(r_star @ r_star)
    new_it = PrimalDualIterate(x_new, y_new, r_new, run.problem.objective(x_new), Aty_new)
    return SolverState(new_it, nxt, state.k + 1, psi, n1 + n2, x_star_prev=x_star, delta=state.delta,
                       center=state.center)


def step_1p2d(run: Run, state: SolverState, delta: float | None = None) -> SolverState:
    """One primal step and two dual steps.

    ``gamma_{k+1}`` is computed first; then ``y_hat``, ``A^T y_hat``,
    ``x*_{gamma_{k+1}}(y_hat)`` and its residual.  ``x_bar`` and its
    residual follow by combination and ``y_bar`` by a gradient step.
    """
    it, st = state.it, state.sched
    tau = st.tau
    nxt = _advance(run, state)
    gamma1 = nxt.gamma
    y_beta = run.clamp(it.residual / st.beta)
    y_hat = run.clamp(_combine(1 - tau, it.y_bar, tau, y_beta))
    Aty_hat = run.At(y_hat) if run.smoother.kind == sm.BREGMAN else None
    x_star, n1 = run.smoothed_argmin(y_hat, gamma1, Aty=Aty_hat, x0=state.x_star_prev, delta=delta)
    if Aty_hat is None:
        run.counters.At += 1  # the AL argmin consumes A^T y_hat inside its gradient
    r_star = run.res(x_star)
    x_new = _combine(1 - tau, it.x_bar, tau, x_star)
    r_new = _combine(1 - tau, it.residual, tau, r_star)
    y_new = run.clamp(y_hat + (gamma1 / run.L_bar) * r_star)
    psi = None
    if run.cfg.certify:
        d_hat = run.d_b(x_star, r_star)
        c = st.c
        d_bar = 0.0
        if c != 0:
            x_bar_star, _ = run.smoothed_argmin(it.y_bar, gamma1, x0=x_star)
            d_bar = run.d_b(x_bar_star)
        psi = tau * (1 - tau) * st.gamma * (d_hat - c * d_bar)
    new_it = PrimalDualIterate(x_new, y_new, r_new, run.problem.objective(x_new))
    new_state = SolverState(new_it, nxt, state.k + 1, psi, n1, x_star_prev=x_star, delta=state.delta,
                            center=state.center)
    if run.cfg.center_policy == "previous-argmin":
        run.smoother = sm.with_center(run.smoother, x_star)
    if run.c_policy[0] == "kick" and state.x_star_prev is not None:
        new_state = replace(new_state, dual_gap=st.gamma * float(np.linalg.norm(x_star - state.x_star_prev)))
    return new_state


def _advance(run: Run, state: SolverState):
    st = state.sched
    if st.variant == sch.LIPSCHITZ_GRAD:
        return sch.lg_advance(st)
    c_next = None
    if run.c_policy[0] == "kick":
        base = default_c(run.cfg.scheme)
        if state.k % sch.KICK_EVERY == 0:
            st = sch.kick_gamma(st, run.feas(state.it.residual), state.dual_gap, run.c_policy[1],
                                run.c_policy[2])
            if st.c != state.sched.c:
                run.events.append({"event": "kick", "k": state.k, "c": st.c})
        c_next = base
    elif run.c_policy[0] == "diameter" and state.x_star_prev is not None:
        D = sm.estimate_diameters(run.problem, run.smoother).D_X_S
        c_next = min(1.0, run.d_b(state.x_star_prev) / D) if D > 0 else 0.0
    return sch.advance(st, c_next)


def step_sc(run: Run, state: SolverState, flavor: str) -> SolverState:
    """Strongly convex variants: exact ``x*(y)`` and the ``tau``/``beta`` rule without gamma."""
    if not run.problem.term.sigma_f > 0:
        raise SolverError("needs-strong-convexity", "step_sc needs sigma_f > 0")
    it, st = state.it, state.sched
    tau, beta = st.tau, st.beta
    term = run.problem.term
    if flavor == TWO_P1D_SC:
        x_star = term.linear_argmin(it.Aty)
        run.counters.prox += 1
        r_star = run.res(x_star)
        x_hat = _combine(1 - tau, it.x_bar, tau, x_star)
        r_hat = _combine(1 - tau, it.residual, tau, r_star)
        y_hat = r_hat / beta
        Aty_hat = run.At(y_hat)
        lam = beta / run.A_norm_sq
        x_new = term.prox(lam, x_hat - lam * Aty_hat)
        run.counters.prox += 1
        r_new = run.res(x_new)
        y_new = _combine(1 - tau, it.y_bar, tau, y_hat)
        Aty_new = _combine(1 - tau, it.Aty, tau, Aty_hat)
    elif flavor == ONE_P2D_SC:
        y_hat = _combine(1 - tau, it.y_bar, tau, it.residual / beta)
        Aty_hat = run.At(y_hat)
        x_star = term.linear_argmin(Aty_hat)
        run.counters.prox += 1
        r_star = run.res(x_star)
        x_new = _combine(1 - tau, it.x_bar, tau, x_star)
        r_new = _combine(1 - tau, it.residual, tau, r_star)
        y_new = y_hat + r_star / run.L_f
        Aty_new = None
    else:
        raise SolverError("config", f"unknown strongly convex flavor {flavor!r}")
    new_it = PrimalDualIterate(x_new, y_new, r_new, run.problem.objective(x_new), Aty_new)
    if flavor == TWO_P1D_SC:
        # the prox step ran with beta_k, so the new iterate is paired with beta_k
        psi = tau * tau / (2 * (1 - tau) * beta) * float(r_star @ r_star)
        return SolverState(new_it, sch.sc_advance(st), state.k + 1, psi, 0, gap_beta=beta)
    return SolverState(new_it, sch.sc_advance(st), state.k + 1, 0.0, 0)


def _q_value(run: Run, tau: float, y_bar, y_star) -> float:
    return (1 - tau) * tau * float(np.linalg.norm(y_bar - y_star)) + 0.5 * (run.D_traj + 1.0)


def step_i1p2d(run: Run, state: SolverState, delta_k: float | None = None) -> SolverState:
    """Inexact 1P2D with the augmented-Lagrangian smoother, ``c = 0`` and ``gamma = 1``.

    Without an explicit ``delta_k`` the accuracy follows
    ``delta_k = delta_{k-1} min(1, q_{k-1} / q_k)``, so that ``q_k delta_k``
    never increases.
    """
    it, st = state.it, state.sched
    tau, gamma = st.tau, st.gamma
    y_star = it.residual / st.beta
    y_hat = _combine(1 - tau, it.y_bar, tau, y_star)
    q = _q_value(run, tau, it.y_bar, y_star)
    if delta_k is None:
        delta_k = state.delta
        if state.q is not None and q > state.q:
            delta_k = state.delta * state.q / q
            run.events.append({"event": "delta-shrink", "k": state.k, "delta": delta_k})
    res = _inner(run, lambda: sub.solve_aug_lagrangian(run.problem, y_hat, gamma, delta_k,
                                                      x0=state.x_star_prev, max_iter=run.cfg.inner_max_iter))
    run.counters.prox += 1
    run.counters.At += 1
    x_t = res.x
    r_t = run.res(x_t)
    run.D_traj = max(run.D_traj, 0.5 * float(r_t @ r_t))
    x_new = _combine(1 - tau, it.x_bar, tau, x_t)
    r_new = _combine(1 - tau, it.residual, tau, r_t)
    y_new = y_hat + gamma * r_t
    nxt = sch.advance(st)
    new_it = PrimalDualIterate(x_new, y_new, r_new, run.problem.objective(x_new))
    return SolverState(new_it, nxt, state.k + 1, None, res.iterations, x_star_prev=x_t, delta=delta_k, q=q)


def step_i2p1d(run: Run, state: SolverState) -> SolverState:
    """Inexact 2P1D: both primal steps solved to the current ``delta`` by the inner solver."""
    return step_2p1d(run, state, delta=state.delta)


def dual_update_inequality(v) -> np.ndarray:
    """Componentwise ``max(0, v)`` used by all dual formulas for ``Ax <= b``."""
    return np.maximum(np.asarray(v, dtype=float), 0.0)


# ADMM variants ------------------------------------------------------------

@dataclass(frozen=True)
class AdmmState:
    """Schedule slot of an ADMM solve: parameters at ``k`` plus ``gamma_{k+1}``."""

    k: int
    gamma0: float
    params: sch.AdmmSchedule
    gamma_next: float

    @property
    def tau(self) -> float:
        return self.params.tau

    @property
    def gamma(self) -> float:
        return self.params.gamma

    @property
    def beta(self) -> float:
        return self.params.beta


def _admm_sched(k: int, gamma0: float) -> AdmmState:
    return AdmmState(k, gamma0, sch.admm_params(k, gamma0), sch.admm_params(k + 1, gamma0).gamma)


def admm_center(run: Run) -> np.ndarray:
    """Block-1 center: the configured smoother center if any, else the projection of 0."""
    blk = run.problem.blocks[0]
    n1 = np.atleast_2d(blk.A).shape[1]
    if run.cfg.smoother is not None:
        return run.cfg.smoother.center[:n1]
    return blk.X.project(np.zeros(n1))


def _admm_blocks(run: Run, x_raw, y_hat, tau, gamma_next, rho, eta) -> tuple[np.ndarray, np.ndarray, int]:
    """Primal part of the ADMM-variant step; returns the new raw ``(x1, x2)`` and inner iterations."""
    p = run.problem
    (b1, b2) = p.blocks
    A1, A2 = np.atleast_2d(b1.A), np.atleast_2d(b2.A)
    n1 = A1.shape[1]
    x1k, x2k = x_raw[:n1], x_raw[n1:]
    xc = admm_center(run)
    A2x2 = A2 @ x2k
    run.counters.A += 1
    # gamma/2 ||A1(x1 - xc)||^2 + rho/2 ||A1 x1 - t||^2 = kappa/2 ||A1 x1 - c||^2 + const
    t = p.b - A2x2 - y_hat / rho
    kappa = gamma_next + rho
    c1 = (gamma_next * (A1 @ xc) + rho * t) / kappa
    r1 = sub.solve_block_quadratic(b1.f, b1.X, A1, c1, kappa, ADMM_INNER_DELTA, x0=x1k,
                                   max_iter=run.cfg.inner_max_iter)
    run.counters.prox += 1
    x1 = r1.x
    A1x1 = A1 @ x1
    run.counters.A += 1
    c2 = p.b - A1x1 - y_hat / eta
    r2 = sub.solve_block_quadratic(b2.f, b2.X, A2, c2, eta, ADMM_INNER_DELTA, x0=x2k,
                                   max_iter=run.cfg.inner_max_iter)
    run.counters.prox += 1
    return x1, r2.x, r1.iterations + r2.iterations


def _padmm_blocks(run: Run, x_raw, y_hat, tau, gamma_next, rho, eta) -> tuple[np.ndarray, np.ndarray, int]:
    """Linearized block updates: one prox per block at a gradient-shifted point.

    With ``kappa = gamma_{k+1} + rho`` and ``alpha_i = ||A_i||^{-2}``::

        x1 = prox_{(alpha1/kappa) f1}(x1 - (alpha1/kappa) [A1^T(rho r + y_hat) + gamma A1^T A1 (x1 - xc)])
        x2 = prox_{(alpha2/eta) f2}(x2 - (alpha2/eta) A2^T(eta r' + y_hat))

    where ``r`` and ``r'`` are the residuals before each block update.  This
    is one proximal-gradient step on each block subproblem of the exact
    variant, so it coincides with it when ``A_i^T A_i = I``.
    """
    from . import prox as P
    p = run.problem
    (b1, b2) = p.blocks
    A1, A2 = np.atleast_2d(b1.A), np.atleast_2d(b2.A)
    n1 = A1.shape[1]
    x1k, x2k = x_raw[:n1], x_raw[n1:]
    xc = admm_center(run)
    alpha1 = 1.0 / (np.linalg.norm(A1, 2) ** 2)
    alpha2 = 1.0 / (np.linalg.norm(A2, 2) ** 2)
    kappa = gamma_next + rho
    A1x1k, A2x2k = A1 @ x1k, A2 @ x2k
    run.counters.A += 2
    r = A1x1k + A2x2k - p.b
    grad1 = A1.T @ (rho * r + y_hat + gamma_next * (A1x1k - A1 @ xc))
    run.counters.At += 1
    s1 = alpha1 / kappa
    x1 = P.prox_eval(b1.f, b1.X, s1, x1k - s1 * grad1)
    A1x1 = A1 @ x1
    run.counters.A += 1
    r2 = A1x1 + A2x2k - p.b
    grad2 = A2.T @ (eta * r2 + y_hat)
    run.counters.At += 1
    s2 = alpha2 / eta
    x2 = P.prox_eval(b2.f, b2.X, s2, x2k - s2 * grad2)
    run.counters.prox += 2
    return x1, x2, 0


def admm_start(run: Run) -> SolverState:
    """Start from the block updates and dual step with ``y_hat = 0`` and ``x2 = proj(0)``."""
    p = run.problem
    sched = _admm_sched(0, run.gamma0)
    n1 = np.atleast_2d(p.blocks[0].A).shape[1]
    x2 = p.blocks[1].X.project(np.zeros(p.n - n1))
    x_init = np.concatenate([admm_center(run), x2])
    blocks = _padmm_blocks if run.cfg.scheme == PADMM_NEW else _admm_blocks
    par = sched.params
    x1, x2, inner = blocks(run, x_init, np.zeros(p.m), par.tau, sched.gamma_next, par.rho, par.eta)
    x = np.concatenate([x1, x2])
    r = run.res(x)
    y = par.eta * r
    it = PrimalDualIterate(x, y, r, p.objective(x))
    return SolverState(it, sched, 0, None, inner, x_raw=x)


def step_admm_new(run: Run, state: SolverState, params: tuple | None = None,
                  linearized: bool = False) -> SolverState:
    """One step of the ADMM variant (or its linearized form).

    ``params = (tau, gamma_next, beta, rho, eta)`` overrides the schedule,
    which is how the reduction to the standard ADMM step is exercised.
    """
    it, st = state.it, state.sched
    if params is None:
        par = st.params
        tau, gamma_next, beta, rho, eta = par.tau, st.gamma_next, par.beta, par.rho, par.eta
    else:
        tau, gamma_next, beta, rho, eta = params
    y_hat = (1 - tau) * it.y_bar + (tau / beta) * it.residual if tau else it.y_bar.copy()
    blocks = _padmm_blocks if linearized else _admm_blocks
    x1, x2, inner = blocks(run, state.x_raw, y_hat, tau, gamma_next, rho, eta)
    x_raw = np.concatenate([x1, x2])
    r_raw = run.res(x_raw)
    x_new = _combine(1 - tau, it.x_bar, tau, x_raw)
    r_new = _combine(1 - tau, it.residual, tau, r_raw)
    y_new = y_hat + eta * r_raw
    new_it = PrimalDualIterate(x_new, y_new, r_new, run.problem.objective(x_new))
    return SolverState(new_it, _admm_sched(st.k + 1, st.gamma0), state.k + 1, None, inner, x_raw=x_raw)


def step_padmm_new(run: Run, state: SolverState, params: tuple | None = None) -> SolverState:
    return step_admm_new(run, state, params, linearized=True)


# certification ------------------------------------------------------------

def smoothed_gap_at(run: Run, state: SolverState) -> float:
    """``G_k`` at the current iterate (counted: one argmin, one ``A``, ``A^T`` if not cached)."""
    it, st = state.it, state.sched
    if run.cfg.scheme in (TWO_P1D_SC, ONE_P2D_SC):
        Aty = it.Aty if it.Aty is not None else run.At(it.y_bar)
        x_s = run.problem.term.linear_argmin(Aty)
        run.counters.prox += 1
        r_s = run.res(x_s)
        g = run.problem.objective(x_s) + float(it.y_bar @ r_s)
        # decision: sc-gap-pairing
        beta = st.beta if state.gap_beta is None else state.gap_beta
        return it.f_val - g + float(it.residual @ it.residual) / (2 * beta)
    x_s, _ = run.smoothed_argmin(it.y_bar, st.gamma, Aty=it.Aty, x0=state.x_star_prev)
    r_s = run.res(x_s)
    g = run.problem.objective(x_s) + float(it.y_bar @ r_s) + st.gamma * run.d_b(x_s, r_s)
    rp = np.maximum(it.residual, 0.0) if run.ineq else it.residual
    return it.f_val - g + float(rp @ rp) / (2 * st.beta)


# driver -------------------------------------------------------------------

_KERNELS = {
    TWO_P1D: step_2p1d,
    ONE_P2D: step_1p2d,
    ONE_P2D_LG: step_1p2d,
    I1P2D: step_i1p2d,
    I2P1D: step_i2p1d,
    TWO_P1D_SC: lambda run, s: step_sc(run, s, TWO_P1D_SC),
    ONE_P2D_SC: lambda run, s: step_sc(run, s, ONE_P2D_SC),
    ADMM_NEW: step_admm_new,
    PADMM_NEW: step_padmm_new,
}


def step(run: Run, state: SolverState) -> SolverState:
    return _KERNELS[run.cfg.scheme](run, state)


# decision: record-indexing
def _record(run: Run, state: SolverState, f_star, t0: int, gap) -> IterationRecord:
    it, st = state.it, state.sched
    feas = run.feas(it.residual)
    nb = max(1.0, float(np.linalg.norm(run.problem.b)))
    wall = time.perf_counter_ns() - t0 if run.cfg.record_wall else 0
    p, a, at = run.counters.snapshot()
    return IterationRecord(
        k=state.k, f_val=it.f_val, obj_residual=None if f_star is None else it.f_val - f_star,
        feas_abs=feas, feas_rel=feas / nb, gamma=float(st.gamma), beta=float(st.beta), tau=float(st.tau),
        psi=state.psi, inner_iters=state.inner_iters, wall_ns=wall, gap=gap, n_prox=p, n_A=a, n_At=at)


def _header(run: Run, state: SolverState) -> dict:
    cfg = run.cfg
    notes = []
    if cfg.scheme == ONE_P2D_LG:
        notes.append("step size shifted to tau_k = 1/(k+2)")
    if cfg.scheme == I1P2D:
        notes.append("q_k uses the running residual constant in place of D^A")
    return {
        "scheme": cfg.scheme,
        "smoother": None if cfg.smoother is None else cfg.smoother.kind,
        "L_bar": run.L_bar,
        "gamma0": run.gamma0,
        "beta0": float(state.sched.beta),
        "c_policy": list(run.c_policy),
        "K_total": cfg.K_total,
        "certify": cfg.certify,
        "certificates_enabled": run.certificates_on,
        "disabled_reason": run.disabled_reason,
        "bound_family": bound_family(cfg),
        "sense": run.problem.sense,
        "delta0": cfg.delta0 if cfg.scheme in (I1P2D, I2P1D) else None,
        "notes": notes,
    }


def solve(problem, cfg: SolverConfig, f_star: float | None = None, observer=None) -> Trace:
    """Run the configured scheme until the stopping rule or ``max_iter``.

    Stops when ``||A x_bar - b|| / max(1, ||b||) <= eps_f`` and
    ``||x_bar_{k+1} - x_bar_k|| / max(1, ||x_bar_k||) <= eps_x``.
    ``observer``, if given, is called with the state after every record
    (for example to measure ``||x_bar_k - x*||``).
    """
    run = Run(problem, cfg)
    if f_star is None and problem.reference is not None:
        f_star = problem.reference.f
    t0 = time.perf_counter_ns()
    certify = cfg.certify and cfg.scheme not in (ADMM_NEW, PADMM_NEW, I1P2D)
    state = _initial_state(run)
    trace = Trace(_header(run, state))
    gap = smoothed_gap_at(run, state) if certify else None
    trace.records.append(_record(run, state, f_star, t0, gap))
    if observer is not None:
        observer(state)
    nb = max(1.0, float(np.linalg.norm(problem.b)))
    status = MAX_ITER
    for _ in range(cfg.max_iter):
        prev = state
        try:
            state = step(run, state)
        except SolverError as err:
            trace.events.append({"event": err.code, "k": prev.k, "message": str(err)})
            status = CERTIFICATE_FAILED if err.code in ("contraction-broken",) else INNER_BUDGET
            state = prev
            break
        new_gap = smoothed_gap_at(run, state) if certify else None
        trace.records.append(_record(run, state, f_star, t0, new_gap))
        if observer is not None:
            observer(state)
        if state.q is not None and "q0" not in trace.header:
            trace.header["q0"] = state.q
        if certify and run.certificates_on and state.psi is not None:
            bound = (1 - prev.sched.tau) * gap - state.psi
            if new_gap > bound + CONTRACTION_TOL * (1 + abs(gap)):
                trace.events.append({"event": "certificate-failed", "k": state.k, "gap": new_gap,
                                     "bound": bound, "psi": state.psi})
                status = CERTIFICATE_FAILED
                break
        gap = new_gap
        if cfg.terminate:
            dx = float(np.linalg.norm(state.it.x_bar - prev.it.x_bar))
            rel_x = dx / max(1.0, float(np.linalg.norm(prev.it.x_bar)))
            if run.feas(state.it.residual) / nb <= cfg.eps_f and rel_x <= cfg.eps_x:
                status = CONVERGED
                break
    trace.status = status
    trace.events = run.events + trace.events
    trace.final = state.it
    trace.header["counters"] = dict(zip(("prox", "A", "At"), run.counters.snapshot()))
    return trace

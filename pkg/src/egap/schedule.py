"""Parameter sequences for the outer schemes.

The generic schemes keep ``beta_{k+1} gamma_{k+1} = L_bar tau_k^2`` by
choosing ``tau_k = 1/a_k`` from a quadratic recursion in ``a_k``; the
strongly convex, Lipschitz-gradient and ADMM variants use their own closed
forms.  All states are immutable values; every update returns a new one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

from .errors import SolverError

SLACK = 1e-12
GENERIC_2P1D = "generic-2p1d"
GENERIC_1P2D = "generic-1p2d"
STRONGLY_CONVEX = "strongly-convex"
LIPSCHITZ_GRAD = "lipschitz-grad"
ADMM = "admm"

# Defaults of the gamma kick heuristic.
# decision: kick-sign
KICK_S = 10.0
KICK_MULT = 1.02
KICK_EVERY = 5


def init_a(c0: float) -> float:
    """``a_0 = (1 + c0 + sqrt(4(1 - c0) + (1 + c0)^2)) / 2``."""
    if not -1.0 < c0 <= 1.0:
        raise SolverError("bad-c", f"c0={c0} must lie in (-1, 1]")
    return 0.5 * (1.0 + c0 + math.sqrt(4.0 * (1.0 - c0) + (1.0 + c0) ** 2))


def next_a(a_k: float, c_next: float) -> float:
    """``a_{k+1} = (1 + c + sqrt(4 a_k^2 + (1 - c)^2)) / 2``."""
    return 0.5 * (1.0 + c_next + math.sqrt(4.0 * a_k * a_k + (1.0 - c_next) ** 2))


@dataclass(frozen=True)
class ScheduleState:
    k: int
    a: float
    tau: float
    gamma: float
    beta: float
    c: float
    L_bar: float
    variant: str = GENERIC_1P2D


def generic_start(gamma0: float, L_bar: float, c0: float, beta0: float | None = None,
                  variant: str = GENERIC_1P2D) -> ScheduleState:
    """Initial schedule with ``beta_0 = L_bar / gamma_0`` unless given."""
    if not gamma0 > 0:
        raise SolverError("bad-gamma", "gamma0 must be positive")
    beta0 = L_bar / gamma0 if beta0 is None else beta0
    a0 = init_a(c0)
    return ScheduleState(0, a0, 1.0 / a0, float(gamma0), float(beta0), float(c0), float(L_bar), variant)


def update_gamma_beta(state: ScheduleState) -> tuple[float, float]:
    """``(gamma_{k+1}, beta_{k+1})`` from ``beta_{k+1} = (1 - tau) beta``, ``gamma_{k+1} = (1 - c tau) gamma``.

    Checks ``beta_{k+1} gamma_{k+1} >= L_bar tau_k^2`` up to a relative
    rounding slack.
    """
    beta = (1.0 - state.tau) * state.beta
    gamma = (1.0 - state.c * state.tau) * state.gamma
    need = state.L_bar * state.tau ** 2
    if beta * gamma < need - SLACK * max(1.0, need):
        raise SolverError("contraction-broken", "beta gamma fell below L_bar tau^2",
                          k=state.k, product=beta * gamma, needed=need)
    return gamma, beta


def advance(state: ScheduleState, c_next: float | None = None) -> ScheduleState:
    """Move the generic schedule from ``k`` to ``k + 1``."""
    gamma, beta = update_gamma_beta(state)
    c_next = state.c if c_next is None else c_next
    a = next_a(state.a, c_next)
    return replace(state, k=state.k + 1, a=a, tau=1.0 / a, gamma=gamma, beta=beta, c=c_next)


def sc_start(L_f: float) -> ScheduleState:
    """Strongly convex rule: ``beta_0 = L_f`` and ``tau_0 = (sqrt 5 - 1) / 2``; gamma is unused."""
    tau0 = 0.5 * (math.sqrt(5.0) - 1.0)
    return ScheduleState(0, 1.0 / tau0, tau0, 0.0, float(L_f), 0.0, float(L_f), STRONGLY_CONVEX)


def sc_next_tau(tau_k: float) -> float:
    """``tau_{k+1} = (tau/2)(sqrt(tau^2 + 4) - tau)``, the root of ``t^2 = (1 - t) tau^2``."""
    return 0.5 * tau_k * (math.sqrt(tau_k * tau_k + 4.0) - tau_k)


def sc_advance(state: ScheduleState) -> ScheduleState:
    tau = sc_next_tau(state.tau)
    return replace(state, k=state.k + 1, a=1.0 / tau, tau=tau, beta=(1.0 - state.tau) * state.beta)


# decision: lg-shift
def lg_tau(k: int) -> float:
    """Step size of the Lipschitz-gradient rule, shifted to ``1/(k + 2)`` so that ``beta_1 > 0``."""
    return 1.0 / (k + 2)


def lg_update(k: int, gamma_k: float, beta_k: float, L_bar: float = 1.0) -> tuple[float, float, float]:
    """``(gamma_{k+1}, beta_{k+1}, tau_k)`` for the Lipschitz-gradient variant."""
    if k < 0:
        raise ValueError("k must be nonnegative")
    tau = lg_tau(k)
    gamma = (1.0 - tau / (1.0 + tau)) * gamma_k
    beta = (1.0 - tau) * beta_k
    need = L_bar * tau * tau
    if gamma * beta < need - SLACK * max(1.0, need):
        raise SolverError("contraction-broken", "gamma beta fell below L_bar tau^2", k=k)
    return gamma, beta, tau


def lg_start(L_bar: float) -> ScheduleState:
    """Initial Lipschitz-gradient state; ``c`` holds the implied ``c_k = 1/(1 + tau_k)``."""
    g0 = math.sqrt(L_bar)
    tau = lg_tau(0)
    return ScheduleState(0, 1.0 / tau, tau, g0, g0, 1.0 / (1.0 + tau), float(L_bar), LIPSCHITZ_GRAD)


def lg_advance(state: ScheduleState) -> ScheduleState:
    gamma, beta, _ = lg_update(state.k, state.gamma, state.beta, state.L_bar)
    tau = lg_tau(state.k + 1)
    return replace(state, k=state.k + 1, a=1.0 / tau, tau=tau, gamma=gamma, beta=beta, c=1.0 / (1.0 + tau))


@dataclass(frozen=True)
class AdmmSchedule:
    tau: float
    gamma: float
    beta: float
    rho: float
    eta: float


def admm_params(k: int, gamma0: float) -> AdmmSchedule:
    """Closed-form ADMM-variant parameters at iteration ``k``."""
    if not gamma0 > 0:
        raise SolverError("bad-gamma", "gamma0 must be positive")
    return AdmmSchedule(
        tau=3.0 / (k + 4),
        gamma=2.0 * gamma0 / (k + 2),
        beta=9.0 * (k + 3) / (gamma0 * (k + 1) * (k + 7)),
        rho=3.0 * gamma0 / ((k + 3) * (k + 4)),
        eta=gamma0 / (k + 3),
    )


def kick_c(state: ScheduleState, primal_gap: float, dual_gap: float, s: float = KICK_S,
           mult: float = KICK_MULT) -> float:
    """Value of ``c_k`` that raises gamma by ``mult`` when the primal gap dominates.

    Returns the unchanged ``c_k`` when ``primal_gap < s * dual_gap``.
    """
    if math.isinf(s) or primal_gap < s * dual_gap:
        return state.c
    return -(mult - 1.0) / state.tau


def kick_gamma(state: ScheduleState, primal_gap: float, dual_gap: float, s: float = KICK_S,
               mult: float = KICK_MULT) -> ScheduleState:
    """Return ``state`` with ``c_k`` set by :func:`kick_c`."""
    return replace(state, c=kick_c(state, primal_gap, dual_gap, s, mult))


@dataclass(frozen=True)
class RateBounds:
    a_lower: float
    a_upper: float
    gb_lower: float
    gb_upper: float


def rate_bounds(k: int, a0: float, s_k: float, L_bar: float = 1.0) -> RateBounds:
    """Sandwiches ``(k + a0 + s_k)/2 <= a_k <= k + a0`` and the matching bounds on ``gamma_{k+1} beta_{k+1}``."""
    return RateBounds(
        a_lower=0.5 * (k + a0 + s_k),
        a_upper=k + a0,
        gb_lower=L_bar / (k + a0) ** 2,
        gb_upper=4.0 * L_bar / (k + a0 + s_k) ** 2,
    )


def beta_bounds(k: int, beta0: float, c: float) -> tuple[float, float]:
    """Bounds on ``beta_{k+1}`` for constant ``c`` in {0, 1}."""
    if c == 1:
        v = beta0 / (k + 2)
        return v, v
    if c == 0:
        return beta0 / (k + 2) ** 2, 4.0 * beta0 / (k + 1) ** 2
    raise ValueError("closed-form beta bounds exist for c = 0 and c = 1 only")


def generic_trajectory(gamma0: float, L_bar: float, c: float, n_steps: int) -> list[ScheduleState]:
    """States ``0..n_steps`` of the generic schedule with constant ``c``."""
    st = generic_start(gamma0, L_bar, c)
    out = [st]
    for _ in range(n_steps):
        st = advance(st)
        out.append(st)
    return out

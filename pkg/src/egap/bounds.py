"""Worst-case bounds and per-iteration certificate checks.

A :class:`BoundSet` evaluates the closed-form envelopes that come with each
scheme family: a feasibility bound on ``||A x_bar_k - b||``, an upper bound
on ``f(x_bar_k) - f*`` and a lower bound expressed through the observed
feasibility value.  :func:`certify` compares a recorded trace against one of
these sets and never passes silently when the run does not meet the
hypotheses of the bound.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import SolverError

AL_SMOOTHED = "al-smoothed"
BREGMAN_2P1D = "bregman-2p1d"
BREGMAN_FIXED_K = "bregman-fixed-k"
STRONGLY_CONVEX = "strongly-convex"
BREGMAN_ANYTIME = "bregman-anytime"
ADMM = "admm"
INEXACT_AL = "inexact-al"

_REQUIRED = {
    AL_SMOOTHED: ("D_Y_star",),
    BREGMAN_2P1D: ("L_bar", "D_Y_star", "D_X"),
    BREGMAN_FIXED_K: ("L_bar", "D_Y_star", "D_X", "K"),
    STRONGLY_CONVEX: ("A_norm", "sigma_f", "D_Y_star"),
    BREGMAN_ANYTIME: ("L_bar", "D_Y_star", "D_X"),
    ADMM: ("D_Y_star", "D1", "DA"),
    INEXACT_AL: ("D_Y_star", "q0", "delta0"),
}

# decision: certify-slack
TOL_REL = 1e-6
ABS_FLOOR = 1e-12

PASS = "pass"
FAIL = "fail"
DISABLED = "disabled"


@dataclass(frozen=True)
class BoundSet:
    """Closed-form bounds of one family with its constants.

    ``feas(k, gamma, beta)`` and ``obj_upper(k, gamma, beta)`` accept the
    recorded parameters because the fixed-horizon family is only displayed
    at ``k = K``; at earlier ``k`` it is evaluated through the smoothing
    envelope ``2 beta_k D_Y* + sqrt(2 gamma_k beta_k D_X)``.
    """

    family: str
    constants: dict

    def __post_init__(self) -> None:
        if self.family not in _REQUIRED:
            raise SolverError("config", f"unknown bound family {self.family!r}")
        missing = [c for c in _REQUIRED[self.family] if self.constants.get(c) is None]
        if missing:
            raise SolverError("missing-constant", f"{self.family} needs {', '.join(missing)}",
                              missing=missing)
        for name, val in self.constants.items():
            if val is not None and not (math.isfinite(val) and val >= 0):
                raise SolverError("missing-constant", f"constant {name}={val} must be finite and nonnegative",
                                  missing=[name])

    def __getattr__(self, name):
        try:
            return self.__dict__["constants"][name]
        except KeyError:
            raise AttributeError(name) from None

    @property
    def has_iterate_bound(self) -> bool:
        return self.family == STRONGLY_CONVEX

    def feas(self, k: int, gamma: float | None = None, beta: float | None = None) -> float:
        c, D = self.constants, self.constants["D_Y_star"]
        if self.family == AL_SMOOTHED:
            return 8.0 * D / (k + 1) ** 2
        if self.family == BREGMAN_2P1D:
            return math.sqrt(c["L_bar"]) * (2 * D + math.sqrt(2 * c["D_X"])) / (k + 1)
        if self.family == BREGMAN_FIXED_K:
            K = c["K"]
            if k >= K or gamma is None or beta is None:
                return 2 * math.sqrt(2 * c["L_bar"]) * (D + math.sqrt(c["D_X"])) / (K + 1)
            return 2 * beta * D + math.sqrt(2 * gamma * beta * c["D_X"])
        if self.family == STRONGLY_CONVEX:
            return 4 * c["A_norm"] ** 2 * D / ((k + 2) ** 2 * c["sigma_f"])
        if self.family == BREGMAN_ANYTIME:
            return 2 * math.sqrt(2 * c["L_bar"]) * (D + math.sqrt(c["D_X"])) / (k + 1)
        if self.family == ADMM:
            return 6 * (D + math.sqrt(c["D1"] + 4 * c["DA"])) / (k + 2)
        q = 14 * c["q0"] * c["delta0"] / (k + 1) ** 2
        return 4.0 / (k + 1) ** 2 * (2 * D + math.sqrt(q))

    def obj_upper(self, k: int, gamma: float | None = None, beta: float | None = None) -> float:
        c = self.constants
        if self.family in (AL_SMOOTHED, STRONGLY_CONVEX):
            return 0.0
        if self.family == BREGMAN_2P1D:
            return math.sqrt(c["L_bar"]) * c["D_X"] / (k + 1)
        if self.family == BREGMAN_FIXED_K:
            # decision: fixed-horizon-envelope
            # gamma_k = gamma_0 for c = 0, so f - f* <= gamma_0 D_X at every k
            return 2 * math.sqrt(2 * c["L_bar"]) * c["D_X"] / (c["K"] + 1)
        if self.family == BREGMAN_ANYTIME:
            return 2 * math.sqrt(2 * c["L_bar"]) * c["D_X"] / (k + 1)
        if self.family == ADMM:
            return 6 * self.d_max() / (k + 2)
        return 7 * c["q0"] * c["delta0"]

    def obj_lower(self, k: int, feas: float) -> float:
        """Lower bound on ``f(x_bar_k) - f*`` given the observed feasibility ``feas``."""
        D = self.constants["D_Y_star"]
        if self.family in (AL_SMOOTHED, INEXACT_AL):
            return -0.5 * feas * feas - D * feas
        if self.family == ADMM:
            return -6 * self.d_max() / (k + 2)
        return -D * feas

    def iterate(self, k: int) -> float:
        if self.family != STRONGLY_CONVEX:
            raise SolverError("config", f"{self.family} has no iterate bound")
        c = self.constants
        return 4 * c["A_norm"] * c["D_Y_star"] / ((k + 2) * c["sigma_f"])

    def d_max(self) -> float:
        c = self.constants
        D, root = c["D_Y_star"], math.sqrt(c["D1"] + 4 * c["DA"])
        return max(c["D1"] + 3 * c["DA"], D * (D + root))


def bounds_generic(variant: str, D_Y_star=None, L_bar=None, D_X=None, K=None) -> BoundSet:
    """Generic-family bounds: ``a`` (AL smoother), ``b`` (2P1D, c = 1), ``c`` (1P2D, fixed K)."""
    family = {"a": AL_SMOOTHED, "b": BREGMAN_2P1D, "c": BREGMAN_FIXED_K}.get(variant)
    if family is None:
        raise SolverError("config", f"variant must be a, b or c, not {variant!r}")
    return BoundSet(family, dict(D_Y_star=D_Y_star, L_bar=L_bar, D_X=D_X, K=K))


def bounds_strongly_convex(A_norm, sigma_f, D_Y_star) -> BoundSet:
    return BoundSet(STRONGLY_CONVEX, dict(A_norm=A_norm, sigma_f=sigma_f, D_Y_star=D_Y_star))


def bounds_anytime(L_bar, D_Y_star, D_X) -> BoundSet:
    return BoundSet(BREGMAN_ANYTIME, dict(L_bar=L_bar, D_Y_star=D_Y_star, D_X=D_X))


def bounds_admm(D_Y_star, D1, DA) -> BoundSet:
    """ADMM-variant bounds (``gamma_0 = 3``); ``D_max = max{D1 + 3 DA, D_Y*(D_Y* + sqrt(D1 + 4 DA))}``."""
    return BoundSet(ADMM, dict(D_Y_star=D_Y_star, D1=D1, DA=DA))


def bounds_inexact(D_Y_star, q0, delta0) -> BoundSet:
    return BoundSet(INEXACT_AL, dict(D_Y_star=D_Y_star, q0=q0, delta0=delta0))


def make_bound_set(family: str, **constants) -> BoundSet:
    """Build a bound set by family tag, ignoring constants the family does not use."""
    if family not in _REQUIRED:
        raise SolverError("config", f"unknown bound family {family!r}")
    return BoundSet(family, {k: constants.get(k) for k in _REQUIRED[family]})


# certification --------------------------------------------------------------

@dataclass
class CheckResult:
    name: str
    passed: list[bool] = field(default_factory=list)
    worst_margin: float = -math.inf
    first_failure: int | None = None

    def add(self, k: int, value: float, bound: float, slack: float) -> None:
        ok = value <= bound + slack
        self.passed.append(ok)
        self.worst_margin = max(self.worst_margin, value - bound)
        if not ok and self.first_failure is None:
            self.first_failure = k

    @property
    def ok(self) -> bool:
        return all(self.passed)


@dataclass
class CertificateReport:
    status: str
    family: str | None
    n_records: int
    checks: dict[str, CheckResult] = field(default_factory=dict)
    reason: str | None = None

    @property
    def first_failure(self) -> int | None:
        ks = [c.first_failure for c in self.checks.values() if c.first_failure is not None]
        return min(ks) if ks else None

    def to_dict(self) -> dict:
        return {
            "status": self.status,
            "family": self.family,
            "n_records": self.n_records,
            "reason": self.reason,
            "first_failure": self.first_failure,
            "checks": {
                name: {"passed": sum(c.passed), "failed": len(c.passed) - sum(c.passed),
                       "worst_margin": c.worst_margin if c.passed else None,
                       "first_failure": c.first_failure}
                for name, c in self.checks.items()
            },
        }


def certify(records: Sequence, bounds: BoundSet | None, f_star: float | None,
            tol_rel: float = TOL_REL, iterate_dist: Sequence[float] | None = None,
            enabled: bool = True, reason: str | None = None) -> CertificateReport:
    """Check every record against ``bounds``.

    A check passes at ``k`` when ``value <= bound + tol_rel * scale + 1e-12``;
    the scale is the bound for feasibility and iterate checks, and
    ``|bound| + |f*|`` for objective checks, whose values are differences of
    numbers of size ``|f*|``.  The report is ``disabled`` (never ``pass``)
    when certificates are off for the run, the bound set or ``f*`` is
    missing, or the trace is empty.
    """
    family = None if bounds is None else bounds.family
    n = len(records)
    if not enabled:
        return CertificateReport(DISABLED, family, n, reason=reason or "certificates disabled for this run")
    if n == 0:
        return CertificateReport(DISABLED, family, 0, reason="empty")
    if bounds is None:
        return CertificateReport(DISABLED, family, n, reason=reason or "no bound family for this scheme")
    feas_c = CheckResult("feasibility")
    checks = {"feasibility": feas_c}
    if f_star is not None:
        up, lo = CheckResult("objective_upper"), CheckResult("objective_lower")
        checks.update(objective_upper=up, objective_lower=lo)
    if iterate_dist is not None and bounds.has_iterate_bound:
        it_c = CheckResult("iterate")
        checks["iterate"] = it_c
    for i, rec in enumerate(records):
        k = rec.k
        fb = bounds.feas(k, rec.gamma, rec.beta)
        feas_c.add(k, rec.feas_abs, fb, tol_rel * fb + ABS_FLOOR)
        if f_star is not None:
            diff = rec.f_val - f_star
            ub = bounds.obj_upper(k, rec.gamma, rec.beta)
            up.add(k, diff, ub, tol_rel * (abs(ub) + abs(f_star)) + ABS_FLOOR)
            lb = bounds.obj_lower(k, rec.feas_abs)
            lo.add(k, -diff, -lb, tol_rel * (abs(lb) + abs(f_star)) + ABS_FLOOR)
        if "iterate" in checks:
            ib = bounds.iterate(k)
            it_c.add(k, iterate_dist[i], ib, tol_rel * ib + ABS_FLOOR)
    status = PASS if all(c.ok for c in checks.values()) else FAIL
    note = None if f_star is not None else "f* unavailable: objective checks skipped"
    return CertificateReport(status, family, n, checks, note)


def certify_trace(trace, bounds: BoundSet | None, f_star: float | None, **kw) -> CertificateReport:
    """:func:`certify` gated on the run's own hypothesis flags."""
    hdr = trace.header
    return certify(trace.records, bounds, f_star, enabled=hdr.get("certificates_enabled", False),
                   reason=hdr.get("disabled_reason"), **kw)


# Gap envelope ---------------------------------------------------------------

@dataclass(frozen=True)
class GapEnvelope:
    omega: float
    Psi: float
    S: float
    feas_envelope: float | None
    feas_pair: float


def weights(taus: Sequence[float], psis: Sequence[float]) -> tuple[float, float]:
    """``omega_k = prod_{j<k}(1 - tau_j)`` and ``Psi_k`` with ``Psi_{j+1} = (1 - tau_j) Psi_j + psi_j``.

    ``taus`` and ``psis`` hold ``tau_j`` and ``psi_j`` for ``j < k``; with
    these, firm contraction unrolls to ``G_k <= omega_k G_0 - Psi_k``.
    """
    omega, Psi = 1.0, 0.0
    for tau, psi in zip(taus, psis):
        Psi = (1.0 - tau) * Psi + psi
        omega *= 1.0 - tau
    return omega, Psi


def gap_envelope(records: Sequence, D_X_S: float, y_star_norm: float) -> GapEnvelope:
    """Envelope at the last record from the recorded ``G_0``, ``tau_j`` and ``psi_j``.

    ``S_k = omega_k G_0 + gamma_k D_X - Psi_k`` bounds ``f(x_bar_k) - f*``;
    the feasibility envelope ``beta_k (||y*|| + sqrt(||y*||^2 + 2 S_k / beta_k))``
    is ``None`` where ``beta_k ||y*||^2 + 2 S_k < 0``.
    """
    if not records:
        raise SolverError("config", "gap_envelope needs at least one record")
    if records[0].gap is None:
        raise SolverError("missing-constant", "the trace was not recorded in certification mode",
                          missing=["gap"])
    last = records[-1]
    taus = [r.tau for r in records[:-1]]
    psis = [r.psi for r in records[1:]]
    if any(p is None for p in psis):
        raise SolverError("missing-constant", "psi was not recorded", missing=["psi"])
    omega, Psi = weights(taus, psis)
    S = omega * records[0].gap + last.gamma * D_X_S - Psi
    beta, y = last.beta, y_star_norm
    disc = beta * y * y + 2 * S
    env = None if disc < 0 else beta * y + math.sqrt(beta * disc)
    pair = 2 * beta * y + math.sqrt(2 * last.gamma * beta * D_X_S)
    return GapEnvelope(omega, Psi, S, env, pair)


def is_nonincreasing(values: Sequence[float]) -> bool:
    v = np.asarray(values, dtype=float)
    return bool(np.all(np.diff(v) <= 1e-15 * np.maximum(1.0, np.abs(v[:-1]))))


# constants for a run ----------------------------------------------------------

def _effective_bounds(problem) -> tuple[np.ndarray, np.ndarray]:
    """Coordinate bounds of ``dom f cap X``; an indicator of zero pins its block to 0."""
    los, his = [], []
    for blk in problem.blocks:
        n_i = np.atleast_2d(blk.A).shape[1]
        if blk.f.kind == "indicator_zero":
            los.append(np.zeros(n_i))
            his.append(np.zeros(n_i))
        else:
            lo, hi = blk.X.bounds(n_i)
            los.append(lo)
            his.append(hi)
    return np.concatenate(los), np.concatenate(his)


# decision: admm-constants
def admm_constants(problem, center1=None) -> tuple[float, float]:
    """Over-estimates of ``D1 = max_{X1} ||A1 (x1 - x_c1)||^2 / 2`` and ``DA = max_X ||Ax - b||^2 / 2``.

    Both use the exact per-row maximum over the box, summed over rows.
    """
    from .smoothing import residual_range_bound

    lo, hi = _effective_bounds(problem)
    A = problem.A.dense()
    A1 = np.atleast_2d(problem.blocks[0].A)
    n1 = A1.shape[1]
    if center1 is None:
        center1 = problem.blocks[0].X.project(np.zeros(n1))
    r1 = residual_range_bound(A1, A1 @ center1, lo[:n1], hi[:n1])
    rA = residual_range_bound(A, problem.b, lo, hi)
    return 0.5 * float(np.sum(r1 ** 2)), 0.5 * float(np.sum(rA ** 2))


def bound_set_for(problem, header: dict, smoother=None, y_star=None) -> tuple[BoundSet | None, str | None]:
    """Bound set matching a trace header, or ``(None, reason)`` when a constant is unavailable."""
    from .linop import spectral_norm_sq
    from .smoothing import box_diameter

    family = header.get("bound_family") or ""
    if not family:
        return None, f"no bound family for scheme {header.get('scheme')}"
    consts: dict = {"L_bar": header.get("L_bar"), "K": header.get("K_total"),
                    "q0": header.get("q0"), "delta0": header.get("delta0")}
    consts["D_Y_star"] = None if y_star is None else float(np.linalg.norm(y_star))
    if family in (BREGMAN_2P1D, BREGMAN_FIXED_K, BREGMAN_ANYTIME):
        lo, hi = problem.term.bounds()
        if np.all(np.isfinite(lo)) and np.all(np.isfinite(hi)):
            center = smoother.center if smoother is not None else problem.term.project(np.zeros(problem.n))
            consts["D_X"] = box_diameter(lo, hi, center)
    if family == STRONGLY_CONVEX:
        consts["A_norm"] = math.sqrt(spectral_norm_sq(problem.A))
        consts["sigma_f"] = problem.term.sigma_f
    if family == ADMM:
        D1, DA = admm_constants(problem)
        if math.isfinite(D1) and math.isfinite(DA):
            consts["D1"], consts["DA"] = D1, DA
    try:
        return make_bound_set(family, **consts), None
    except SolverError as err:
        return None, str(err)

"""FISTA inner solver for composite subproblems with a quadratic in ``Mx``.

Every subproblem the outer schemes hand to this module has the form

    minimize  F(x) = f(x) + <y, Mx - c> + (kappa/2) ||Mx - c||^2,   x in X,

covering the augmented-Lagrangian argmin (``M = A``, ``c = b``,
``kappa = gamma``), the inexact ``A``-prox (``c = A x_hat``,
``kappa = L_bar / beta``) and the ADMM block updates.

Stopping is certified.  With ``u = y + kappa (Mx - c)`` and
``s = M^T u``, the Fenchel dual evaluated at ``theta u`` (``theta`` the
largest scaling that keeps the conjugate finite) gives

    F(x) - F* <= FY(x, -theta s) + (1 - theta)^2 ||u||^2 / (2 kappa),

where ``FY`` is the Fenchel-Young gap of ``f`` on ``X``.  When ``f`` has no
conjugate rule, or when that bound is not yet small enough, the bound
``F(x+) - F* <= ||G|| ||z - x*||`` is used as well, with ``G`` the gradient
map and ``||z - x*||`` bounded by the box diameter or by the strong
convexity of ``F`` (from ``f`` and, on small blocks, from ``M^T M``).  The ``"objective"`` criterion stops once the bound is at
most ``kappa delta^2 / 2``, which implies ``||M(x - x*)|| <= delta``; the
``"gradient-map"`` criterion stops once ``||G|| <= delta``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import prox as P
from .errors import SolverError
from .linop import LinearMap, adjoint_apply, apply, dense, min_eig_gram, spectral_norm_sq

OBJECTIVE_GAP = "objective"
GRADIENT_MAP = "gradient-map"
# decision: inner-budget
BUDGET_CAP = 100_000
CHECK_EVERY = 5
# Certificates are sums of terms of size |F|; below this relative level
# they are rounding noise and cannot certify anything smaller.
# decision: rounding-floor
ROUNDING_FLOOR = 1024 * np.finfo(float).eps
# Largest block for which the curvature of ``||Mx - c||^2`` is computed by an eigensolve.
CURVATURE_MAX_N = 256


@dataclass(eq=False)
class CompositeObjective:
    term: P.SeparableTerm
    M: LinearMap
    c: np.ndarray
    y: np.ndarray
    kappa: float
    lips: float | None = None

    def __post_init__(self) -> None:
        if not isinstance(self.M, LinearMap):
            self.M = dense(self.M)
        self.c = np.asarray(self.c, dtype=float)
        self.y = np.zeros(self.M.rows) if self.y is None else np.asarray(self.y, dtype=float)
        if self.kappa <= 0:
            raise ValueError("kappa must be positive")
        if self.lips is None:
            self.lips = self.kappa * spectral_norm_sq(self.M)

    def curvature(self) -> float:
        """Strong-convexity modulus of ``F``: ``sigma_f + kappa lambda_min(M^T M)``.

        The Gram term is used only for blocks of at most ``CURVATURE_MAX_N``
        columns and only when it clears the eigensolver's rounding level.
        """
        if not hasattr(self, "_curvature"):
            mu = self.term.sigma_f
            if self.M.cols <= CURVATURE_MAX_N and self.lips > 0:
                lam = min_eig_gram(self.M)
                if lam > 1e-10 * self.lips / self.kappa:
                    mu += self.kappa * lam
            self._curvature = mu
        return self._curvature

    def value(self, x, r=None) -> float:
        r = apply(self.M, x) - self.c if r is None else r
        return self.term.value(x) + float(self.y @ r) + 0.5 * self.kappa * float(r @ r)

    def grad(self, x) -> np.ndarray:
        return adjoint_apply(self.M, self.y + self.kappa * (apply(self.M, x) - self.c))


@dataclass(frozen=True)
class InnerTolerance:
    delta: float
    criterion: str = OBJECTIVE_GAP

    def __post_init__(self) -> None:
        if not self.delta > 0:
            raise ValueError("delta must be positive")
        if self.criterion not in (OBJECTIVE_GAP, GRADIENT_MAP):
            raise ValueError(f"unknown criterion {self.criterion!r}")


@dataclass(frozen=True)
class FistaResult:
    x: np.ndarray
    iterations: int
    bound: float
    value: float


def default_budget(obj: CompositeObjective, tol: InnerTolerance) -> int:
    ratio = obj.lips / (obj.kappa * tol.delta ** 2)
    return int(min(BUDGET_CAP, 10 * math.ceil(math.sqrt(max(ratio, 1.0)))))


# decision: fenchel-certificate
def _duality_terms(obj: CompositeObjective, x, r=None) -> tuple[float | None, float]:
    """Fenchel duality bound and the magnitude of the terms it is summed from."""
    r = apply(obj.M, x) - obj.c if r is None else r
    u = obj.y + obj.kappa * r
    s = adjoint_apply(obj.M, u)
    theta = obj.term.dual_scale(-s)
    fy = obj.term.fenchel_young_gap(x, -theta * s)
    quad = float(u @ u) / (2 * obj.kappa)
    # rounding in s = M^T(y + kappa r) is about eps * lips * ||x||, and it enters through x^T s
    scale = (1.0 + abs(obj.term.value(x)) + float(np.abs(x) @ np.abs(s)) + quad
             + obj.lips * float(x @ x) / 64.0)
    if fy is None:
        return None, scale
    return fy + (1.0 - theta) ** 2 * quad, scale


def duality_bound(obj: CompositeObjective, x, r=None) -> float | None:
    """Certified upper bound on ``F(x) - F*`` from the scaled Fenchel dual point."""
    return _duality_terms(obj, x, r)[0]


def _distance_bound(obj: CompositeObjective, gnorm: float) -> float:
    lo, hi = obj.term.bounds()
    diam = float(np.linalg.norm(hi - lo)) if np.all(np.isfinite(hi - lo)) else np.inf
    mu = obj.curvature()
    if mu > 0:
        q = mu / obj.lips
        diam = min(diam, gnorm * (1 + q + math.sqrt(1 + q)) / mu)
    return diam


def fista_solve(obj: CompositeObjective, x0, tol: InnerTolerance, max_iter: int | None = None,
                restart: bool = True) -> FistaResult:
    """Accelerated proximal gradient with certified stopping.

    Returns the first iterate whose certificate meets the tolerance.  The
    objective values reported are best-so-far over certified points.  With
    ``restart`` the momentum is reset whenever it points uphill (gradient
    restart), which does not affect the certificates.
    """
    budget = default_budget(obj, tol) if max_iter is None else int(max_iter)
    # a zero operator leaves only f: any positive step gives a proximal-point method
    L = obj.lips if obj.lips > 0 else obj.kappa
    target = 0.5 * obj.kappa * tol.delta ** 2
    x = np.asarray(x0, dtype=float)
    best = (np.inf, x, np.inf)  # (bound, point, value)
    stop_at = target if tol.criterion == OBJECTIVE_GAP else tol.delta

    def certify(point, gmap_norm=None):
        """Return ``(bound, accepted)`` for ``point`` and track the best bound."""
        nonlocal best
        r = apply(obj.M, point) - obj.c
        val = obj.value(point, r)
        bound, scale = None, 1.0 + abs(val)
        if tol.criterion == OBJECTIVE_GAP:
            bound, scale = _duality_terms(obj, point, r)
            # the gradient-map bound covers f without a conjugate rule and dual points that scale to zero
            if gmap_norm is not None and (bound is None or bound > stop_at):
                alt = gmap_norm * _distance_bound(obj, gmap_norm)
                bound = alt if bound is None else min(bound, alt)
        elif gmap_norm is not None:
            bound = gmap_norm
        if bound is None:
            return None, False
        if bound < best[0]:
            best = (bound, point, val)
        # a bound at rounding level of its own terms is as good as it gets
        return bound, bound <= max(stop_at, ROUNDING_FLOOR * scale)

    if obj.term.contains(x) and tol.criterion == OBJECTIVE_GAP:
        b0, ok = certify(x)
        if ok:
            return FistaResult(x, 0, b0, obj.value(x))
    z, t = x.copy(), 1.0
    for it in range(1, budget + 1):
        g = obj.grad(z)
        x_new = obj.term.prox(1.0 / L, z - g / L)
        gmap = L * (z - x_new)
        gnorm = float(np.linalg.norm(gmap))
        if tol.criterion == GRADIENT_MAP:
            if gnorm <= tol.delta:
                return FistaResult(x_new, it, gnorm, obj.value(x_new))
        elif it % CHECK_EVERY == 0 or it <= 2:
            bound, ok = certify(x_new, gnorm)
            if ok:
                return FistaResult(x_new, it, bound, obj.value(x_new))
        if restart and float((z - x_new) @ (x_new - x)) > 0:
            t = 1.0
            z = x_new.copy()
        else:
            t_new = 0.5 * (1 + math.sqrt(1 + 4 * t * t))
            z = x_new + ((t - 1) / t_new) * (x_new - x)
            t = t_new
        x = x_new
    if tol.criterion == GRADIENT_MAP:
        best = (gnorm, x, obj.value(x))
    raise SolverError("inner-budget", f"no certificate within {budget} iterations",
                      x=best[1], bound=best[0], iterations=budget)


def al_objective(problem, y, gamma: float) -> CompositeObjective:
    return CompositeObjective(problem.term, problem.A, problem.b, y, gamma)


def solve_aug_lagrangian(problem, y, gamma: float, delta: float, x0=None,
                         max_iter: int | None = None) -> FistaResult:
    """``delta``-approximate minimizer of ``f(x) + y^T(Ax - b) + gamma/2 ||Ax - b||^2``."""
    if not (gamma > 0 and delta > 0):
        raise ValueError("gamma and delta must be positive")
    obj = al_objective(problem, y, gamma)
    x0 = problem.term.project(np.zeros(problem.n)) if x0 is None else x0
    return fista_solve(obj, x0, InnerTolerance(delta), max_iter)


def aug_lagrangian_argmin(problem, y, gamma: float, delta: float, x0=None) -> np.ndarray:
    return solve_aug_lagrangian(problem, y, gamma, delta, x0).x


def solve_inexact_prox_Af(problem, x_hat, y_hat, beta: float, delta: float, L_bar: float = 1.0,
                          x0=None, max_iter: int | None = None) -> FistaResult:
    """``delta``-argmin of ``f(x) + y_hat^T A(x - x_hat) + L_bar/(2 beta) ||A(x - x_hat)||^2``."""
    if not beta > 0:
        raise SolverError("bad-beta", "beta must be positive")
    x_hat = np.asarray(x_hat, dtype=float)
    obj = CompositeObjective(problem.term, problem.A, apply(problem.A, x_hat), y_hat, L_bar / beta)
    x0 = problem.term.project(x_hat) if x0 is None else x0
    return fista_solve(obj, x0, InnerTolerance(delta), max_iter)


def inexact_prox_Af(problem, x_hat, y_hat, beta: float, delta: float, L_bar: float = 1.0) -> np.ndarray:
    return solve_inexact_prox_Af(problem, x_hat, y_hat, beta, delta, L_bar).x


def solve_block_quadratic(f: P.FunctionSpec, X: P.FeasibleSet, M: np.ndarray, c, kappa: float,
                          delta: float, x0=None, max_iter: int | None = None) -> FistaResult:
    """``argmin_{x in X} f(x) + kappa/2 ||Mx - c||^2`` for one block.

    Exact when ``M`` is the identity (one prox) or when ``f`` is a quadratic
    over all of R^n (one linear solve); otherwise FISTA on the gradient-map
    criterion.
    """
    M = np.atleast_2d(np.asarray(M, dtype=float))
    c = np.asarray(c, dtype=float)
    n = M.shape[1]
    if M.shape[0] == n and np.array_equal(M, np.eye(n)):
        x = P.prox_eval(f, X, 1.0 / kappa, c)
        return FistaResult(x, 0, 0.0, P.func_eval(f, X, x))
    if X.kind == "all" and f.kind in ("zero", "squared_l2"):
        sig = f.quad_sigma
        H = sig * np.eye(n) + kappa * M.T @ M
        rhs = sig * np.broadcast_to(np.asarray(f.quad_center, dtype=float), (n,)) + kappa * M.T @ c
        x = np.linalg.solve(H, rhs)
        return FistaResult(x, 0, 0.0, P.func_eval(f, X, x))
    term = P.SeparableTerm([(f, X)], [n])
    obj = CompositeObjective(term, M, c, None, kappa)
    x0 = X.project(np.zeros(n)) if x0 is None else x0
    return fista_solve(obj, x0, InnerTolerance(delta, GRADIENT_MAP), max_iter)

"""Dual smoothers, the explicit dual center and the smoothed gap.

Two smoothers are supported.  The Bregman smoother adds
``gamma/2 ||x - x_c||^2`` inside the dual minimization, which turns the
smoothed argmin into one prox evaluation.  The augmented-Lagrangian smoother
adds ``gamma/2 ||Ax - b||^2`` instead; its argmin needs the inner solver.
The dual prox term is always ``beta/2 ||y||^2``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import subsolver
from .errors import SolverError
from .linop import SAFETY_FACTOR, adjoint_apply, apply, spectral_norm_sq

BREGMAN = "bregman"
AUGLAG = "auglag"
IDENTITY = "identity"
OPERATOR = "operator"

# Tolerance for the augmented-Lagrangian argmin when an exact one is wanted.
AL_DELTA = 1e-7


@dataclass(frozen=True, eq=False)
class SmootherConfig:
    kind: str
    center: np.ndarray
    S_choice: str
    L_bar: float
    sigma_d: float = 1.0


@dataclass(frozen=True)
class DiameterEstimates:
    D_X_S: float
    D_Y_star: float | None
    provenance: str


def make_smoother(problem, kind: str = BREGMAN, center=None, L_bar: float | None = None) -> SmootherConfig:
    """Build and validate a smoother configuration for ``problem``.

    ``L_bar`` defaults to 1 for the augmented-Lagrangian smoother and to the
    (safety-scaled) estimate of ``||A||^2`` for the Bregman smoother.  An
    explicit Bregman ``L_bar`` is accepted when it is at least the raw power
    estimate, so exact values such as ``1`` for ``A = 1`` pass.
    """
    n = problem.n
    if center is None:
        center = problem.term.project(np.zeros(n))
    center = np.asarray(center, dtype=float)
    if center.shape != (n,):
        raise SolverError("shape", "center must have length n")
    if not problem.term.contains(center):
        raise SolverError("smoother-config", "the center must lie in X")
    if kind == AUGLAG:
        if L_bar not in (None, 1, 1.0):
            raise SolverError("smoother-config", "the augmented-Lagrangian smoother has L_bar = 1")
        return SmootherConfig(AUGLAG, center, OPERATOR, 1.0)
    if kind != BREGMAN:
        raise SolverError("smoother-config", f"unknown smoother {kind!r}")
    est = spectral_norm_sq(problem.A)
    if L_bar is None:
        L_bar = est
    elif L_bar < est / SAFETY_FACTOR * (1 - 1e-9):
        raise SolverError("smoother-config", f"L_bar={L_bar} is below ||A||^2 ~ {est / SAFETY_FACTOR}")
    return SmootherConfig(BREGMAN, center, IDENTITY, float(L_bar))


def with_center(cfg: SmootherConfig, center) -> SmootherConfig:
    return SmootherConfig(cfg.kind, np.asarray(center, dtype=float), cfg.S_choice, cfg.L_bar, cfg.sigma_d)


def bregman_argmin(problem, cfg: SmootherConfig, y, gamma: float, Aty=None) -> np.ndarray:
    """``argmin_{x in X} f(x) + y^T(Ax - b) + gamma/2 ||x - x_c||^2``.

    This is the prox of ``f / gamma`` at ``x_c - A^T y / gamma``.  ``Aty``
    may carry a precomputed ``A^T y``.
    """
    if cfg.kind != BREGMAN:
        raise SolverError("smoother-config", "bregman_argmin needs the Bregman smoother")
    if not gamma > 0:
        raise SolverError("bad-gamma", "gamma must be positive")
    if Aty is None:
        Aty = adjoint_apply(problem.A, np.asarray(y, dtype=float))
    return problem.term.prox(1.0 / gamma, cfg.center - Aty / gamma)


def smoothed_argmin(problem, cfg: SmootherConfig, y, gamma: float, Aty=None, x0=None,
                    delta: float = AL_DELTA) -> np.ndarray:
    """Argmin of the smoothed dual subproblem for either smoother."""
    if cfg.kind == BREGMAN:
        return bregman_argmin(problem, cfg, y, gamma, Aty)
    return subsolver.aug_lagrangian_argmin(problem, y, gamma, delta, x0=x0)


def dual_center(residual, beta: float, inequality: bool = False) -> np.ndarray:
    """``y*_beta = (Ax - b) / beta``, clamped at zero for ``Ax <= b`` constraints."""
    if not beta > 0:
        raise SolverError("bad-beta", "beta must be positive")
    y = np.asarray(residual, dtype=float) / beta
    return np.maximum(y, 0.0) if inequality else y


def prox_distance(problem, cfg: SmootherConfig, x, residual=None) -> float:
    """``d_b(Sx, Sx_c)``: ``||x - x_c||^2/2`` (Bregman) or ``||Ax - b||^2/2`` (AL)."""
    if cfg.kind == BREGMAN:
        return 0.5 * float(np.sum((np.asarray(x) - cfg.center) ** 2))
    r = problem.residual(x) if residual is None else residual
    return 0.5 * float(r @ r)


def smoothed_dual_value(problem, cfg: SmootherConfig, y, gamma: float, x_star=None) -> float:
    """``g_gamma(y) = f(x*) + y^T(Ax* - b) + gamma d_b(Sx*, Sx_c)`` at the smoothed argmin."""
    y = np.asarray(y, dtype=float)
    if x_star is None:
        x_star = smoothed_argmin(problem, cfg, y, gamma)
    r = problem.residual(x_star)
    return problem.objective(x_star) + float(y @ r) + gamma * prox_distance(problem, cfg, x_star, r)


def smoothed_gap(problem, cfg: SmootherConfig, x_bar, y_bar, gamma: float, beta: float,
                 x_star=None) -> float:
    """``G(w) = f(x_bar) - g_gamma(y_bar) + ||A x_bar - b||^2 / (2 beta)``."""
    f_val = problem.objective(x_bar)
    if not math.isfinite(f_val):
        raise SolverError("infeasible-iterate", "x_bar lies outside X")
    r = problem.residual(x_bar)
    return f_val - smoothed_dual_value(problem, cfg, y_bar, gamma, x_star) + float(r @ r) / (2 * beta)


def residual_range_bound(A: np.ndarray, b: np.ndarray, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    """Per-row ``max_{x in [lo, hi]} |a_j^T x - b_j|`` (``inf`` when unbounded)."""
    A = np.atleast_2d(A)
    with np.errstate(invalid="ignore"):
        top = np.where(A > 0, A * hi, np.where(A < 0, A * lo, 0.0)).sum(axis=1)
        bot = np.where(A > 0, A * lo, np.where(A < 0, A * hi, 0.0)).sum(axis=1)
    return np.maximum(np.abs(top - b), np.abs(bot - b))


def box_diameter(lo, hi, center) -> float:
    """``max_{x in [lo, hi]} ||x - center||^2 / 2``."""
    far = np.maximum(np.abs(lo - center), np.abs(hi - center))
    return 0.5 * float(np.sum(far ** 2))


# decision: al-diameter
def estimate_diameters(problem, cfg: SmootherConfig, reference=None) -> DiameterEstimates:
    """Prox-diameter of X for the smoother's metric and the dual-solution norm.

    The Bregman diameter is measured from the configured center.  For the
    AL metric the bound ``1/2 sum_j max_x (a_j^T x - b_j)^2`` is used, with
    each row maximized exactly over the box; it is ``inf`` for unbounded
    sets.
    """
    lo, hi = problem.term.bounds()
    if cfg.kind == BREGMAN:
        if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
            raise SolverError("unbounded-domain", "the Bregman prox-diameter needs a bounded X")
        D = box_diameter(lo, hi, cfg.center)
    else:
        rows = residual_range_bound(problem.A.dense(), problem.b, lo, hi)
        D = 0.5 * float(np.sum(rows ** 2))
    ref = reference if reference is not None else problem.reference
    if ref is None:
        return DiameterEstimates(D, None, "analytic")
    return DiameterEstimates(D, float(np.linalg.norm(ref.y)), "reference")

"""Dolan-More performance profiles.

For a matrix ``T[p, s]`` of costs (time or iterations) the ratio
``r[p, s] = T[p, s] / min_s' T[p, s']`` measures how far solver ``s`` is from
the best solver on problem ``p``, and ``rho_s(tau)`` is the fraction of
problems with ``log2 r[p, s] <= tau``.  Failed runs are entered as ``inf``
(or ``nan``) and never count as solved.
"""

from __future__ import annotations

import csv
import math
from typing import Iterable, Sequence

import numpy as np

from .errors import SolverError

FAILURE_TOKENS = ("", "inf", "nan", "fail", "failed")


def ratios(T) -> np.ndarray:
    """Performance ratios; rows whose every entry failed give ``inf`` throughout."""
    T = np.asarray(T, dtype=float)
    if T.ndim != 2 or T.size == 0:
        raise SolverError("no-data", "the profile needs at least one problem and one solver")
    T = np.where(np.isnan(T), np.inf, T)
    if np.any(T <= 0):
        raise SolverError("config", "profile metrics must be positive")
    best = T.min(axis=1, keepdims=True)
    with np.errstate(invalid="ignore"):
        r = T / best
    return np.where(np.isfinite(best), r, np.inf)


def performance_profile(T, taus: Sequence[float]) -> np.ndarray:
    """``rho[i, s]`` = share of problems with ``log2 r[p, s] <= taus[i]``."""
    r = ratios(T)
    with np.errstate(divide="ignore"):
        logs = np.log2(r)
    taus = np.asarray(taus, dtype=float)
    return (logs[None, :, :] <= taus[:, None, None]).mean(axis=1)


def tau_tilde(T) -> float:
    """Smallest ``tau`` at which every solver that finishes a problem has been counted."""
    r = ratios(T)
    finite = r[np.isfinite(r)]
    return float(np.log2(finite.max())) if finite.size else 0.0


def _parse(value: str) -> float:
    v = value.strip().lower()
    return math.inf if v in FAILURE_TOKENS else float(v)


def read_metrics(paths: Iterable[str]) -> tuple[list[str], list[str], np.ndarray]:
    """Read long-format metric files with columns ``problem,solver,value``.

    A problem missing for a solver counts as a failure for that solver.
    """
    cells: dict[tuple[str, str], float] = {}
    problems: list[str] = []
    solvers: list[str] = []
    for path in paths:
        with open(path, newline="") as fh:
            for row in csv.DictReader(fh):
                p, s = row["problem"], row["solver"]
                if p not in problems:
                    problems.append(p)
                if s not in solvers:
                    solvers.append(s)
                cells[(p, s)] = _parse(row.get("value") or "")
    if not problems:
        raise SolverError("no-data", "no metric rows were found")
    T = np.array([[cells.get((p, s), math.inf) for s in solvers] for p in problems])
    return problems, solvers, T

"""Dense and block-structured linear maps.

A :class:`LinearMap` stores one or more dense blocks.  With the default
``"hstack"`` layout the blocks share their row count and the operator is the
horizontal concatenation ``[A_1 ... A_p]``; with ``"blockdiag"`` the blocks
sit on the diagonal.  The representation is hidden behind :func:`apply` and
:func:`adjoint_apply`, so callers never depend on it.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import SolverError

# decision: norm-safety-factor
SAFETY_FACTOR = 1.01
GRAM_CAP = 2000


@dataclass(frozen=True)
class LinearMap:
    blocks: tuple[np.ndarray, ...]
    layout: str = "hstack"
    norm_sq: float | None = field(default=None, compare=False)

    def __post_init__(self) -> None:
        mats = tuple(np.atleast_2d(np.asarray(b, dtype=float)) for b in self.blocks)
        if not mats:
            raise SolverError("shape", "a linear map needs at least one block")
        if self.layout not in ("hstack", "blockdiag"):
            raise SolverError("shape", f"unknown layout {self.layout!r}")
        if self.layout == "hstack" and len({m.shape[0] for m in mats}) != 1:
            raise SolverError("shape", "hstack blocks must share their row count")
        for m in mats:
            m.setflags(write=False)
        object.__setattr__(self, "blocks", mats)
        object.__setattr__(self, "_offsets", np.concatenate(([0], np.cumsum([m.shape[1] for m in mats]))))
        object.__setattr__(self, "_norm_cache", None)

    @property
    def rows(self) -> int:
        if self.layout == "hstack":
            return self.blocks[0].shape[0]
        return sum(b.shape[0] for b in self.blocks)

    @property
    def cols(self) -> int:
        return sum(b.shape[1] for b in self.blocks)

    @property
    def shape(self) -> tuple[int, int]:
        return self.rows, self.cols

    @property
    def col_offsets(self) -> np.ndarray:
        return self._offsets

    def dense(self) -> np.ndarray:
        """Materialize the operator as one dense matrix."""
        if self.layout == "hstack":
            return np.hstack(self.blocks)
        out = np.zeros(self.shape)
        r = c = 0
        for b in self.blocks:
            out[r:r + b.shape[0], c:c + b.shape[1]] = b
            r += b.shape[0]
            c += b.shape[1]
        return out

    def block(self, i: int) -> "LinearMap":
        return LinearMap((self.blocks[i],))

    def with_norm_sq(self, value: float) -> "LinearMap":
        return LinearMap(self.blocks, self.layout, norm_sq=float(value))

    def __matmul__(self, x: np.ndarray) -> np.ndarray:
        return apply(self, x)


def dense(matrix: np.ndarray | Sequence[Sequence[float]] | float) -> LinearMap:
    return LinearMap((np.atleast_2d(np.asarray(matrix, dtype=float)),))


def hstack(blocks: Sequence[np.ndarray]) -> LinearMap:
    return LinearMap(tuple(blocks), "hstack")


def blockdiag(blocks: Sequence[np.ndarray]) -> LinearMap:
    return LinearMap(tuple(blocks), "blockdiag")


def identity(n: int) -> LinearMap:
    return dense(np.eye(n))


def apply(op: LinearMap, x: np.ndarray) -> np.ndarray:
    """Return ``A x``.  Block contributions are summed left to right."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or x.shape[0] != op.cols:
        raise SolverError("shape", f"expected a vector of length {op.cols}, got {x.shape}")
    offs = op.col_offsets
    if op.layout == "hstack":
        out = op.blocks[0] @ x[offs[0]:offs[1]]
        for i in range(1, len(op.blocks)):
            out = out + op.blocks[i] @ x[offs[i]:offs[i + 1]]
        return out
    return np.concatenate([b @ x[offs[i]:offs[i + 1]] for i, b in enumerate(op.blocks)])


def adjoint_apply(op: LinearMap, y: np.ndarray) -> np.ndarray:
    """Return ``A^T y``."""
    y = np.asarray(y, dtype=float)
    if y.ndim != 1 or y.shape[0] != op.rows:
        raise SolverError("shape", f"expected a vector of length {op.rows}, got {y.shape}")
    if op.layout == "hstack":
        return np.concatenate([b.T @ y for b in op.blocks])
    parts = []
    r = 0
    for b in op.blocks:
        parts.append(b.T @ y[r:r + b.shape[0]])
        r += b.shape[0]
    return np.concatenate(parts)


def _power_iteration(op: LinearMap, v: np.ndarray, tol: float, max_iter: int) -> tuple[float, bool]:
    v = v / np.linalg.norm(v)
    est = 0.0
    for _ in range(max_iter):
        w = adjoint_apply(op, apply(op, v))
        new = float(v @ w)
        # rescale by the largest entry first: squaring tiny entries inside norm() underflows
        peak = float(np.max(np.abs(w)))
        if peak == 0.0:
            return 0.0, True
        v = w / peak
        v /= np.linalg.norm(v)
        if abs(new - est) <= tol * max(abs(new), np.finfo(float).tiny):
            return new, True
        est = new
    return est, False


def spectral_norm_sq(op: LinearMap, tol: float = 1e-12, max_iter: int = 100_000) -> float:
    """Power-method estimate of ``||A||_2^2`` inflated by :data:`SAFETY_FACTOR`.

    The start vector is the normalized all-ones vector, so repeated calls give
    identical results.  If that vector happens to lie in the null space of a
    nonzero operator the iteration restarts from the coordinate vector of the
    largest column.
    """
    if op.norm_sq is not None:
        return op.norm_sq
    # the blocks are read-only, so the estimate is cached on the operator
    if op._norm_cache is not None and op._norm_cache[0] == (tol, max_iter):
        return op._norm_cache[1]
    value = _estimate_norm_sq(op, tol, max_iter)
    object.__setattr__(op, "_norm_cache", ((tol, max_iter), value))
    return value


def _estimate_norm_sq(op: LinearMap, tol: float, max_iter: int) -> float:
    if not any(np.any(b) for b in op.blocks):
        return 0.0
    est, ok = _power_iteration(op, np.ones(op.cols), tol, max_iter)
    if est == 0.0:
        cols = np.linalg.norm(op.dense(), axis=0)
        start = np.zeros(op.cols)
        start[int(np.argmax(cols))] = 1.0
        est, ok = _power_iteration(op, start, tol, max_iter)
    if not ok:
        raise SolverError("norm-estimate", "power method did not converge", estimate=est * SAFETY_FACTOR)
    return est * SAFETY_FACTOR


def min_eig_gram(op: LinearMap, cap: int = GRAM_CAP) -> float:
    """Smallest eigenvalue of ``A^T A`` from a dense symmetric eigensolve."""
    if op.cols > cap:
        raise SolverError("too-large", f"{op.cols} columns exceed the cap of {cap}")
    mat = op.dense()
    return max(float(np.linalg.eigvalsh(mat.T @ mat)[0]), 0.0)

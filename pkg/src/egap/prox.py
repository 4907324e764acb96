"""Catalog of proximally tractable convex terms and simple feasible sets.

Every term is a *base* function (one of :data:`KINDS`) plus an optional
quadratic ``(sigma/2)||x - center||^2``.  The quadratic is folded into the
base prox through the shift identity

    prox_{lam (h + sigma/2 ||. - c||^2)}(v) = prox_{lam' h}(v'),
    lam' = lam / (1 + lam sigma),  v' = (v + lam sigma c) / (1 + lam sigma),

which holds over any convex set because the two objectives differ by a
positive factor and a constant.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import SolverError

KINDS = ("zero", "l1", "group_l2", "squared_l2", "l2_norm", "hinge_sum", "indicator_zero")
SET_KINDS = ("all", "box", "nonneg")
FEAS_TOL = 1e-12
_BISECTION_STEPS = 64


def _vec(a, n: int | None = None) -> np.ndarray | None:
    if a is None:
        return None
    arr = np.asarray(a, dtype=float)
    if n is not None and arr.ndim == 0:
        arr = np.full(n, float(arr))
    return arr


@dataclass(frozen=True, eq=False)
class FunctionSpec:
    """A convex term ``f(x) = base(x) + (sigma/2)||x - center||^2 + offset``."""

    kind: str
    weights: np.ndarray | float = 1.0
    group_ids: np.ndarray | None = None
    labels: np.ndarray | None = None
    quad_sigma: float = 0.0
    quad_center: np.ndarray | float = 0.0
    offset: float = 0.0
    lips_grad: float | None = None

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise SolverError("no-prox-rule", f"unknown function kind {self.kind!r}")
        if self.quad_sigma < 0:
            raise ValueError("quad_sigma must be nonnegative")
        if np.any(np.asarray(self.weights) < 0):
            raise ValueError("weights must be nonnegative")
        if self.kind == "group_l2":
            if self.group_ids is None:
                raise ValueError("group_l2 needs group_ids")
            ids = np.asarray(self.group_ids)
            if ids.ndim != 1 or not np.issubdtype(ids.dtype, np.integer):
                raise ValueError("group_ids must be a 1-D integer array")
            ng = int(ids.max()) + 1
            if ids.min() < 0 or np.any(np.bincount(ids, minlength=ng) == 0):
                raise ValueError("group_ids must label groups 0..n_g-1, each nonempty")
        if self.kind == "hinge_sum":
            if self.labels is None or not np.all(np.isin(self.labels, (-1, 1))):
                raise ValueError("hinge_sum labels must be +1 or -1")

    @property
    def sigma_f(self) -> float:
        return float(self.quad_sigma)

    @property
    def n_groups(self) -> int:
        return int(np.max(self.group_ids)) + 1 if self.group_ids is not None else 0


# constructors ---------------------------------------------------------------

def zero() -> FunctionSpec:
    return FunctionSpec("zero", lips_grad=0.0)


def l1(weights=1.0) -> FunctionSpec:
    return FunctionSpec("l1", weights=weights)


def group_l2(group_ids, weights=1.0) -> FunctionSpec:
    return FunctionSpec("group_l2", weights=weights, group_ids=np.asarray(group_ids, dtype=np.int64))


def squared_l2(sigma: float, center=0.0) -> FunctionSpec:
    return FunctionSpec("squared_l2", quad_sigma=float(sigma), quad_center=center, lips_grad=float(sigma))


def l2_norm(weight: float = 1.0) -> FunctionSpec:
    return FunctionSpec("l2_norm", weights=float(weight))


def hinge_sum(labels, weight: float = 1.0) -> FunctionSpec:
    return FunctionSpec("hinge_sum", weights=float(weight), labels=np.asarray(labels, dtype=float))


def indicator_zero() -> FunctionSpec:
    return FunctionSpec("indicator_zero")


def strongly_convexify(f: FunctionSpec, sigma: float, center=0.0) -> FunctionSpec:
    """Return the spec of ``f + (sigma/2)||x - center||^2``.

    Two quadratics merge into one with summed curvature; the constant left
    over is kept in ``offset`` so that function values stay exact.
    """
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    s1, s2 = f.quad_sigma, float(sigma)
    c1, c2 = np.asarray(f.quad_center, dtype=float), np.asarray(center, dtype=float)
    tot = s1 + s2
    new_center = (s1 * c1 + s2 * c2) / tot
    extra = 0.5 * s1 * s2 / tot * float(np.sum((c1 - c2) ** 2)) if s1 > 0 else 0.0
    lips = None if f.lips_grad is None else f.lips_grad + s2
    return replace(f, quad_sigma=tot, quad_center=new_center, offset=f.offset + extra, lips_grad=lips)


@dataclass(frozen=True, eq=False)
class FeasibleSet:
    kind: str = "all"
    lower: np.ndarray | float | None = None
    upper: np.ndarray | float | None = None

    def __post_init__(self) -> None:
        if self.kind not in SET_KINDS:
            raise SolverError("no-prox-rule", f"unknown set kind {self.kind!r}")
        if self.kind == "box":
            lo, hi = np.asarray(self.lower, dtype=float), np.asarray(self.upper, dtype=float)
            if np.any(lo > hi):
                raise ValueError("box needs lower <= upper")

    def bounds(self, n: int) -> tuple[np.ndarray, np.ndarray]:
        if self.kind == "all":
            return np.full(n, -np.inf), np.full(n, np.inf)
        if self.kind == "nonneg":
            return np.zeros(n), np.full(n, np.inf)
        return (np.broadcast_to(np.asarray(self.lower, dtype=float), (n,)).copy(),
                np.broadcast_to(np.asarray(self.upper, dtype=float), (n,)).copy())

    def project(self, v: np.ndarray) -> np.ndarray:
        if self.kind == "all":
            return np.array(v, dtype=float)
        lo, hi = self.bounds(len(v))
        return np.clip(v, lo, hi)

    def contains(self, x: np.ndarray, tol: float = FEAS_TOL) -> bool:
        if self.kind == "all":
            return True
        lo, hi = self.bounds(len(x))
        return bool(np.all(x >= lo - tol) and np.all(x <= hi + tol))

    def is_bounded(self, n: int) -> bool:
        lo, hi = self.bounds(n)
        return bool(np.all(np.isfinite(lo)) and np.all(np.isfinite(hi)))


ALL = FeasibleSet("all")


def box(lower, upper) -> FeasibleSet:
    return FeasibleSet("box", lower, upper)


def nonneg() -> FeasibleSet:
    return FeasibleSet("nonneg")


# evaluation -----------------------------------------------------------------

def _group_norms(x: np.ndarray, ids: np.ndarray, ng: int) -> np.ndarray:
    return np.sqrt(np.bincount(ids, weights=x * x, minlength=ng))


def _base_value(f: FunctionSpec, x: np.ndarray) -> float:
    k = f.kind
    if k in ("zero", "squared_l2"):
        return 0.0
    if k == "l1":
        return float(np.sum(_vec(f.weights, len(x)) * np.abs(x)))
    if k == "group_l2":
        ng = f.n_groups
        return float(np.sum(_vec(f.weights, ng) * _group_norms(x, f.group_ids, ng)))
    if k == "l2_norm":
        return float(f.weights) * float(np.linalg.norm(x))
    if k == "hinge_sum":
        return float(f.weights) * float(np.sum(np.maximum(0.0, 1.0 - f.labels * x)))
    # indicator_zero
    return 0.0 if np.all(np.abs(x) <= FEAS_TOL) else np.inf


def func_eval(f: FunctionSpec, X: FeasibleSet, x) -> float:
    """``f(x)`` if ``x`` lies in ``X`` (within 1e-12 per bound), else ``inf``."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise SolverError("shape", "func_eval expects a vector")
    if not X.contains(x):
        return np.inf
    val = _base_value(f, x)
    if f.quad_sigma > 0:
        val += 0.5 * f.quad_sigma * float(np.sum((x - f.quad_center) ** 2))
    return val + f.offset


def _soft(v: np.ndarray, t) -> np.ndarray:
    return np.sign(v) * np.maximum(np.abs(v) - t, 0.0)


def _hinge_prox(v: np.ndarray, labels: np.ndarray, lam: float) -> np.ndarray:
    # In the variable t = y r the loss is [1 - t]_+; three branches.
    s = labels * v
    t = np.where(s > 1.0, s, np.where(s < 1.0 - lam, s + lam, 1.0))
    return labels * t


# decision: group-box-prox
def _group_shrink_box(v, ids, ng, thresh, lo, hi) -> np.ndarray:
    """Exact prox of ``sum_g t_g ||z_g||`` over a box containing the origin.

    For a fixed group norm s the coordinates decouple, giving
    ``z = clip(theta v, lo, hi)`` with ``theta = s / (s + t)``.  The map
    ``theta -> ||clip(theta v)|| (1 - theta) / theta - t`` is decreasing, so
    its root is found by bisection on (0, 1).
    """
    norms = _group_norms(v, ids, ng)
    with np.errstate(divide="ignore", invalid="ignore"):
        scale = np.where(norms > thresh, 1.0 - thresh / norms, 0.0)
    z = scale[ids] * v
    inside = np.ones(ng, dtype=bool)
    bad = (z < lo) | (z > hi)
    inside[np.unique(ids[bad])] = False
    if inside.all():
        return z
    a, b = np.zeros(ng), np.ones(ng)
    for _ in range(_BISECTION_STEPS):
        mid = 0.5 * (a + b)
        c = np.minimum(np.maximum(mid[ids] * v, lo), hi)
        h = _group_norms(c, ids, ng) * (1.0 - mid) - mid * thresh
        pos = h > 0
        a = np.where(pos, mid, a)
        b = np.where(pos, b, mid)
    theta = 0.5 * (a + b)
    zb = np.clip(theta[ids] * v, lo, hi)
    return np.where(inside[ids], z, zb)


def _base_prox(f: FunctionSpec, X: FeasibleSet, lam: float, v: np.ndarray) -> np.ndarray:
    n = len(v)
    k = f.kind
    if k in ("zero", "squared_l2"):
        return X.project(v)
    if k == "l1":
        return X.project(_soft(v, lam * _vec(f.weights, n)))
    if k == "hinge_sum":
        return X.project(_hinge_prox(v, f.labels, lam * float(f.weights)))
    if k == "indicator_zero":
        z = np.zeros(n)
        if not X.contains(z):
            raise SolverError("no-prox-rule", "indicator of {0} with a set excluding the origin")
        return z
    if k == "l2_norm":
        ids, ng, w = np.zeros(n, dtype=np.int64), 1, np.array([float(f.weights)])
    else:
        ids, ng = f.group_ids, f.n_groups
        w = _vec(f.weights, ng)
    thresh = lam * w
    if X.kind == "all":
        norms = _group_norms(v, ids, ng)
        with np.errstate(divide="ignore", invalid="ignore"):
            scale = np.where(norms > thresh, 1.0 - thresh / norms, 0.0)
        return scale[ids] * v
    lo, hi = X.bounds(n)
    if np.any(lo > 0) or np.any(hi < 0):
        raise SolverError("no-prox-rule", "group norm with a box that excludes the origin")
    return _group_shrink_box(v, ids, ng, thresh, lo, hi)


def prox_eval(f: FunctionSpec, X: FeasibleSet, lam: float, v) -> np.ndarray:
    """``argmin_{z in X} f(z) + ||z - v||^2 / (2 lam)``."""
    if not lam > 0:
        raise ValueError("lambda must be positive")
    v = np.asarray(v, dtype=float)
    if f.quad_sigma > 0:
        den = 1.0 + lam * f.quad_sigma
        v = (v + lam * f.quad_sigma * np.asarray(f.quad_center, dtype=float)) / den
        lam = lam / den
    return _base_prox(f, X, lam, v)


def linear_argmin(f: FunctionSpec, X: FeasibleSet, s) -> np.ndarray:
    """``argmin_{z in X} f(z) + <s, z>`` for a strongly convex ``f``.

    With ``f = h + (sigma/2)||. - c||^2`` this is the prox of ``h/sigma`` at
    ``c - s/sigma``.
    """
    if f.quad_sigma <= 0:
        raise SolverError("needs-strong-convexity", "linear_argmin needs sigma_f > 0")
    sig = f.quad_sigma
    point = np.asarray(f.quad_center, dtype=float) - np.asarray(s, dtype=float) / sig
    return _base_prox(f, X, 1.0 / sig, point)


# conjugates (used by the inner solver for duality-gap certificates) ---------

def conjugate(f: FunctionSpec, X: FeasibleSet, s) -> float | None:
    """``sup_{z in X} <s, z> - f(z)``, ``inf`` when unbounded.

    Returns ``None`` for combinations without a closed form.
    """
    s = np.asarray(s, dtype=float)
    n = len(s)
    if f.quad_sigma > 0:
        z = linear_argmin(f, X, -s)
        return float(s @ z) - func_eval(f, X, z)
    lo, hi = X.bounds(n)
    k = f.kind
    if k == "indicator_zero":
        return 0.0 - f.offset
    if k in ("zero", "l1"):
        w = np.zeros(n) if k == "zero" else _vec(f.weights, n)
        # 1-D concave piecewise-linear s z - w|z| maximized over [lo, hi].
        up_slope, down_slope = s - w, s + w
        if np.any((hi == np.inf) & (up_slope > 0)) or np.any((lo == -np.inf) & (down_slope < 0)):
            return np.inf
        with np.errstate(invalid="ignore"):
            at_hi = np.where(np.isfinite(hi), s * hi - w * np.abs(hi), -np.inf)
            at_lo = np.where(np.isfinite(lo), s * lo - w * np.abs(lo), -np.inf)
        at_zero = np.where((lo <= 0) & (hi >= 0), 0.0, -np.inf)
        return float(np.sum(np.maximum(np.maximum(at_hi, at_lo), at_zero))) - f.offset
    if k in ("group_l2", "l2_norm") and X.kind == "all":
        if k == "l2_norm":
            return 0.0 - f.offset if np.linalg.norm(s) <= float(f.weights) * (1 + 1e-15) else np.inf
        ng = f.n_groups
        ok = _group_norms(s, f.group_ids, ng) <= _vec(f.weights, ng) * (1 + 1e-15)
        return 0.0 - f.offset if ok.all() else np.inf
    return None


def dual_scale(f: FunctionSpec, X: FeasibleSet, s) -> float:
    """Largest ``theta`` in [0, 1] for which ``conjugate(f, X, theta s)`` is finite."""
    s = np.asarray(s, dtype=float)
    n = len(s)
    if f.quad_sigma > 0 or f.kind == "indicator_zero":
        return 1.0
    lo, hi = X.bounds(n)
    if f.kind in ("zero", "l1"):
        w = np.zeros(n) if f.kind == "zero" else _vec(f.weights, n)
        theta = 1.0
        pos = (hi == np.inf) & (s > w)
        neg = (lo == -np.inf) & (s < -w)
        with np.errstate(divide="ignore", invalid="ignore"):
            if pos.any():
                theta = min(theta, float(np.min(w[pos] / s[pos])))
            if neg.any():
                theta = min(theta, float(np.min(w[neg] / -s[neg])))
        return theta
    if f.kind in ("group_l2", "l2_norm") and X.kind == "all":
        if f.kind == "l2_norm":
            nrm = float(np.linalg.norm(s))
            return 1.0 if nrm <= f.weights else float(f.weights) / nrm
        ng = f.n_groups
        norms = _group_norms(s, f.group_ids, ng)
        w = _vec(f.weights, ng)
        with np.errstate(divide="ignore"):
            ratio = np.where(norms > w, w / norms, 1.0)
        return float(min(1.0, ratio.min()))
    return 1.0


_HOMOGENEOUS = ("zero", "l1", "group_l2", "l2_norm")


def _support_excess(f: FunctionSpec, x: np.ndarray, g: np.ndarray) -> float:
    """``h(x) - <g, x>`` for a positively homogeneous base ``h`` and ``g`` in its dual ball.

    Evaluated term by term (per coordinate or per group), each term being
    nonnegative, so no cancellation occurs between large numbers.
    """
    n = len(x)
    if f.kind == "zero":
        return float(np.sum(np.abs(g * x)))
    if f.kind == "l1":
        return float(np.sum(np.maximum(_vec(f.weights, n) * np.abs(x) - g * x, 0.0)))
    if f.kind == "l2_norm":
        return max(float(f.weights) * float(np.linalg.norm(x)) - float(g @ x), 0.0)
    ng = f.n_groups
    w = _vec(f.weights, ng)
    dots = np.bincount(f.group_ids, weights=g * x, minlength=ng)
    return float(np.sum(np.maximum(w * _group_norms(x, f.group_ids, ng) - dots, 0.0)))


def fenchel_young_gap(f: FunctionSpec, X: FeasibleSet, x, s) -> float | None:
    """``f(x) + f*(s) - <s, x>`` (with ``f`` restricted to ``X``), or ``None`` if unavailable.

    The value is nonnegative and vanishes exactly when ``s`` is a subgradient
    of ``f + indicator_X`` at ``x``.  For the common cases the gap is
    assembled from nonnegative per-coordinate pieces instead of as a
    difference of two function values.
    """
    x = np.asarray(x, dtype=float)
    s = np.asarray(s, dtype=float)
    n = len(x)
    if not X.contains(x):
        return np.inf
    if f.quad_sigma > 0:
        if f.kind not in _HOMOGENEOUS or X.kind != "all":
            c = conjugate(f, X, s)
            return None if c is None else max(func_eval(f, X, x) + c - float(s @ x), 0.0)
        # z maximizes <s, z> - f(z); g = s - sigma (z - c) lies in the subdifferential of h at z.
        sig = f.quad_sigma
        z = linear_argmin(f, X, -s)
        g = s - sig * (z - np.asarray(f.quad_center, dtype=float))
        return _support_excess(f, x, g) + 0.5 * sig * float(np.sum((x - z) ** 2))
    if f.kind in ("zero", "l1"):
        w = np.zeros(n) if f.kind == "zero" else _vec(f.weights, n)
        lo, hi = X.bounds(n)
        if np.any((hi == np.inf) & (s > w)) or np.any((lo == -np.inf) & (s < -w)):
            return np.inf
        with np.errstate(invalid="ignore"):
            at_hi = np.where(np.isfinite(hi), s * (hi - x) - w * (np.abs(hi) - np.abs(x)), -np.inf)
            at_lo = np.where(np.isfinite(lo), s * (lo - x) - w * (np.abs(lo) - np.abs(x)), -np.inf)
        at_zero = np.where((lo <= 0) & (hi >= 0), w * np.abs(x) - s * x, -np.inf)
        return float(np.sum(np.maximum(np.maximum(np.maximum(at_hi, at_lo), at_zero), 0.0)))
    if f.kind in ("group_l2", "l2_norm") and X.kind == "all":
        if conjugate(replace(f, offset=0.0), X, s) == np.inf:
            return np.inf
        return _support_excess(f, x, s)
    c = conjugate(f, X, s)
    return None if c is None else max(func_eval(f, X, x) + c - float(s @ x), 0.0)


class SeparableTerm:
    """Block-separable sum ``sum_i f_i(x_i)`` with ``x_i`` in ``X_i``.

    Blocks are evaluated one after another and concatenated, so the result
    is identical to evaluating each block on its own.
    """

    def __init__(self, parts, sizes) -> None:
        self.parts = tuple(parts)
        self.sizes = tuple(int(s) for s in sizes)
        if len(self.parts) != len(self.sizes):
            raise SolverError("shape", "one size per block is required")
        self.offsets = np.concatenate(([0], np.cumsum(self.sizes))).astype(int)

    @property
    def n(self) -> int:
        return int(self.offsets[-1])

    def split(self, x) -> list[np.ndarray]:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.n,):
            raise SolverError("shape", f"expected length {self.n}, got {x.shape}")
        if len(self.parts) == 1:
            return [x]
        return [x[self.offsets[i]:self.offsets[i + 1]] for i in range(len(self.parts))]

    def value(self, x) -> float:
        return float(sum(func_eval(f, X, xi) for (f, X), xi in zip(self.parts, self.split(x))))

    def prox(self, lam: float, v) -> np.ndarray:
        parts = [prox_eval(f, X, lam, vi) for (f, X), vi in zip(self.parts, self.split(v))]
        return parts[0] if len(parts) == 1 else np.concatenate(parts)

    def linear_argmin(self, s) -> np.ndarray:
        return np.concatenate([linear_argmin(f, X, si) for (f, X), si in zip(self.parts, self.split(s))])

    def conjugate(self, s) -> float | None:
        total = 0.0
        for (f, X), si in zip(self.parts, self.split(s)):
            c = conjugate(f, X, si)
            if c is None:
                return None
            total += c
        return total

    def fenchel_young_gap(self, x, s) -> float | None:
        total = 0.0
        for (f, X), xi, si in zip(self.parts, self.split(x), self.split(s)):
            g = fenchel_young_gap(f, X, xi, si)
            if g is None:
                return None
            total += g
        return total

    def dual_scale(self, s) -> float:
        return min(dual_scale(f, X, si) for (f, X), si in zip(self.parts, self.split(s)))

    def contains(self, x) -> bool:
        return all(X.contains(xi) for (_, X), xi in zip(self.parts, self.split(x)))

    def project(self, x) -> np.ndarray:
        return np.concatenate([X.project(xi) for (_, X), xi in zip(self.parts, self.split(x))])

    def bounds(self) -> tuple[np.ndarray, np.ndarray]:
        lo, hi = zip(*(X.bounds(s) for (_, X), s in zip(self.parts, self.sizes)))
        return np.concatenate(lo), np.concatenate(hi)

    @property
    def sigma_f(self) -> float:
        return min(f.sigma_f for f, _ in self.parts)

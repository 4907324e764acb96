"""Problem container, benchmark generators and small-scale reference oracles.

All generators draw from ``numpy.random.Philox``, a counter-based 64-bit
generator, seeded with the user's integer seed.  The fill order is fixed
(matrix first, row-major, then support, then values, then noise), so an
instance is reproducible from ``(generator name, parameters, seed)`` alone.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from . import prox as P
from .errors import SolverError
from .linop import LinearMap, adjoint_apply, apply, hstack

VERTEX_ENUM_MAX_N = 12


@dataclass(frozen=True)
class Block:
    f: P.FunctionSpec
    X: P.FeasibleSet
    A: np.ndarray


@dataclass(frozen=True)
class Reference:
    x: np.ndarray
    y: np.ndarray
    f: float
    provenance: str


@dataclass(eq=False)
class ConstrainedProblem:
    """``min sum_i f_i(x_i)  s.t.  sum_i A_i x_i = b`` (or ``<= b``), ``x_i in X_i``."""

    blocks: tuple[Block, ...]
    b: np.ndarray
    sense: str = "eq"
    reference: Reference | None = None
    meta: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        self.blocks = tuple(self.blocks)
        self.b = np.asarray(self.b, dtype=float)
        if self.sense not in ("eq", "ineq"):
            raise SolverError("shape", f"unknown constraint sense {self.sense!r}")
        self.A = hstack([blk.A for blk in self.blocks])
        if self.A.rows != self.b.shape[0]:
            raise SolverError("shape", "every block needs as many rows as b")
        self.term = P.SeparableTerm([(blk.f, blk.X) for blk in self.blocks],
                                    [np.atleast_2d(blk.A).shape[1] for blk in self.blocks])

    @property
    def m(self) -> int:
        return self.A.rows

    @property
    def n(self) -> int:
        return self.A.cols

    def objective(self, x) -> float:
        return self.term.value(x)

    def residual(self, x) -> np.ndarray:
        return apply(self.A, x) - self.b

    def with_reference(self, ref: Reference) -> "ConstrainedProblem":
        return ConstrainedProblem(self.blocks, self.b, self.sense, ref, dict(self.meta))

    def with_operator(self, op: LinearMap) -> "ConstrainedProblem":
        """Return a copy whose operator carries a cached norm estimate."""
        out = ConstrainedProblem(self.blocks, self.b, self.sense, self.reference, dict(self.meta))
        out.A = op
        return out


# decision: philox-prng
def _rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(int(seed)))


def _sparse_signal(rng, n: int, s: int) -> np.ndarray:
    x = np.zeros(n)
    idx = rng.permutation(n)[:s]
    x[np.sort(idx)] = rng.standard_normal(s)
    return x


# generators ---------------------------------------------------------------

def make_basis_pursuit(seed: int, m: int, n: int, sparsity: int) -> ConstrainedProblem:
    """``min ||x||_1  s.t.  Ax = b`` with Gaussian ``A`` and ``b = A x_nat``."""
    if not (sparsity <= n and m < n):
        raise ValueError("need sparsity <= n and m < n")
    rng = _rng(seed)
    A = rng.standard_normal((m, n))
    x_nat = _sparse_signal(rng, n, sparsity)
    meta = dict(family="basis_pursuit", seed=seed, m=m, n=n, sparsity=sparsity, x_nat=x_nat)
    return ConstrainedProblem((Block(P.l1(1.0), P.ALL, A),), A @ x_nat, meta=meta)


def random_groups(rng, n: int, n_groups: int) -> np.ndarray:
    """Random partition of ``0..n-1`` into ``n_groups`` nonempty groups of near-equal size."""
    ids = np.empty(n, dtype=np.int64)
    ids[rng.permutation(n)] = np.arange(n) % n_groups
    return ids


def make_group_bp(seed: int, n: int, m: int | None = None, n_groups: int | None = None,
                  box: bool = True, weights: float | np.ndarray = 1.0) -> ConstrainedProblem:
    """Group basis pursuit with a random non-overlapping partition.

    Defaults follow the benchmark sizing ``m = n // 3`` and ``n_g = n // 8``;
    the signal is active on ``max(1, n_g // 8)`` groups and the box is
    ``[min x_nat, max x_nat]`` applied to every coordinate.
    """
    m = n // 3 if m is None else m
    n_groups = max(1, n // 8) if n_groups is None else n_groups
    rng = _rng(seed)
    A = rng.standard_normal((m, n))
    ids = random_groups(rng, n, n_groups)
    active = rng.permutation(n_groups)[:max(1, n_groups // 8)]
    x_nat = np.zeros(n)
    mask = np.isin(ids, active)
    x_nat[mask] = rng.standard_normal(int(mask.sum()))
    lo, hi = min(float(x_nat.min()), 0.0), max(float(x_nat.max()), 0.0)
    X = P.box(lo, hi) if box else P.ALL
    meta = dict(family="group_bp", seed=seed, m=m, n=n, n_groups=n_groups, x_nat=x_nat,
                box=(lo, hi) if box else None)
    return ConstrainedProblem((Block(P.group_l2(ids, weights), X, A),), A @ x_nat, meta=meta)


def make_elastic_net(seed: int, m: int, n: int, sparsity: int, sigma: float = 0.1) -> ConstrainedProblem:
    """``min ||x||_1 + (sigma/2)||x||^2  s.t.  Ax = b`` on basis-pursuit data."""
    base = make_basis_pursuit(seed, m, n, sparsity)
    f = P.strongly_convexify(P.l1(1.0), sigma, 0.0) if sigma > 0 else P.l1(1.0)
    blk = base.blocks[0]
    meta = dict(base.meta, family="elastic_net", sigma=sigma)
    return ConstrainedProblem((Block(f, P.ALL, blk.A),), base.b, meta=meta)


# inverse normal CDF (Acklam's rational approximation, relative error below
# 1.15e-9, followed by one Halley step against erfc).
_ACK_A = (-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
          1.383577518672690e+02, -3.066479806614716e+01, 2.506628277459239e+00)
_ACK_B = (-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
          6.680131188771972e+01, -1.328068155288572e+01)
_ACK_C = (-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
          -2.549732539343734e+00, 4.374664141464968e+00, 2.938163982698783e+00)
_ACK_D = (7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
          3.754408661907416e+00)


def norm_ppf(p: float) -> float:
    """Inverse of the standard normal CDF."""
    if not 0.0 < p < 1.0:
        raise ValueError("p must lie in (0, 1)")
    a, b, c, d = _ACK_A, _ACK_B, _ACK_C, _ACK_D
    p_low = 0.02425
    if p < p_low:
        q = math.sqrt(-2 * math.log(p))
        x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) / \
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1)
    elif p <= 1 - p_low:
        q = p - 0.5
        r = q * q
        x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q / \
            (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1)
    else:
        q = math.sqrt(-2 * math.log(1 - p))
        x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) / \
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1)
    # Halley refinement; the tail form avoids cancellation for p near 1.
    if p > 0.5:
        err = 0.5 * math.erfc(x / math.sqrt(2)) - (1 - p)
        err = -err
    else:
        err = 0.5 * math.erfc(-x / math.sqrt(2)) - p
    u = err * math.sqrt(2 * math.pi) * math.exp(x * x / 2)
    return x - u / (1 + x * u / 2)


def sqrt_lasso_lambda(n: int, c: float = 1.1, alpha: float = 0.05) -> float:
    return c * norm_ppf(1 - 0.5 * alpha / n)


# decision: correlated-columns
def correlated_gaussian(rng, m: int, n: int, rho: float) -> np.ndarray:
    """Gaussian matrix whose columns are mixed with the first one, then unit-normalized."""
    A = rng.standard_normal((m, n))
    A = (1 - rho) * A + rho * A[:, :1]
    return A / np.linalg.norm(A, axis=0)


# decision: noise-model
def make_sqrt_lasso(seed: int, m: int, n: int, sparsity: int, lam: float | None = None,
                    rho: float = 0.5, noise: float = 0.05) -> ConstrainedProblem:
    """Square-root LASSO in slack form: ``min lam||x||_1 + ||r||_2  s.t.  Ax - r = b``.

    ``noise`` is the standard deviation of the additive Gaussian noise as a
    fraction of ``||A x_nat|| / sqrt(m)``.
    """
    rng = _rng(seed)
    A = correlated_gaussian(rng, m, n, rho)
    x_nat = _sparse_signal(rng, n, sparsity)
    clean = A @ x_nat
    scale = noise * np.linalg.norm(clean) / math.sqrt(m)
    b = clean + scale * rng.standard_normal(m)
    lam = sqrt_lasso_lambda(n) if lam is None else lam
    blocks = (Block(P.l1(lam), P.ALL, A), Block(P.l2_norm(1.0), P.ALL, -np.eye(m)))
    meta = dict(family="sqrt_lasso", seed=seed, m=m, n=n, sparsity=sparsity, lam=lam, rho=rho,
                noise=noise, noise_sd=scale, x_nat=x_nat)
    return ConstrainedProblem(blocks, b, meta=meta)


def sqrt_lasso_objective(problem: ConstrainedProblem, x) -> float:
    """Compact objective ``lam||x||_1 + ||Ax - b||_2`` of a slack-form instance."""
    A = problem.blocks[0].A
    return problem.meta["lam"] * float(np.sum(np.abs(x))) + float(np.linalg.norm(A @ x - problem.b))


def make_svm_hinge(W, b_vec, labels, regularizer: tuple[str, float] = ("l2", 1.0)) -> ConstrainedProblem:
    """Hinge-loss SVM in slack form: ``min sum_j [1 - y_j r_j]_+ + g(x)  s.t.  Wx - r = b``."""
    W = np.asarray(W, dtype=float)
    kind, lam = regularizer
    if kind == "l2":
        g = P.squared_l2(lam)
    elif kind == "l1":
        g = P.l1(lam)
    else:
        raise ValueError(f"unknown regularizer {kind!r}")
    N = W.shape[0]
    blocks = (Block(g, P.ALL, W), Block(P.hinge_sum(labels), P.ALL, -np.eye(N)))
    meta = dict(family="svm", labels=np.asarray(labels, dtype=float), regularizer=regularizer)
    return ConstrainedProblem(blocks, np.asarray(b_vec, dtype=float), meta=meta)


def svm_accuracy(problem: ConstrainedProblem, x) -> float:
    """Share of points whose predicted sign ``sign(Wx - b)`` matches the label."""
    W = problem.blocks[0].A
    pred = np.sign(W @ np.asarray(x)[:W.shape[1]] - problem.b)
    return 1.0 - float(np.mean(pred != problem.meta["labels"]))


def group_bp_slack(problem: ConstrainedProblem) -> ConstrainedProblem:
    """Two-block form ``min f(x) + indicator_{0}(r)  s.t.  Ax + r = b``."""
    blk = problem.blocks[0]
    m = problem.m
    blocks = (blk, Block(P.indicator_zero(), P.ALL, np.eye(m)))
    return ConstrainedProblem(blocks, problem.b, problem.sense, None, dict(problem.meta, slack=True))


# reference oracles --------------------------------------------------------

def min_norm_qp(E: np.ndarray, e: np.ndarray, G: np.ndarray, h: np.ndarray, y0: np.ndarray,
                max_iter: int = 500, tol: float = 1e-11) -> np.ndarray:
    """Primal active-set method for ``min ||y||^2/2  s.t.  Ey = e, Gy <= h``.

    ``y0`` must be feasible.  Returns the unique minimizer.
    """
    y = np.array(y0, dtype=float)
    n_eq = E.shape[0]
    active = [i for i in range(G.shape[0]) if G[i] @ y >= h[i] - tol]

    def rows(ws):
        return np.vstack([E, G[ws]]) if ws else E

    # keep a linearly independent working set
    ws: list[int] = []
    for i in active:
        cand = rows(ws + [i])
        if np.linalg.matrix_rank(cand, tol=1e-10) == cand.shape[0]:
            ws.append(i)
    for _ in range(max_iter):
        C = rows(ws)
        rhs = np.concatenate([e, h[ws]]) if ws else e
        # minimum-norm point of the working affine set
        target = C.T @ np.linalg.lstsq(C @ C.T, rhs, rcond=None)[0] if C.shape[0] else np.zeros_like(y)
        p = target - y
        if np.linalg.norm(p) <= tol * (1 + np.linalg.norm(y)):
            if not ws:
                return y
            mu = -np.linalg.lstsq(C.T, y, rcond=None)[0]
            ineq_mu = mu[n_eq:]
            if ineq_mu.size == 0 or ineq_mu.min() >= -tol:
                return y
            ws.pop(int(np.argmin(ineq_mu)))
            continue
        Gp = G @ p
        slack = h - G @ y
        alpha, block = 1.0, None
        for i in range(G.shape[0]):
            if i not in ws and Gp[i] > tol:
                a = max(slack[i], 0.0) / Gp[i]
                if a < alpha:
                    alpha, block = a, i
        y = y + alpha * p
        if block is not None:
            ws.append(block)
    raise SolverError("oracle-size", "active-set QP did not terminate")


def _l1_weights(problem: ConstrainedProblem, allow_quad: bool = False) -> np.ndarray:
    """Per-coordinate weights of a single-block weighted-l1 objective."""
    if len(problem.blocks) != 1:
        raise SolverError("oracle-size", "LP oracle handles single-block problems")
    f, X = problem.blocks[0].f, problem.blocks[0].X
    n = problem.n
    if X.kind != "all" or (f.quad_sigma > 0 and not allow_quad):
        raise SolverError("oracle-size", "LP oracle needs an unconstrained l1-type objective")
    if f.kind in ("zero", "squared_l2"):
        return np.zeros(n)
    if f.kind == "l1":
        return np.broadcast_to(np.asarray(f.weights, dtype=float), (n,)).copy()
    if f.kind == "group_l2" and f.n_groups == n:
        w = np.broadcast_to(np.asarray(f.weights, dtype=float), (n,))
        return w[f.group_ids].copy()
    raise SolverError("oracle-size", "LP oracle needs l1 or single-coordinate groups")


def dual_face_reference(A: np.ndarray, b: np.ndarray, w: np.ndarray, x: np.ndarray,
                        sigma: float = 0.0, support_tol: float = 1e-9) -> np.ndarray:
    """Minimum-norm multiplier of ``min w|x| + sigma/2||x||^2  s.t.  Ax = b``.

    Complementary slackness at the optimum ``x`` pins ``a_i^T y`` on the
    support; off the support ``|a_i^T y| <= w_i``.  The minimum-norm point of
    that face is found by :func:`min_norm_qp`.
    """
    S = np.abs(x) > support_tol
    E = A[:, S].T
    e = -(w[S] * np.sign(x[S]) + sigma * x[S])
    Ac = A[:, ~S].T
    G = np.vstack([Ac, -Ac])
    h = np.concatenate([w[~S], w[~S]])
    y0 = np.linalg.lstsq(E, e, rcond=None)[0] if E.shape[0] else np.zeros(A.shape[0])
    if G.shape[0] and np.any(G @ y0 > h + 1e-9):
        # the least-squares point is infeasible: start from a feasible face point
        from scipy.optimize import linprog
        res = linprog(np.zeros(A.shape[0]), A_ub=G, b_ub=h, A_eq=E if E.shape[0] else None,
                      b_eq=e if E.shape[0] else None, bounds=[(None, None)] * A.shape[0], method="highs")
        if res.status != 0:
            raise SolverError("oracle-size", "dual face is empty; x is not optimal")
        y0 = res.x
    return min_norm_qp(E, e, G, h, y0)


def reference_solve_lp(problem: ConstrainedProblem) -> Reference:
    """Exact ``(x*, y*, f*)`` of a small weighted-l1 basis pursuit by vertex enumeration."""
    w = _l1_weights(problem)
    A, b = problem.blocks[0].A, problem.b
    m, n = A.shape
    if n > VERTEX_ENUM_MAX_N:
        raise SolverError("oracle-size", f"vertex enumeration is limited to n <= {VERTEX_ENUM_MAX_N}")
    rank = np.linalg.matrix_rank(A)
    best, best_x = np.inf, None
    for cols in itertools.combinations(range(n), rank):
        sub = A[:, cols]
        if np.linalg.matrix_rank(sub) < rank:
            continue
        xs = np.linalg.lstsq(sub, b, rcond=None)[0]
        if np.linalg.norm(sub @ xs - b) > 1e-9 * (1 + np.linalg.norm(b)):
            continue
        val = float(w[list(cols)] @ np.abs(xs))
        if val < best - 1e-14:
            best, best_x = val, np.zeros(n)
            best_x[list(cols)] = xs
    if best_x is None:
        raise SolverError("oracle-size", "no basic feasible solution found")
    y = dual_face_reference(A, b, w, best_x)
    return Reference(best_x, y, best, "vertex-enumeration")


def reference_from_support(problem: ConstrainedProblem, x_approx, support_tol: float = 1e-6,
                           kkt_tol: float = 1e-9) -> Reference:
    """Polish an approximate solution into an exact, KKT-verified reference.

    The support and signs of ``x_approx`` fix a linear system for ``x*``; the
    multiplier is the minimum-norm point of the dual face.  The result is
    returned only if primal feasibility, dual feasibility and sign
    consistency all hold, which certifies optimality.
    """
    blk = problem.blocks[0]
    sigma = blk.f.quad_sigma
    w = _l1_weights(problem, allow_quad=True)
    A, b = blk.A, problem.b
    x_approx = np.asarray(x_approx, dtype=float)
    S = np.abs(x_approx) > support_tol
    s = np.sign(x_approx[S])
    k = int(S.sum())
    AS = A[:, S]
    if sigma > 0:
        m = A.shape[0]
        K = np.block([[sigma * np.eye(k), AS.T], [AS, np.zeros((m, m))]])
        rhs = np.concatenate([-w[S] * s, b])
        sol = np.linalg.lstsq(K, rhs, rcond=None)[0]
        xs = sol[:k]
    else:
        xs = np.linalg.lstsq(AS, b, rcond=None)[0]
    x = np.zeros(A.shape[1])
    x[S] = xs
    if np.linalg.norm(A @ x - b) > kkt_tol * (1 + np.linalg.norm(b)):
        raise SolverError("certificate-failed", "support system is not primal feasible")
    if np.any(np.sign(xs) != s):
        raise SolverError("certificate-failed", "support signs are inconsistent")
    y = dual_face_reference(A, b, w, x, sigma=sigma, support_tol=0.0)
    if np.any(np.abs(A.T @ y)[~S] > w[~S] + 1e-8):
        raise SolverError("certificate-failed", "dual feasibility fails")
    fval = problem.objective(x)
    return Reference(x, y, fval, "support-kkt")


def reference_solve_qp(problem: ConstrainedProblem, tol: float = 1e-13, max_iter: int = 500) -> Reference:
    """Elastic-net reference by regularized semismooth Newton on the dual, then a KKT solve.

    The dual function is ``g(y) = -b^T y - ||soft(-A^T y, w)||^2 / (2 sigma)``
    with gradient ``A x(y) - b`` where ``x(y) = soft(-A^T y, w) / sigma``.
    """
    blk = problem.blocks[0]
    f = blk.f
    sigma = f.quad_sigma
    if sigma <= 0:
        raise SolverError("oracle-size", "QP oracle needs a strongly convex objective")
    if np.any(np.asarray(f.quad_center) != 0):
        raise SolverError("oracle-size", "QP oracle assumes a zero center")
    A, b = blk.A, problem.b
    m, n = A.shape
    w = _l1_weights(problem, allow_quad=True)

    def x_of(y):
        v = -A.T @ y
        return np.sign(v) * np.maximum(np.abs(v) - w, 0.0) / sigma

    def dual(y):
        v = -A.T @ y
        t = np.maximum(np.abs(v) - w, 0.0)
        return -b @ y - t @ t / (2 * sigma)

    y = np.zeros(m)
    for _ in range(max_iter):
        x = x_of(y)
        grad = A @ x - b
        if np.linalg.norm(grad) <= tol * (1 + np.linalg.norm(b)):
            break
        S = np.abs(A.T @ y) > w
        # Levenberg-Marquardt shift: the generalized Hessian is singular when |S| < m
        # decision: qp-oracle-shift
        mu = min(1.0, float(np.linalg.norm(grad)))
        H = A[:, S] @ A[:, S].T / sigma + mu * np.eye(m)
        d = np.linalg.solve(H, grad)
        t, g0 = 1.0, dual(y)
        while dual(y + t * d) < g0 + 1e-4 * t * (grad @ d) and t > 1e-12:
            t *= 0.5
        y = y + t * d
    x = x_of(y)
    # coordinates at the threshold come out as rounding-level values; the polish re-checks them
    scale = max(1.0, float(np.max(np.abs(x))))
    return reference_from_support(problem, x, support_tol=1e-10 * scale)


# serialization ------------------------------------------------------------

def _spec_to_dict(f: P.FunctionSpec) -> dict:
    out: dict[str, Any] = {"kind": f.kind}
    for key in ("weights", "group_ids", "labels", "quad_center"):
        val = getattr(f, key)
        if val is not None:
            out[key] = np.asarray(val).tolist()
    out.update(quad_sigma=f.quad_sigma, offset=f.offset, lips_grad=f.lips_grad)
    return out


def _spec_from_dict(d: dict) -> P.FunctionSpec:
    kw = dict(d)
    kind = kw.pop("kind")
    for key in ("weights", "quad_center"):
        if key in kw:
            kw[key] = np.asarray(kw[key], dtype=float)
    if "group_ids" in kw:
        kw["group_ids"] = np.asarray(kw["group_ids"], dtype=np.int64)
    if "labels" in kw:
        kw["labels"] = np.asarray(kw["labels"], dtype=float)
    return P.FunctionSpec(kind, **kw)


def _set_to_dict(X: P.FeasibleSet) -> dict:
    out: dict[str, Any] = {"kind": X.kind}
    if X.kind == "box":
        out["lower"] = np.asarray(X.lower, dtype=float).tolist()
        out["upper"] = np.asarray(X.upper, dtype=float).tolist()
    return out


def _jsonable(value):
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, (np.floating, np.integer)):
        return value.item()
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, dict):
        return {k: _jsonable(v) for k, v in value.items()}
    return value


def problem_to_json(problem: ConstrainedProblem) -> str:
    """Self-describing text form: dimensions, row-major matrices, tagged specs."""
    doc = {
        "format": "egap-instance/1",
        "m": problem.m,
        "n": problem.n,
        "sense": problem.sense,
        "b": problem.b.tolist(),
        "blocks": [{"f": _spec_to_dict(blk.f), "X": _set_to_dict(blk.X),
                    "A": np.atleast_2d(blk.A).tolist()} for blk in problem.blocks],
        "meta": _jsonable(problem.meta),
    }
    if problem.reference is not None:
        r = problem.reference
        doc["reference"] = {"x": r.x.tolist(), "y": r.y.tolist(), "f": r.f, "provenance": r.provenance}
    return json.dumps(doc)


def problem_from_json(text: str) -> ConstrainedProblem:
    doc = json.loads(text)
    if doc.get("format") != "egap-instance/1":
        raise SolverError("shape", "not an instance file")
    blocks = []
    for bd in doc["blocks"]:
        Xd = bd["X"]
        X = P.FeasibleSet(Xd["kind"], np.asarray(Xd["lower"]) if "lower" in Xd else None,
                          np.asarray(Xd["upper"]) if "upper" in Xd else None)
        blocks.append(Block(_spec_from_dict(bd["f"]), X, np.asarray(bd["A"], dtype=float)))
    ref = None
    if "reference" in doc:
        r = doc["reference"]
        ref = Reference(np.asarray(r["x"]), np.asarray(r["y"]), float(r["f"]), r["provenance"])
    return ConstrainedProblem(tuple(blocks), np.asarray(doc["b"], dtype=float), doc["sense"], ref,
                              doc.get("meta", {}))

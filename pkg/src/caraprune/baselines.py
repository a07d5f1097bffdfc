"""Dense, non-streaming pruning baselines: Lawson-Hanson NNLS and an LP vertex.

Both keep the whole M x N Vandermonde matrix in memory.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import Infeasible, MaxIterationsExceeded, Unbounded, ValidationError
from .pruning import PruneDiagnostics, PruneResult, matrix_batches, prune_rows

__all__ = ["nnls_prune", "LpProblem", "lp_prune", "nnls_kkt_violation"]


def _validate(V, eta):
    V = np.ascontiguousarray(V, dtype=np.float64)
    eta = np.asarray(eta, dtype=np.float64).reshape(-1)
    if V.ndim != 2 or V.shape[1] != eta.shape[0]:
        raise ValidationError(f"shapes {V.shape} and {eta.shape} do not form a moment system")
    if not (np.all(np.isfinite(V)) and np.all(np.isfinite(eta))):
        raise ValidationError("non-finite input")
    return V, eta


def _result(v, method, iterations, diag=None) -> PruneResult:
    idx = np.flatnonzero(v > 0)
    return PruneResult(idx + 1, v[idx].copy(), int(iterations), method, diagnostics=diag or PruneDiagnostics())


# --- NNLS -----------------------------------------------------------------


def _ls(V, P, eta):
    # min || V[P].T s - eta || via QR of the passive columns
    A = V[P].T
    if len(P) <= A.shape[0]:
        Q, R = np.linalg.qr(A)
        return np.linalg.solve(R, Q.T @ eta) if np.all(np.abs(np.diag(R)) > 0) else np.linalg.lstsq(A, eta, rcond=None)[0]
    return np.linalg.lstsq(A, eta, rcond=None)[0]


def nnls_kkt_violation(V, eta, w, passive, tol) -> bool:
    """True when ``w`` fails the NNLS optimality certificate at tolerance ``tol``."""
    d = V @ (eta - V.T @ w)
    mask = np.zeros(len(w), dtype=bool)
    mask[list(passive)] = True
    return bool(np.any(w < 0) or np.any(np.abs(d[mask]) > tol) or np.any(d[~mask] > tol))


def nnls_prune(vandermonde, eta, tol: float | None = None, trace: list | None = None) -> PruneResult:
    """Lawson-Hanson active-set NNLS for ``min_{w >= 0} ||V^T w - eta||``.

    ``tol`` bounds the dual ``d = V (eta - V^T w)`` at termination; it
    defaults to ``1e-12 * max(d_0)``. Max-dual ties go to the smallest index,
    as do ties in the inner-loop removal ratio. ``trace``, when given,
    receives ``(|P|, objective)`` after every outer iteration.
    """
    V, eta = _validate(vandermonde, eta)
    M, N = V.shape
    w = np.zeros(M)
    d = V @ eta
    if tol is None:
        tol = 1e-12 * max(float(np.max(np.abs(d))) if M else 0.0, np.finfo(float).tiny)
    elif not tol > 0:
        raise ValidationError("tol must be positive")
    P: list[int] = []
    in_p = np.zeros(M, dtype=bool)
    outer = 0
    while M and np.max(np.where(in_p, -np.inf, d)) > tol:
        outer += 1
        if outer > 10 * M:
            raise MaxIterationsExceeded(f"NNLS exceeded {10 * M} outer iterations")
        m = int(np.argmax(np.where(in_p, -np.inf, d)))
        P.append(m)
        in_p[m] = True
        while True:
            P.sort()
            s = _ls(V, P, eta)
            thr = -1e-12 * float(np.max(np.abs(s)))
            Q = [q for q, sq in enumerate(s) if sq <= thr]
            if not Q:
                break
            ratios = [w[P[q]] / (w[P[q]] - s[q]) for q in Q]
            q_rem = Q[int(np.argmin(ratios))]
            alpha = ratios[int(np.argmin(ratios))]
            w[P] += alpha * (s - w[P])
            i_rem = P.pop(q_rem)
            in_p[i_rem] = False
            w[i_rem] = 0.0
            if not P:
                s = np.zeros(0)
                break
        w[:] = 0.0
        w[P] = s
        d = V @ (eta - V.T @ w)
        if trace is not None:
            trace.append((len(P), float(np.sum((V.T @ w - eta) ** 2))))
    return _result(np.maximum(w, 0.0), "nnls", outer)


# --- LP -------------------------------------------------------------------


@dataclass(frozen=True)
class LpProblem:
    """``min c^T v`` subject to ``V^T v = eta``, ``v >= 0``."""

    vandermonde: np.ndarray
    eta: np.ndarray
    cost: np.ndarray

    def __post_init__(self):
        V, eta = _validate(self.vandermonde, self.eta)
        c = np.asarray(self.cost, dtype=np.float64).reshape(-1)
        if c.shape[0] != V.shape[0]:
            raise ValidationError("cost needs one entry per node")
        if not np.all(np.isfinite(c)):
            raise ValidationError("non-finite cost")
        object.__setattr__(self, "vandermonde", V)
        object.__setattr__(self, "eta", eta)
        object.__setattr__(self, "cost", c)


class _Simplex:
    """Dense revised simplex on ``min c^T x, A x = b, x >= 0`` with ``A^T`` given row-wise.

    Dantzig pricing, switching to Bland's rule after a run of degenerate
    pivots; the explicit basis inverse is refactored periodically.
    """

    REFACTOR = 64
    DEGENERATE_RUN = 30

    def __init__(self, AT, b, c, basis, allowed=None):
        self.AT, self.b, self.c = AT, b, c
        self.basis = np.array(basis, dtype=np.int64)
        self.allowed = np.ones(AT.shape[0], dtype=bool) if allowed is None else allowed
        self.scale = max(1.0, float(np.max(np.abs(c))) if c.size else 1.0)
        self.iterations = 0
        self._refactor()

    def _refactor(self):
        self.Binv = np.linalg.inv(self.AT[self.basis].T)
        self.x = self.Binv @ self.b

    def run(self, max_iter):
        degenerate = 0
        is_basic = np.zeros(self.AT.shape[0], dtype=bool)
        is_basic[self.basis] = True
        while True:
            y = self.c[self.basis] @ self.Binv
            r = self.c - self.AT @ y
            r[is_basic | ~self.allowed] = 0.0
            cand = r < -1e-10 * self.scale
            if not cand.any():
                return
            if self.iterations >= max_iter:
                raise MaxIterationsExceeded(f"simplex exceeded {max_iter} iterations")
            j = int(np.argmax(cand)) if degenerate >= self.DEGENERATE_RUN else int(np.argmin(r))
            dcol = self.Binv @ self.AT[j]
            piv = dcol > 1e-11 * max(1.0, float(np.max(np.abs(dcol))))
            if not piv.any():
                raise Unbounded("objective is unbounded below")
            rows = np.flatnonzero(piv)
            theta = np.maximum(self.x[rows], 0.0) / dcol[rows]
            tmin = theta.min()
            ties = rows[theta <= tmin + 1e-13 * max(1.0, tmin)]
            leave = int(ties[np.argmin(self.basis[ties])])
            degenerate = degenerate + 1 if tmin <= 1e-14 else 0
            self._pivot(leave, j, dcol)
            is_basic[self.basis[leave]] = False
            is_basic[j] = True
            self.basis[leave] = j
            self.iterations += 1
            if self.iterations % self.REFACTOR == 0:
                self._refactor()

    def _pivot(self, r, j, dcol):
        p = dcol[r]
        theta = max(self.x[r], 0.0) / p
        self.x -= theta * dcol
        self.x[r] = theta
        row = self.Binv[r] / p
        self.Binv -= np.outer(dcol, row)
        self.Binv[r] = row


def _crossover_basis(V, w):
    # a vertex of the feasible set from the Caratheodory pruning of (V, w)
    res = prune_rows(matrix_batches(V, w), V.shape[1])
    return res.kept_rows


def lp_prune(
    problem: LpProblem,
    feasible_weights=None,
    warm_basis=None,
    return_basis: bool = False,
    max_iter: int | None = None,
):
    """Vertex of ``{v >= 0 : V^T v = eta}`` minimizing ``c^T v`` (dense revised simplex).

    The starting basis is, in order of preference: ``warm_basis`` if it is
    primal feasible, the support of a pruning of ``feasible_weights``, or an
    artificial phase-1 basis.
    """
    V, eta, c = problem.vandermonde, problem.eta, problem.cost
    M, N = V.shape
    if max_iter is None:
        max_iter = 50 * (M + N) + 1000
    norm_eta = max(float(np.linalg.norm(eta)), np.finfo(float).tiny)

    start = None
    for cand in (warm_basis, None if feasible_weights is None else "crossover"):
        if cand is None:
            continue
        if isinstance(cand, str):
            w = np.asarray(feasible_weights, dtype=np.float64)
            if w.shape != (M,) or np.any(w < 0):
                raise ValidationError("feasible_weights must be a nonnegative M-vector")
            pos = np.flatnonzero(w > 0)
            cand = pos[_crossover_basis(V[pos], w[pos])] if len(pos) > N else None
            if cand is None:
                continue
        cand = np.asarray(cand, dtype=np.int64)
        if cand.shape != (N,) or len(set(cand.tolist())) != N:
            continue
        B = V[cand].T
        if np.linalg.cond(B) > 1e12:
            continue
        xb = np.linalg.solve(B, eta)
        if np.all(xb >= -1e-12 * norm_eta):
            start = cand
            break

    phase1_iters = 0
    if start is None:
        sgn = np.where(eta < 0, -1.0, 1.0)
        AT = np.vstack([V * sgn, np.eye(N)])
        b = eta * sgn
        c1 = np.concatenate([np.zeros(M), np.ones(N)])
        sx = _Simplex(AT, b, c1, np.arange(M, M + N))
        sx.run(max_iter)
        phase1_iters = sx.iterations
        if c1[sx.basis] @ sx.x > 1e-9 * norm_eta:
            raise Infeasible("moment constraints admit no nonnegative solution")
        # pivot zero-level artificials out where a structural column can replace them
        for r in range(N):
            if sx.basis[r] < M:
                continue
            row = AT[:M] @ sx.Binv[r]
            row[sx.basis[sx.basis < M]] = 0.0
            j = int(np.argmax(np.abs(row)))
            if abs(row[j]) > 1e-9 * max(1.0, float(np.max(np.abs(row)))):
                sx._pivot(r, j, sx.Binv @ AT[j])
                sx.basis[r] = j
        sx._refactor()
        allowed = np.concatenate([np.ones(M, dtype=bool), np.zeros(N, dtype=bool)])
        sx2 = _Simplex(AT, b, np.concatenate([c, np.zeros(N)]), sx.basis, allowed)
    else:
        sx2 = _Simplex(V, eta, c, start)
    sx2.run(max_iter)
    # the answer depends on the final basis only, not on the pivot path
    sx2.x = np.linalg.solve(sx2.AT[sx2.basis].T, sx2.b)

    v = np.zeros(M)
    keep = sx2.basis < M
    v[sx2.basis[keep]] = np.maximum(sx2.x[keep], 0.0)
    res = _result(v, "lp", phase1_iters + sx2.iterations)
    res.moment_residual = float(np.linalg.norm(V.T @ v - eta) / norm_eta)
    if return_basis:
        return res, sx2.basis[keep].copy()
    return res

"""Caratheodory-Steinitz pruning: the single step, the dense loop, and the
streaming variants with either a from-scratch dense QR or a Givens-maintained
window QR for the cokernel vector.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Callable, Iterable, Iterator

import numba
import numpy as np

from .basis import BasisSpec, eval_rows
from .errors import RankCollapse, StreamTooShort, ValidationError, ZeroKernel
from .givens_qr import (
    DRIFT_CHECK_INTERVAL,
    DRIFT_TOLERANCE,
    RANK_TOLERANCE,
    _downdate,
    _givens_qr,
    _orthogonality_error,
    _remove,
    _update,
    downdate_update,
    full_qr,
    kernel_column,
)

__all__ = [
    "SigSelect",
    "SigSelectPolicy",
    "KernelBackend",
    "PruneStepOutcome",
    "PruneDiagnostics",
    "PruneResult",
    "prune_step",
    "csp",
    "scsp",
    "gscsp",
    "prune_rows",
    "matrix_batches",
]

ZERO_CLAMP = 1e-14


class SigSelect(enum.IntEnum):
    MIN_ABS_C = 0
    FORCE_PLUS = 1
    FORCE_MINUS = 2
    CUSTOM = 3


@dataclass(frozen=True)
class SigSelectPolicy:
    """Rule picking between the two admissible step sizes.

    A custom callback receives ``(weights, kernel, c_plus, c_minus)`` and
    returns ``+1`` or ``-1``. Whatever the policy, an empty S_- forces ``+``
    and an empty S_+ forces ``-``.
    """

    kind: SigSelect = SigSelect.MIN_ABS_C
    callback: Callable | None = None

    @classmethod
    def custom(cls, fn: Callable) -> "SigSelectPolicy":
        return cls(SigSelect.CUSTOM, fn)

    @classmethod
    def parse(cls, name: str) -> "SigSelectPolicy":
        table = {"minabs": SigSelect.MIN_ABS_C, "plus": SigSelect.FORCE_PLUS, "minus": SigSelect.FORCE_MINUS}
        try:
            return cls(table[name.lower()])
        except KeyError:
            raise ValidationError(f"unknown sigselect policy {name!r}") from None


MIN_ABS_C = SigSelectPolicy()


class KernelBackend(enum.Enum):
    DENSE_QR = "dense"
    GIVENS_WINDOW = "givens"


@dataclass
class PruneStepOutcome:
    pruned_local: int
    c: float
    sign: int
    updated_weights: np.ndarray
    extra_zeroed: frozenset = frozenset()
    c_plus: float = np.inf
    c_minus: float = -np.inf
    clamped_negative: int = 0

    @property
    def zeroed(self) -> list[int]:
        return sorted({self.pruned_local, *self.extra_zeroed})


@dataclass
class PruneDiagnostics:
    kernel_orthogonality_max: float = 0.0
    positivity_clamps: int = 0
    qr_refreshes: int = 0
    flops: int = 0
    first_iteration_flops: int = 0
    max_iteration_flops: int = 0
    rank_deficient_windows: int = 0


@dataclass
class PruneResult:
    """Surviving rule: global indices (1-based, ascending) and positive weights."""

    kept_global: np.ndarray
    kept_weights: np.ndarray
    iterations: int
    method: str = ""
    kept_nodes: np.ndarray | None = None
    moment_residual: float = float("nan")
    diagnostics: PruneDiagnostics = field(default_factory=PruneDiagnostics)

    @property
    def kept_rows(self) -> np.ndarray:
        """0-based row indices into the input matrix."""
        return self.kept_global - 1

    def __len__(self) -> int:
        return self.kept_global.shape[0]

    def dense_weights(self, length: int) -> np.ndarray:
        """Weights scattered onto the full input support (zeros elsewhere)."""
        out = np.zeros(length)
        out[self.kept_rows] = self.kept_weights
        return out


def _finish(global_idx, weights, iterations, method, nodes=None, diag=None) -> PruneResult:
    global_idx = np.asarray(global_idx, dtype=np.int64)
    weights = np.asarray(weights, dtype=np.float64)
    keep = weights > 0
    order = np.argsort(global_idx[keep], kind="stable")
    if nodes is not None and np.asarray(nodes).reshape(len(weights), -1).shape[1] == 0:
        nodes = None
    return PruneResult(
        kept_global=global_idx[keep][order],
        kept_weights=weights[keep][order],
        iterations=int(iterations),
        method=method,
        kept_nodes=None if nodes is None else np.asarray(nodes)[keep][order],
        diagnostics=diag or PruneDiagnostics(),
    )


# --- the pruning step -----------------------------------------------------


@numba.njit(cache=True, nogil=True)
def _ratios(w, n, m):
    cp = np.inf
    cm = -np.inf
    mp = -1
    mm = -1
    for i in range(m):
        ni = n[i]
        if ni > 0.0:
            r = w[i] / ni
            if r < cp:
                cp = r
                mp = i
        elif ni < 0.0:
            r = w[i] / ni
            if r > cm:
                cm = r
                mm = i
    return cp, mp, cm, mm


@numba.njit(cache=True, nogil=True)
def _apply_step(w, n, m, pos, c, out):
    """w <- w - c n, exact zero at ``pos``, clamp near-zeros; zeroed positions go to ``out``."""
    wmax = 0.0
    for i in range(m):
        w[i] -= c * n[i]
    w[pos] = 0.0
    for i in range(m):
        if w[i] > wmax:
            wmax = w[i]
    eps = ZERO_CLAMP * wmax
    cnt = 0
    clamps = 0
    for i in range(m):
        if i == pos:
            out[cnt] = i
            cnt += 1
        elif w[i] <= eps:
            if w[i] < -eps:
                clamps += 1
            w[i] = 0.0
            out[cnt] = i
            cnt += 1
    return cnt, clamps


@numba.njit(cache=True, nogil=True)
def _choose(cp, mp, cm, mm, policy):
    # returns (position, c, sign); position -1 means zero kernel
    if mp < 0 and mm < 0:
        return -1, 0.0, 0
    if mm < 0:
        return mp, cp, 1
    if mp < 0:
        return mm, cm, -1
    if policy == 1:
        return mp, cp, 1
    if policy == 2:
        return mm, cm, -1
    if cp <= -cm:
        return mp, cp, 1
    return mm, cm, -1


def prune_step(weights, kernel, policy: SigSelectPolicy = MIN_ABS_C) -> PruneStepOutcome:
    """One pruning move ``w <- w - c_sigma n`` that zeroes at least one weight.

    Ratio ties resolve to the smallest local index and ``|c_+| == |c_-|``
    resolves to ``+``. Other entries within ``1e-14 * max(w)`` of zero are
    clamped to zero and reported in ``extra_zeroed``.
    """
    w = np.array(weights, dtype=np.float64)
    n = np.ascontiguousarray(kernel, dtype=np.float64)
    m = w.shape[0]
    if n.shape != (m,):
        raise ValidationError("kernel and weights must have the same length")
    if not np.all(np.isfinite(n)):
        raise RankCollapse("kernel vector is not finite")
    cp, mp, cm, mm = _ratios(w, n, m)
    if mp < 0 and mm < 0:
        raise ZeroKernel("kernel vector is zero")
    if policy.kind is SigSelect.CUSTOM and mp >= 0 and mm >= 0:
        sign = 1 if policy.callback(w.copy(), n.copy(), cp, cm) > 0 else -1
        pos, c = (mp, cp) if sign > 0 else (mm, cm)
    else:
        code = int(policy.kind) if policy.kind is not SigSelect.CUSTOM else 0
        pos, c, sign = _choose(cp, mp, cm, mm, code)
    out = np.empty(m, dtype=np.int64)
    cnt, clamps = _apply_step(w, n, m, pos, c, out)
    extra = frozenset(int(i) for i in out[:cnt] if i != pos)
    return PruneStepOutcome(int(pos), float(c), int(sign), w, extra, float(cp), float(cm), int(clamps))


# --- dense CSP ------------------------------------------------------------


def _last_cokernel_column(A: np.ndarray) -> np.ndarray:
    """Last column of the complete Householder Q of A (s x n, s > n), in O(s n^2)."""
    s, n = A.shape
    h, tau = np.linalg.qr(A, mode="raw")
    e = np.zeros(s)
    e[-1] = 1.0
    for i in range(min(n, s) - 1, -1, -1):
        v = np.empty(s - i)
        v[0] = 1.0
        v[1:] = h[i, i + 1 :]
        e[i:] -= tau[i] * v * (v @ e[i:])
    return e


def _null_vector(A: np.ndarray) -> np.ndarray | None:
    # cokernel vector of a square-or-short matrix, or None when it has full row rank
    u, sv, _ = np.linalg.svd(A, full_matrices=True)
    tol = max(A.shape) * np.finfo(float).eps * (sv[0] if sv.size else 0.0)
    rank = int(np.sum(sv > tol))
    if rank >= A.shape[0]:
        return None
    return u[:, -1]


def csp(vandermonde, weights, policy: SigSelectPolicy = MIN_ABS_C, continue_below_n: bool = False) -> PruneResult:
    """Dense Caratheodory-Steinitz pruning of an M x N system.

    Each iteration takes the last column of a complete QR of all surviving
    rows as the cokernel vector, so the per-iteration cost is O(|S| N^2).
    """
    V = np.asarray(vandermonde, dtype=np.float64)
    w = np.array(weights, dtype=np.float64)
    M, N = V.shape
    if w.shape != (M,):
        raise ValidationError("weights must have one entry per row")
    if np.any(w <= 0):
        raise ValidationError("csp needs strictly positive weights")
    S = np.arange(M)
    diag = PruneDiagnostics()
    iterations = 0
    while True:
        A = V[S]
        if len(S) > N:
            n = _last_cokernel_column(A)
        elif continue_below_n and len(S) > 1:
            n = _null_vector(A)
            if n is None:
                break
        else:
            break
        if not np.all(np.isfinite(n)):
            raise RankCollapse("non-finite cokernel vector")
        norm = np.linalg.norm(A)
        if norm > 0:
            diag.kernel_orthogonality_max = max(
                diag.kernel_orthogonality_max, float(np.linalg.norm(A.T @ n) / norm)
            )
        out = prune_step(w[S], n, policy)
        diag.positivity_clamps += out.clamped_negative
        w[S] = out.updated_weights
        S = S[w[S] > 0]
        iterations += 1
    return _finish(S + 1, w[S], iterations, "csp", diag=diag)


# --- streaming ------------------------------------------------------------


def matrix_batches(rows, weights, batch_size: int = 4096, coords=None):
    """Yield ``(rows, weights, global_index, coords)`` chunks of an in-memory system."""
    rows = np.asarray(rows, dtype=np.float64)
    weights = np.asarray(weights, dtype=np.float64)
    if coords is None:
        coords = np.zeros((rows.shape[0], 0))
    for lo in range(0, rows.shape[0], batch_size):
        hi = min(lo + batch_size, rows.shape[0])
        yield rows[lo:hi], weights[lo:hi], np.arange(lo + 1, hi + 1, dtype=np.int64), coords[lo:hi]


def _basis_batches(source, basis: BasisSpec, batch_size: int):
    for b in source.batches(batch_size):
        if b.coords.shape[1] != basis.dim:
            from .errors import DimensionMismatch

            raise DimensionMismatch(
                f"source has dimension {b.coords.shape[1]}, basis expects {basis.dim}"
            )
        yield eval_rows(basis, b.coords), b.weights, b.index, b.coords


def _items(batches) -> Iterator[tuple]:
    for rows, w, g, x in batches:
        for i in range(len(w)):
            yield rows[i], float(w[i]), int(g[i]), x[i]


def _check_weights(w):
    if not np.all(np.isfinite(w)) or np.any(w <= 0):
        raise ValidationError("stream weights must be finite and positive")


def _scsp_reference(batches, n_cols: int, k: int, policy: SigSelectPolicy, backend: KernelBackend, which):
    """Plain-Python streaming loop; handles both backends and custom policies."""
    items = _items(batches)
    rows, W, G, X = [], [], [], []
    for _ in range(n_cols + k):
        it = next(items, None)
        if it is None:
            break
        rows.append(it[0]); W.append(it[1]); G.append(it[2]); X.append(it[3])
    if len(rows) <= n_cols:
        raise StreamTooShort(f"stream has {len(rows)} nodes, need more than N={n_cols}")
    W = np.array(W)
    _check_weights(W)
    X = list(X)
    diag = PruneDiagnostics()
    state = None
    dense_rows = None
    if backend is KernelBackend.GIVENS_WINDOW:
        state = full_qr(np.array(rows), window=np.array(G))
        pending_flops = state.flops
    else:
        dense_rows = np.array(rows)
        window = np.array(G, dtype=np.int64)
        pending_flops = 0

    iterations = 0
    while True:
        m = len(W)
        if m <= n_cols:
            break
        if state is not None:
            kk = m - n_cols
            col = min(which if which is not None else k, kk)
            kern = kernel_column(state, col)
            A = state.rows
            if state.rank_deficient:
                diag.rank_deficient_windows += 1
        else:
            A = dense_rows
            Q, _ = np.linalg.qr(A, mode="complete")
            kern = Q[:, -1]
        if not np.all(np.isfinite(kern)):
            raise RankCollapse("non-finite cokernel vector")
        norm = np.linalg.norm(A)
        if norm > 0:
            diag.kernel_orthogonality_max = max(diag.kernel_orthogonality_max, float(np.linalg.norm(A.T @ kern) / norm))
        out = prune_step(W, kern, policy)
        diag.positivity_clamps += out.clamped_negative
        W = out.updated_weights
        iterations += 1
        pending_flops += 4 * m
        if iterations == 1:
            diag.first_iteration_flops = pending_flops
        else:
            diag.max_iteration_flops = max(diag.max_iteration_flops, pending_flops)
        diag.flops += pending_flops
        pending_flops = 0

        drop = []
        for pos in out.zeroed:
            it = next(items, None)
            if it is None:
                drop.append(pos)
                continue
            if not (np.isfinite(it[1]) and it[1] > 0):
                raise ValidationError("stream weights must be finite and positive")
            if state is not None:
                downdate_update(state, state.window[pos], it[0], it[2])
                pending_flops += state.last_flops
            else:
                dense_rows[pos] = it[0]
                window[pos] = it[2]
            W[pos] = it[1]
            X[pos] = it[3]
        for pos in sorted(drop, reverse=True):
            if state is not None:
                downdate_update(state, state.window[pos])
                pending_flops += state.last_flops
            else:
                dense_rows = np.delete(dense_rows, pos, axis=0)
                window = np.delete(window, pos)
            W = np.delete(W, pos)
            del X[pos]

    diag.flops += pending_flops
    if state is not None:
        diag.qr_refreshes = state.refreshes
        window = state.window
    return _finish(window, W, iterations, "gscsp" if state is not None else "scsp", np.array(X), diag)


# st slots for the compiled engine
_M, _NPEND, _ITER, _UPD, _REFRESH, _CLAMPS, _RANKDEF, _FLOPS, _CUR, _FIRST, _MAXLATER, _STATUS = range(12)


@numba.njit(cache=True, nogil=True)
def _engine_prune(Qt, R, A, W, st, fst, pend, scratch, n, col, policy):
    m = st[_M]
    kc = n + col - 1
    if kc > m - 1:
        kc = m - 1
    kern = Qt[kc]
    normA = 0.0
    for i in range(m):
        for t in range(n):
            normA += A[i, t] * A[i, t]
        if not np.isfinite(kern[i]):
            st[_STATUS] = 2
            return
    if normA > 0.0:
        acc = 0.0
        for t in range(n):
            d = 0.0
            for i in range(m):
                d += A[i, t] * kern[i]
            acc += d * d
        r = np.sqrt(acc / normA)
        if r > fst[0]:
            fst[0] = r
    if abs(R[n - 1, n - 1]) <= RANK_TOLERANCE * np.sqrt(normA):
        st[_RANKDEF] += 1
    cp, mp, cm, mm = _ratios(W, kern, m)
    pos, c, sign = _choose(cp, mp, cm, mm, policy)
    if pos < 0:
        st[_STATUS] = 1
        return
    cnt, clamps = _apply_step(W, kern, m, pos, c, scratch)
    st[_CLAMPS] += clamps
    st[_ITER] += 1
    st[_CUR] += 4 * m
    if st[_ITER] == 1:
        st[_FIRST] = st[_CUR]
    elif st[_CUR] > st[_MAXLATER]:
        st[_MAXLATER] = st[_CUR]
    st[_FLOPS] += st[_CUR]
    st[_CUR] = 0
    # stack so that pops come out in ascending position order
    for i in range(cnt):
        pend[i] = scratch[cnt - 1 - i]
    st[_NPEND] = cnt


@numba.njit(cache=True, nogil=True)
def _engine_drift(Qt, R, A, st, m, n):
    st[_UPD] += 1
    if st[_UPD] % DRIFT_CHECK_INTERVAL == 0:
        if _orthogonality_error(Qt, m) > DRIFT_TOLERANCE:
            st[_CUR] += _givens_qr(A, Qt, R, m, n)
            st[_REFRESH] += 1


@numba.njit(cache=True, nogil=True)
def _engine_consume(Qt, R, A, X, W, G, st, fst, pend, scratch, rows, bw, bg, bx, n, col, policy):
    """Run the streaming loop over one batch; returns once the batch is used up."""
    b = 0
    nb = bw.shape[0]
    d = X.shape[1]
    while True:
        while st[_NPEND] > 0:
            if b >= nb:
                return
            if not (bw[b] > 0.0 and np.isfinite(bw[b])):
                st[_STATUS] = 3
                return
            pos = pend[st[_NPEND] - 1]
            st[_NPEND] -= 1
            m = st[_M]
            st[_CUR] += _downdate(Qt, R, pos, m, n)
            st[_CUR] += _update(Qt, R, pos, m, n, rows[b])
            for t in range(n):
                A[pos, t] = rows[b, t]
            for t in range(d):
                X[pos, t] = bx[b, t]
            W[pos] = bw[b]
            G[pos] = bg[b]
            b += 1
            _engine_drift(Qt, R, A, st, m, n)
        _engine_prune(Qt, R, A, W, st, fst, pend, scratch, n, col, policy)
        if st[_STATUS] != 0:
            return


@numba.njit(cache=True, nogil=True)
def _engine_drop(Qt, R, A, X, W, G, st, pos, n):
    m = st[_M]
    st[_CUR] += _downdate(Qt, R, pos, m, n)
    _remove(Qt, R, pos, m, n)
    for i in range(pos, m - 1):
        for t in range(n):
            A[i, t] = A[i + 1, t]
        for t in range(X.shape[1]):
            X[i, t] = X[i + 1, t]
        W[i] = W[i + 1]
        G[i] = G[i + 1]
    st[_M] = m - 1
    _engine_drift(Qt, R, A, st, m - 1, n)


@numba.njit(cache=True, nogil=True)
def _engine_drain(Qt, R, A, X, W, G, st, fst, pend, scratch, n, col, policy):
    while True:
        # pending positions are stacked descending from the bottom
        for i in range(st[_NPEND]):
            _engine_drop(Qt, R, A, X, W, G, st, pend[i], n)
        st[_NPEND] = 0
        if st[_M] <= n:
            return
        _engine_prune(Qt, R, A, W, st, fst, pend, scratch, n, col, policy)
        if st[_STATUS] != 0:
            return


class _GivensEngine:
    """Compiled GSCSP state machine fed with ordered batches of rows."""

    def __init__(self, n_cols: int, k: int, dim: int, policy: SigSelect, which: int | None):
        if k < 1:
            raise ValidationError("k must be >= 1")
        cap = n_cols + k
        self.n, self.k, self.cap = n_cols, k, cap
        self.col = which if which is not None else k
        if not 1 <= self.col <= k:
            raise ValidationError(f"which must lie in [1, {k}]")
        self.policy = int(policy)
        self.Qt = np.zeros((cap, cap))
        self.R = np.zeros((cap, n_cols))
        self.A = np.zeros((cap, n_cols))
        self.X = np.zeros((cap, dim))
        self.W = np.zeros(cap)
        self.G = np.zeros(cap, dtype=np.int64)
        self.st = np.zeros(12, dtype=np.int64)
        self.fst = np.zeros(1)
        self.pend = np.zeros(cap, dtype=np.int64)
        self.scratch = np.zeros(cap, dtype=np.int64)
        self.filled = 0
        self.started = False

    def _start(self):
        m = self.filled
        self.st[_M] = m
        self.st[_CUR] = _givens_qr(self.A, self.Qt, self.R, m, self.n)
        self.started = True

    def _raise_status(self):
        code = self.st[_STATUS]
        if code == 1:
            raise ZeroKernel("kernel vector is zero")
        if code == 2:
            raise RankCollapse("non-finite cokernel vector")
        if code == 3:
            raise ValidationError("stream weights must be finite and positive")

    def feed(self, rows, w, g, x):
        rows = np.ascontiguousarray(rows, dtype=np.float64)
        w = np.ascontiguousarray(w, dtype=np.float64)
        g = np.ascontiguousarray(g, dtype=np.int64)
        x = np.ascontiguousarray(x, dtype=np.float64).reshape(len(w), -1)
        if rows.shape[1:] != (self.n,):
            raise ValidationError(f"rows must have {self.n} columns")
        if not np.all(np.isfinite(rows)):
            raise RankCollapse("non-finite Vandermonde rows")
        if not self.started:
            take = min(self.cap - self.filled, len(w))
            _check_weights(w[:take])
            sl = slice(self.filled, self.filled + take)
            self.A[sl] = rows[:take]
            self.W[sl] = w[:take]
            self.G[sl] = g[:take]
            self.X[sl] = x[:take]
            self.filled += take
            rows, w, g, x = rows[take:], w[take:], g[take:], x[take:]
            if self.filled < self.cap:
                return
            self._start()
            # the first prune happens once the window is complete
            _engine_consume(self.Qt, self.R, self.A, self.X, self.W, self.G, self.st, self.fst,
                            self.pend, self.scratch, rows[:0], w[:0], g[:0], x[:0], self.n, self.col, self.policy)
            self._raise_status()
        if len(w):
            _engine_consume(self.Qt, self.R, self.A, self.X, self.W, self.G, self.st, self.fst,
                            self.pend, self.scratch, rows, w, g, x, self.n, self.col, self.policy)
            self._raise_status()

    def finish(self) -> PruneResult:
        if not self.started:
            if self.filled <= self.n:
                raise StreamTooShort(f"stream has {self.filled} nodes, need more than N={self.n}")
            self._start()
            self.st[_NPEND] = 0
        _engine_drain(self.Qt, self.R, self.A, self.X, self.W, self.G, self.st, self.fst,
                      self.pend, self.scratch, self.n, self.col, self.policy)
        self._raise_status()
        m = int(self.st[_M])
        diag = PruneDiagnostics(
            kernel_orthogonality_max=float(self.fst[0]),
            positivity_clamps=int(self.st[_CLAMPS]),
            qr_refreshes=int(self.st[_REFRESH]),
            flops=int(self.st[_FLOPS] + self.st[_CUR]),
            first_iteration_flops=int(self.st[_FIRST]),
            max_iteration_flops=int(self.st[_MAXLATER]),
            rank_deficient_windows=int(self.st[_RANKDEF]),
        )
        return _finish(self.G[:m], self.W[:m], self.st[_ITER], "gscsp", self.X[:m].copy(), diag)


def prune_rows(
    batches: Iterable,
    n_cols: int,
    k: int = 1,
    policy: SigSelectPolicy = MIN_ABS_C,
    kernel_backend: KernelBackend = KernelBackend.GIVENS_WINDOW,
    which: int | None = None,
    dim: int = 0,
) -> PruneResult:
    """Streaming pruning over ``(rows, weights, global_index, coords)`` batches.

    The Givens backend with a built-in policy runs in the compiled engine;
    a custom policy or the dense backend uses the plain-Python loop.
    """
    kernel_backend = KernelBackend(kernel_backend)
    if k < 1:
        raise ValidationError("k must be >= 1")
    if kernel_backend is KernelBackend.GIVENS_WINDOW and policy.kind is not SigSelect.CUSTOM:
        engine = None
        for rows, w, g, x in batches:
            if engine is None:
                x = np.asarray(x)
                engine = _GivensEngine(n_cols, k, x.shape[1] if x.ndim == 2 else dim, policy.kind, which)
            engine.feed(rows, w, g, x)
        if engine is None:
            raise StreamTooShort("empty stream")
        return engine.finish()
    return _scsp_reference(batches, n_cols, k, policy, kernel_backend, which)


def scsp(
    stream,
    basis: BasisSpec,
    k: int = 1,
    policy: SigSelectPolicy = MIN_ABS_C,
    kernel_backend: KernelBackend = KernelBackend.DENSE_QR,
    batch_size: int = 4096,
    which: int | None = None,
) -> PruneResult:
    """Streaming Caratheodory-Steinitz pruning of a node source.

    Keeps an ``(N + k)``-row window; every iteration zeroes at least one
    window weight and refills the freed slots, in order, from the stream.
    """
    result = prune_rows(_basis_batches(stream, basis, batch_size), basis.size, k, policy, kernel_backend, which)
    if kernel_backend is KernelBackend.DENSE_QR:
        result.method = "scsp"
    return result


def gscsp(stream, basis: BasisSpec, k: int = 1, policy: SigSelectPolicy = MIN_ABS_C, batch_size: int = 4096) -> PruneResult:
    """Streaming pruning with the Givens-updated window QR (O(N^2) per iteration)."""
    return scsp(stream, basis, k, policy, KernelBackend.GIVENS_WINDOW, batch_size)

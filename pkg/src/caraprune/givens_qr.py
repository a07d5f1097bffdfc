"""Full QR of a short, wide-in-rows window with Givens row downdates/updates.

The window holds ``m = N + k`` rows of an ``N``-column Vandermonde matrix.
``Q`` is ``m x m`` orthogonal and ``R`` is ``m x N`` upper triangular; the
trailing ``k`` columns of ``Q`` span the cokernel of the window.

Internally ``Q`` is stored transposed (``Qt[i]`` is column ``i`` of ``Q``) so
that the column rotations at the heart of every update touch contiguous
memory. Replacing one row costs O(m * N) arithmetic.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numba
import numpy as np

from .errors import IndexNotInWindow, NonFiniteInput, ValidationError

__all__ = [
    "GivensCoeffs",
    "QrWindow",
    "givens",
    "full_qr",
    "downdate_update",
    "kernel_column",
    "DRIFT_CHECK_INTERVAL",
    "DRIFT_TOLERANCE",
]

DRIFT_CHECK_INTERVAL = 4096
DRIFT_TOLERANCE = 1e-9
RANK_TOLERANCE = 1e-12


class GivensCoeffs(NamedTuple):
    c: float
    s: float


# --- numba kernels --------------------------------------------------------


@numba.njit(cache=True, nogil=True, inline="always")
def _givens(a, b):
    # [c s; -s c] @ [a, b] == [r, 0] with r = hypot(a, b) >= 0
    r = np.hypot(a, b)
    if r == 0.0:
        return 1.0, 0.0, 0.0
    return a / r, b / r, r


@numba.njit(cache=True, nogil=True, inline="always")
def _rotate(A, p, q, c, s, lo, hi):
    for t in range(lo, hi):
        x = A[p, t]
        y = A[q, t]
        A[p, t] = c * x + s * y
        A[q, t] = c * y - s * x


@numba.njit(cache=True, nogil=True)
def _downdate(Qt, R, j, m, n):
    """Rotate so row ``j`` of Q becomes e_j; R's row j then holds the removed row.

    Returns the flop count.
    """
    flops = 0
    for i in range(m - 1, j, -1):
        c, s, r = _givens(Qt[i - 1, j], Qt[i, j])
        _rotate(Qt, i - 1, i, c, s, 0, m)
        Qt[i - 1, j] = r
        Qt[i, j] = 0.0
        flops += 6 * m
        if i - 1 < n:
            _rotate(R, i - 1, i, c, s, i - 1, n)
            flops += 6 * (n - i + 1)
    for i in range(j - 1, -1, -1):
        c, s, r = _givens(Qt[j, j], Qt[i, j])
        _rotate(Qt, j, i, c, s, 0, m)
        Qt[j, j] = r
        Qt[i, j] = 0.0
        flops += 6 * m
        if i < n:
            _rotate(R, j, i, c, s, i, n)
            flops += 6 * (n - i)
    return flops


@numba.njit(cache=True, nogil=True)
def _update(Qt, R, j, m, n, row):
    """Insert ``row`` at position j of a window whose row j of Q is e_j."""
    for t in range(m):
        Qt[j, t] = 0.0
        Qt[t, j] = 0.0
    Qt[j, j] = 1.0
    for t in range(n):
        R[j, t] = row[t]
    flops = 0
    for i in range(min(n, j)):
        c, s, r = _givens(R[i, i], R[j, i])
        _rotate(R, i, j, c, s, i + 1, n)
        R[i, i] = r
        R[j, i] = 0.0
        _rotate(Qt, i, j, c, s, 0, m)
        flops += 6 * (n - i) + 6 * m
    for i in range(j, n):
        c, s, r = _givens(R[i, i], R[i + 1, i])
        _rotate(R, i, i + 1, c, s, i + 1, n)
        R[i, i] = r
        R[i + 1, i] = 0.0
        _rotate(Qt, i, i + 1, c, s, 0, m)
        flops += 6 * (n - i) + 6 * m
    return flops


@numba.njit(cache=True, nogil=True)
def _remove(Qt, R, j, m, n):
    """Drop row/column j of Q and row j of R after a downdate (in-buffer shift)."""
    for t in range(j, m - 1):
        for u in range(m):
            Qt[t, u] = Qt[t + 1, u]
        for u in range(n):
            R[t, u] = R[t + 1, u]
    for t in range(m - 1):
        for u in range(j, m - 1):
            Qt[t, u] = Qt[t, u + 1]
    return m * m + m * n


@numba.njit(cache=True, nogil=True)
def _givens_qr(A, Qt, R, m, n):
    """Complete QR of A[:m, :n] by Givens rotations; fills Qt[:m, :m], R[:m, :n]."""
    for i in range(m):
        for u in range(m):
            Qt[i, u] = 0.0
        Qt[i, i] = 1.0
        for u in range(n):
            R[i, u] = A[i, u]
    flops = 0
    for i in range(n):
        for t in range(m - 1, i, -1):
            b = R[t, i]
            if b == 0.0:
                continue
            c, s, r = _givens(R[t - 1, i], b)
            _rotate(R, t - 1, t, c, s, i + 1, n)
            R[t - 1, i] = r
            R[t, i] = 0.0
            _rotate(Qt, t - 1, t, c, s, 0, m)
            flops += 6 * (n - i) + 6 * m
        if i < m and R[i, i] < 0.0:
            for u in range(i, n):
                R[i, u] = -R[i, u]
            for u in range(m):
                Qt[i, u] = -Qt[i, u]
    return flops


@numba.njit(cache=True, nogil=True)
def _orthogonality_error(Qt, m):
    acc = 0.0
    for a in range(m):
        for b in range(a, m):
            d = 0.0
            for t in range(m):
                d += Qt[a, t] * Qt[b, t]
            if a == b:
                d -= 1.0
                acc += d * d
            else:
                acc += 2.0 * d * d
    return np.sqrt(acc)


# --- public API -----------------------------------------------------------


def givens(a: float, b: float) -> GivensCoeffs:
    """Rotation ``[[c, s], [-s, c]]`` mapping ``(a, b)`` to ``(hypot(a, b), 0)``.

    ``(0, 0)`` gives the identity rotation.
    """
    c, s, _ = _givens(float(a), float(b))
    return GivensCoeffs(c, s)


@dataclass
class QrWindow:
    """Mutable QR state of the active window (single owner).

    Attributes
    ----------
    Qt : ndarray, shape (m, m)
        Transpose of the orthogonal factor.
    R : ndarray, shape (m, N)
    rows : ndarray, shape (m, N)
        The window's Vandermonde rows, kept for drift refreshes and checks.
    window : ndarray of int64, shape (m,)
        Global indices of the rows, in window order.
    """

    Qt: np.ndarray
    R: np.ndarray
    rows: np.ndarray
    window: np.ndarray
    flops: int = 0
    updates: int = 0
    refreshes: int = 0
    rank_deficient: bool = False
    last_flops: int = field(default=0, repr=False)

    @property
    def Q(self) -> np.ndarray:
        return self.Qt.T

    @property
    def n_cols(self) -> int:
        return self.R.shape[1]

    @property
    def k_extra(self) -> int:
        return self.R.shape[0] - self.R.shape[1]

    def orthogonality_error(self) -> float:
        return float(_orthogonality_error(self.Qt, self.Qt.shape[0]))

    def residual(self) -> float:
        """Relative factorization residual ``||QR - rows||_F / ||rows||_F``."""
        norm = np.linalg.norm(self.rows)
        err = np.linalg.norm(self.Q @ self.R - self.rows)
        return float(err / norm) if norm > 0 else float(err)

    def _check_rank(self) -> None:
        n = self.n_cols
        self.rank_deficient = bool(
            abs(self.R[n - 1, n - 1]) <= RANK_TOLERANCE * np.linalg.norm(self.R)
        )


def full_qr(rows, window=None) -> QrWindow:
    """Complete QR factorization of an ``(N + k) x N`` block of rows.

    Costs O((N + k) N^2); used once when a window is first filled and when
    the drift guard asks for a refresh. ``window`` defaults to ``1..N+k``.
    """
    A = np.array(rows, dtype=np.float64, order="C")
    if A.ndim != 2:
        raise ValidationError("rows must be a 2-D array")
    m, n = A.shape
    if not m > n >= 1:
        raise ValidationError(f"need more rows than columns, got {m} x {n}")
    if not np.all(np.isfinite(A)):
        raise NonFiniteInput("rows contain non-finite values")
    if window is None:
        window = np.arange(1, m + 1, dtype=np.int64)
    window = np.array(window, dtype=np.int64)
    if window.shape != (m,):
        raise ValidationError("window must list one global index per row")
    Qt = np.empty((m, m))
    R = np.empty((m, n))
    flops = _givens_qr(A, Qt, R, m, n)
    state = QrWindow(Qt, R, A, window, flops=int(flops), last_flops=int(flops))
    state._check_rank()
    return state


def _refresh(state: QrWindow) -> None:
    m, n = state.rows.shape
    state.last_flops += int(_givens_qr(state.rows, state.Qt, state.R, m, n))
    state.refreshes += 1


def downdate_update(state: QrWindow, remove_global: int, new_row=None, new_global: int | None = None) -> QrWindow:
    """Replace the row for ``remove_global`` by ``new_row`` (global ``new_global``).

    The new row takes the removed row's position in the window. With
    ``new_row=None`` the row is only removed and the window shrinks by one.
    Mutates and returns ``state``.
    """
    hits = np.flatnonzero(state.window == remove_global)
    if hits.size == 0:
        raise IndexNotInWindow(f"global index {remove_global} is not in the window")
    j = int(hits[0])
    m, n = state.rows.shape
    state.last_flops = 0

    if new_row is None:
        if m - 1 < n:
            raise ValidationError("cannot shrink the window below N rows")
        state.last_flops += int(_downdate(state.Qt, state.R, j, m, n))
        keep = np.arange(m) != j
        state.Qt = np.ascontiguousarray(state.Qt[np.ix_(keep, keep)])
        state.R = np.ascontiguousarray(state.R[keep])
        state.rows = np.ascontiguousarray(state.rows[keep])
        state.window = state.window[keep]
    else:
        row = np.asarray(new_row, dtype=np.float64).reshape(-1)
        if row.shape[0] != n:
            raise ValidationError(f"new row has length {row.shape[0]}, expected {n}")
        if not np.all(np.isfinite(row)):
            raise NonFiniteInput("new row contains non-finite values")
        if new_global is None:
            raise ValidationError("new_global is required with new_row")
        state.last_flops += int(_downdate(state.Qt, state.R, j, m, n))
        state.last_flops += int(_update(state.Qt, state.R, j, m, n, row))
        state.rows[j] = row
        state.window[j] = new_global

    state.updates += 1
    if state.updates % DRIFT_CHECK_INTERVAL == 0 and state.orthogonality_error() > DRIFT_TOLERANCE:
        _refresh(state)
    state.flops += state.last_flops
    state._check_rank()
    return state


def kernel_column(state: QrWindow, which: int | None = None) -> np.ndarray:
    """Unit cokernel vector of the window: column ``N + which`` of Q (1-based).

    ``which`` ranges over ``1..k`` and defaults to ``k``, the last column.
    """
    m, n = state.rows.shape
    k = m - n
    if k < 1:
        raise ValidationError("window has no cokernel (m <= N)")
    if which is None:
        which = k
    if not 1 <= which <= k:
        raise ValidationError(f"which must lie in [1, {k}]")
    return state.Qt[n + which - 1].copy()

"""Tensor-product function spaces and their Vandermonde rows.

A basis is a multi-index set together with a univariate family; the basis
function for multi-index ``alpha`` is ``prod_j f_{alpha_j}(x_j)``. Columns are
in graded-lexicographic order of the multi-indices.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable

import numba
import numpy as np

from .errors import EvaluationDomain, ValidationError

__all__ = [
    "Family",
    "IndexKind",
    "MultiIndexSet",
    "BasisSpec",
    "multi_index_set",
    "eval_row",
    "eval_rows",
    "stream_moments",
    "parse_basis",
    "BESSEL_MAX_ARG",
]

MAX_INDEX_SET_SIZE = 1_000_000
BESSEL_MAX_ARG = 12.0
_BESSEL_TERMS = 48


class IndexKind(enum.Enum):
    HC = "HC"
    TD = "TD"
    PNORM = "PNORM"


class Family(enum.Enum):
    MONOMIAL = "monomial"
    LEGENDRE = "legendre"
    CHEBYSHEV = "chebyshev"
    HERMITE = "hermite"
    BESSELJ = "besselj"
    CALLBACK = "callback"


@dataclass(frozen=True)
class MultiIndexSet:
    dim: int
    indices: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        if len(set(self.indices)) != len(self.indices):
            raise ValidationError("duplicate multi-indices")
        if any(len(a) != self.dim for a in self.indices):
            raise ValidationError("multi-index length does not match dim")

    def __len__(self) -> int:
        return len(self.indices)

    def __iter__(self):
        return iter(self.indices)

    def as_array(self) -> np.ndarray:
        return np.array(self.indices, dtype=np.int64).reshape(len(self.indices), self.dim)

    @classmethod
    def from_indices(cls, indices: Iterable[Iterable[int]], dim: int | None = None) -> "MultiIndexSet":
        idx = [tuple(int(v) for v in a) for a in indices]
        if dim is None:
            if not idx:
                raise ValidationError("cannot infer dim from an empty index list")
            dim = len(idx[0])
        return cls(dim, tuple(sorted(idx, key=_grlex_key)))


def _grlex_key(alpha: tuple[int, ...]):
    return (sum(alpha), alpha)


def multi_index_set(kind, r: float, d: int, p: float | None = None) -> MultiIndexSet:
    """Hyperbolic-cross, total-degree or p-norm multi-index sets.

    ``HC``: prod(alpha_j + 1) <= r + 1. ``PNORM``: ||alpha||_p <= r.
    ``TD``: ``PNORM`` with p = 1.
    """
    kind = IndexKind(kind.upper()) if isinstance(kind, str) else IndexKind(kind)
    if d < 1:
        raise ValidationError("d must be >= 1")
    if r < 0:
        raise ValidationError("r must be >= 0")
    if kind is IndexKind.PNORM and (p is None or p <= 0):
        raise ValidationError("PNORM needs p > 0")

    if kind is IndexKind.HC:
        bound = r + 1.0

        def admissible(prefix):
            return math.prod(a + 1 for a in prefix) <= bound
    elif kind is IndexKind.TD:

        def admissible(prefix):
            return sum(prefix) <= r
    else:
        rp = r**p
        tol = 1e-12 * max(rp, 1.0)

        def admissible(prefix):
            return sum(a**p for a in prefix) <= rp + tol

    # every admissible set here is downward closed, so prune on prefixes
    out: list[tuple[int, ...]] = []
    top = int(math.floor(r + 1e-12))

    def extend(prefix):
        if len(out) > MAX_INDEX_SET_SIZE:
            raise ValidationError(f"multi-index set exceeds {MAX_INDEX_SET_SIZE} elements")
        if len(prefix) == d:
            out.append(tuple(prefix))
            return
        for a in range(top + 1):
            cand = prefix + [a]
            if not admissible(cand):
                break
            extend(cand)

    extend([])
    return MultiIndexSet(d, tuple(sorted(out, key=_grlex_key)))


# --- univariate families --------------------------------------------------


def _univariate(family: Family, t: np.ndarray, deg: int) -> np.ndarray:
    """Values f_0..f_deg at points t; returns shape (len(t), deg + 1)."""
    n = t.shape[0]
    out = np.empty((n, deg + 1))
    out[:, 0] = 1.0
    if family is Family.BESSELJ:
        return _bessel_table(t, deg)
    if deg == 0:
        return out
    if family is Family.MONOMIAL:
        for q in range(1, deg + 1):
            out[:, q] = out[:, q - 1] * t
    elif family is Family.LEGENDRE:
        out[:, 1] = t
        for q in range(1, deg):
            out[:, q + 1] = ((2 * q + 1) * t * out[:, q] - q * out[:, q - 1]) / (q + 1)
    elif family is Family.CHEBYSHEV:
        out[:, 1] = t
        for q in range(1, deg):
            out[:, q + 1] = 2.0 * t * out[:, q] - out[:, q - 1]
    elif family is Family.HERMITE:
        # probabilists' convention: He_{q+1} = x He_q - q He_{q-1}
        out[:, 1] = t
        for q in range(1, deg):
            out[:, q + 1] = t * out[:, q] - q * out[:, q - 1]
    else:
        raise ValidationError(f"family {family} has no univariate table")
    return out


def _bessel_table(t: np.ndarray, deg: int) -> np.ndarray:
    if t.size and np.max(np.abs(t)) > BESSEL_MAX_ARG:
        raise EvaluationDomain(
            f"BesselJ argument {np.max(np.abs(t)):.6g} outside validated range |x| <= {BESSEL_MAX_ARG}"
        )
    half = 0.5 * t
    quarter_sq = -half * half
    out = np.empty((t.shape[0], deg + 1))
    lead = np.ones_like(t)  # (x/2)^q / q!
    for q in range(deg + 1):
        if q > 0:
            lead = lead * half / q
        term = lead.copy()
        acc = term.copy()
        for k in range(1, _BESSEL_TERMS):
            term = term * quarter_sq / (k * (k + q))
            acc += term
        out[:, q] = acc
    return out


@dataclass(frozen=True)
class BasisSpec:
    """Tensor-product basis over a multi-index set.

    ``scale``/``shift`` apply the per-axis affine map ``x -> scale * x + shift``
    before evaluation. With ``family=CALLBACK``, ``callback`` maps an (n, d)
    array of points to an (n, N) array of rows (or a single point to an
    N-vector when ``vectorized`` is False).
    """

    family: Family
    index_set: MultiIndexSet | None = None
    scale: tuple[float, ...] | None = None
    shift: tuple[float, ...] | None = None
    callback: Callable | None = None
    callback_size: int | None = None
    callback_dim: int | None = None
    vectorized: bool = False
    _alpha: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        fam = Family(self.family)
        object.__setattr__(self, "family", fam)
        if fam is Family.CALLBACK:
            if self.callback is None or self.callback_size is None or self.callback_dim is None:
                raise ValidationError("callback basis needs callback, callback_size and callback_dim")
            object.__setattr__(self, "_alpha", np.zeros((0, 0), dtype=np.int64))
        else:
            if self.index_set is None:
                raise ValidationError("index_set is required")
            object.__setattr__(self, "_alpha", self.index_set.as_array())
        for name in ("scale", "shift"):
            v = getattr(self, name)
            if v is not None:
                v = tuple(float(s) for s in v)
                if len(v) != self.dim:
                    raise ValidationError(f"{name} must have one entry per axis")
                object.__setattr__(self, name, v)

    @property
    def size(self) -> int:
        if self.family is Family.CALLBACK:
            return int(self.callback_size)
        return len(self.index_set)

    @property
    def dim(self) -> int:
        if self.family is Family.CALLBACK:
            return int(self.callback_dim)
        return self.index_set.dim

    def _map(self, x: np.ndarray) -> np.ndarray:
        if self.scale is not None:
            x = x * np.asarray(self.scale)
        if self.shift is not None:
            x = x + np.asarray(self.shift)
        return x


def eval_rows(basis: BasisSpec, x) -> np.ndarray:
    """Vandermonde rows for a batch of points; returns shape (n, N)."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        x = x.reshape(-1, basis.dim)
    if x.shape[1] != basis.dim:
        raise ValidationError(f"points have dimension {x.shape[1]}, basis expects {basis.dim}")
    if not np.all(np.isfinite(x)):
        raise ValidationError("points must be finite")
    x = basis._map(x)
    n = x.shape[0]

    if basis.family is Family.CALLBACK:
        if basis.vectorized:
            rows = np.asarray(basis.callback(x), dtype=np.float64).reshape(n, basis.size)
        else:
            rows = np.empty((n, basis.size))
            for i in range(n):
                rows[i] = basis.callback(x[i])
        return rows

    alpha = basis._alpha
    rows = np.ones((n, alpha.shape[0]))
    for j in range(basis.dim):
        deg = int(alpha[:, j].max()) if alpha.size else 0
        table = _univariate(basis.family, x[:, j], deg)
        rows *= table[:, alpha[:, j]]
    return rows


def eval_row(basis: BasisSpec, x) -> np.ndarray:
    """Vandermonde row v(x) for a single point."""
    x = np.asarray(x, dtype=np.float64).reshape(1, -1)
    return eval_rows(basis, x)[0]


@numba.njit(cache=True, nogil=True)
def _neumaier_accumulate(rows, w, total, comp):
    n, m = rows.shape
    for i in range(n):
        wi = w[i]
        for j in range(m):
            x = wi * rows[i, j]
            s = total[j]
            t = s + x
            if abs(s) >= abs(x):
                comp[j] += (s - t) + x
            else:
                comp[j] += (x - t) + s
            total[j] = t


def stream_moments(basis: BasisSpec, source, batch_size: int = 8192) -> np.ndarray:
    """Moments ``eta_n = sum_m w_m v_n(x_m)`` in one pass over ``source``.

    Uses Neumaier-compensated summation per moment; memory is O(N) beyond a
    single batch of rows.
    """
    total = np.zeros(basis.size)
    comp = np.zeros(basis.size)
    for batch in source.batches(batch_size):
        if batch.coords.shape[1] != basis.dim:
            raise ValidationError(
                f"source dimension {batch.coords.shape[1]} does not match basis dimension {basis.dim}"
            )
        rows = np.ascontiguousarray(eval_rows(basis, batch.coords))
        _neumaier_accumulate(rows, np.ascontiguousarray(batch.weights), total, comp)
    eta = total + comp
    if not np.all(np.isfinite(eta)):
        raise ValidationError("non-finite moments")
    return eta


def moments_of_rows(rows: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """Compensated ``rows.T @ weights`` for an in-memory Vandermonde matrix."""
    rows = np.ascontiguousarray(rows, dtype=np.float64)
    total = np.zeros(rows.shape[1])
    comp = np.zeros(rows.shape[1])
    _neumaier_accumulate(rows, np.ascontiguousarray(weights, dtype=np.float64), total, comp)
    return total + comp


_FAMILY_NAMES = {f.value: f for f in Family if f is not Family.CALLBACK}


def parse_basis(text: str, dim: int) -> BasisSpec:
    """Parse ``family:KIND:r[:p]``, e.g. ``legendre:TD:10`` or ``besselj:PNORM:25:0.333``."""
    parts = text.strip().split(":")
    if len(parts) not in (3, 4):
        raise ValidationError(f"basis spec {text!r} must look like family:KIND:r[:p]")
    fam_name, kind_name, r_text = parts[:3]
    try:
        family = _FAMILY_NAMES[fam_name.lower()]
    except KeyError:
        raise ValidationError(f"unknown basis family {fam_name!r}") from None
    try:
        kind = IndexKind(kind_name.upper())
    except ValueError:
        raise ValidationError(f"unknown index set kind {kind_name!r}") from None
    try:
        r = float(r_text)
        p = float(parts[3]) if len(parts) == 4 else None
    except ValueError:
        raise ValidationError(f"bad numeric field in basis spec {text!r}") from None
    if kind is IndexKind.PNORM and p is None:
        raise ValidationError("PNORM basis spec needs a p field")
    if kind is not IndexKind.PNORM and p is not None:
        raise ValidationError(f"{kind.value} basis spec takes no p field")
    return BasisSpec(family, multi_index_set(kind, r, dim, p))


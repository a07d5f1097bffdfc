"""Finitely supported nonnegative measures and the total-variation distance.

The ordering of nodes is part of a measure's identity here: the streaming
pruners are order sensitive, and admissible perturbations only ever modify
weights in place or append nodes at the end.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .errors import BothZero, TargetUnreachable, UnalignableSupports, ValidationError

__all__ = [
    "DiscreteMeasure",
    "SupportAlignment",
    "total_mass",
    "tv_distance",
    "perturb_weights",
    "append_nodes",
]


class SupportAlignment(enum.Enum):
    BY_INDEX = "by_index"
    BY_COORDINATE_EXACT = "by_coordinate_exact"


@dataclass(frozen=True, eq=False)
class DiscreteMeasure:
    """Ordered nodes in R^d carrying nonnegative weights.

    Parameters
    ----------
    nodes : array_like, shape (M, d) or (M,)
        Support points. A 1-D array is read as M points in one dimension.
    weights : array_like, shape (M,)
    strict : bool
        Reject zero weights as well as negative ones.

    The arrays are copied and made read-only.
    """

    nodes: np.ndarray
    weights: np.ndarray

    def __init__(self, nodes, weights, strict: bool = False, dim: int | None = None):
        w = np.array(weights, dtype=np.float64).reshape(-1)
        x = np.array(nodes, dtype=np.float64)
        if x.ndim == 1:
            x = x.reshape(-1, 1) if dim in (None, 1) else x.reshape(-1, dim)
        if x.size == 0:
            x = x.reshape(0, dim if dim is not None else (x.shape[1] if x.ndim == 2 else 1))
        if x.ndim != 2:
            raise ValidationError(f"nodes must be a 2-D array, got shape {x.shape}")
        if dim is not None and x.shape[1] != dim:
            raise ValidationError(f"nodes have dimension {x.shape[1]}, expected {dim}")
        if x.shape[0] != w.shape[0]:
            raise ValidationError(
                f"{x.shape[0]} nodes but {w.shape[0]} weights"
            )
        if not (np.all(np.isfinite(w)) and np.all(np.isfinite(x))):
            raise ValidationError("nodes and weights must be finite")
        if np.any(w < 0):
            raise ValidationError("weights must be nonnegative")
        if strict and np.any(w == 0):
            raise ValidationError("strict measure requires positive weights")
        x.setflags(write=False)
        w.setflags(write=False)
        object.__setattr__(self, "nodes", x)
        object.__setattr__(self, "weights", w)

    @property
    def dim(self) -> int:
        return self.nodes.shape[1]

    def __len__(self) -> int:
        return self.weights.shape[0]

    def __repr__(self) -> str:
        return f"DiscreteMeasure(M={len(self)}, dim={self.dim}, mass={total_mass(self):.6g})"


def total_mass(m: DiscreteMeasure) -> float:
    """l1 norm of the weight vector."""
    return float(np.sum(np.abs(m.weights)))


def _aligned_difference(a: DiscreteMeasure, b: DiscreteMeasure, align: SupportAlignment) -> float:
    if align is SupportAlignment.BY_INDEX:
        k = min(len(a), len(b))
        if a.dim != b.dim:
            raise UnalignableSupports(f"dimension mismatch: {a.dim} vs {b.dim}")
        if not np.array_equal(a.nodes[:k], b.nodes[:k]):
            bad = int(np.argmax(np.any(a.nodes[:k] != b.nodes[:k], axis=1)))
            raise UnalignableSupports(f"supports differ at shared position {bad}")
        diff = np.abs(a.weights[:k] - b.weights[:k]).sum()
        return float(diff + np.abs(a.weights[k:]).sum() + np.abs(b.weights[k:]).sum())

    if align is SupportAlignment.BY_COORDINATE_EXACT:
        acc: dict[tuple, float] = {}
        for x, w in zip(map(tuple, a.nodes.tolist()), a.weights.tolist()):
            acc[x] = acc.get(x, 0.0) + w
        for x, w in zip(map(tuple, b.nodes.tolist()), b.weights.tolist()):
            acc[x] = acc.get(x, 0.0) - w
        return float(np.abs(np.fromiter(acc.values(), dtype=np.float64)).sum())

    raise ValidationError(f"unknown alignment {align!r}")


def tv_distance(
    a: DiscreteMeasure,
    b: DiscreteMeasure,
    align: SupportAlignment = SupportAlignment.BY_INDEX,
) -> float:
    """Normalized total-variation distance ``|a - b| / (|a| + |b|)``.

    With ``BY_INDEX`` the two measures must agree node-for-node on their
    common prefix; the tail of the longer one is compared against zero.
    """
    denom = total_mass(a) + total_mass(b)
    if denom == 0.0:
        raise BothZero("both measures have zero mass")
    return _aligned_difference(a, b, align) / denom


def perturb_weights(m: DiscreteMeasure, target_tv: float, rng_seed: int) -> DiscreteMeasure:
    """Random mean-zero weight displacement hitting a prescribed TV distance.

    The displacement is ``w * z`` with ``z`` iid uniform on [-1, 1], projected
    so the weights keep their total, then scaled so the l1 change is
    ``2 * target_tv * |m|``. If that would make some weight nonpositive the
    displacement is shrunk uniformly; when the shrink moves the achieved
    distance outside 1% of the target, :class:`TargetUnreachable` is raised.
    """
    if not 0.0 <= target_tv < 1.0:
        raise ValidationError(f"target_tv must lie in [0, 1), got {target_tv}")
    w = m.weights
    if target_tv == 0.0:
        return DiscreteMeasure(m.nodes, w)
    if len(m) < 2 or np.any(w <= 0):
        raise TargetUnreachable("weight perturbation needs at least two positive weights")

    rng = np.random.default_rng(rng_seed)
    z = rng.uniform(-1.0, 1.0, size=w.shape[0])
    mass = w.sum()
    z -= np.dot(w, z) / mass
    base = w * z
    l1 = np.abs(base).sum()
    if l1 == 0.0:
        raise TargetUnreachable("degenerate random displacement")
    scale = 2.0 * target_tv * mass / l1

    lowest = z.min()
    if scale * lowest <= -1.0:
        # keep every weight at least 1e-3 of its old value
        scale = 0.999 / -lowest
    delta = scale * base
    out = DiscreteMeasure(m.nodes, w + delta)
    got = tv_distance(m, out)
    if abs(got - target_tv) > 0.01 * target_tv:
        raise TargetUnreachable(
            f"positivity limits the perturbation to tv={got:.3g} (target {target_tv:.3g})"
        )
    return out


def append_nodes(m: DiscreteMeasure, new_nodes, target_tv: float) -> DiscreteMeasure:
    """Append nodes of equal weight so that ``tv_distance(m, out) == target_tv``.

    The appended total ``eps`` solves ``eps / (2|m| + eps) = target_tv``.
    """
    if not 0.0 < target_tv < 1.0:
        raise ValidationError(f"target_tv must lie in (0, 1), got {target_tv}")
    x = np.asarray(new_nodes, dtype=np.float64)
    if x.ndim == 1:
        x = x.reshape(-1, m.dim) if m.dim > 1 else x.reshape(-1, 1)
    if x.shape[0] == 0:
        raise ValidationError("new_nodes must be nonempty")
    if x.shape[1] != m.dim:
        raise ValidationError(f"new nodes have dimension {x.shape[1]}, measure has {m.dim}")
    eps = 2.0 * target_tv * total_mass(m) / (1.0 - target_tv)
    w_new = np.full(x.shape[0], eps / x.shape[0])
    return DiscreteMeasure(
        np.vstack([m.nodes, x]),
        np.concatenate([m.weights, w_new]),
    )

"""Experiment drivers: stability under TV perturbations, runtime scaling, and
moment reports. Results are plain records with CSV writers.
"""

from __future__ import annotations

import csv
import time
import tracemalloc
from dataclasses import asdict, dataclass, fields
from typing import Iterable, Sequence

import numpy as np

from .baselines import LpProblem, lp_prune, nnls_prune
from .basis import BasisSpec, eval_rows, moments_of_rows, stream_moments
from .errors import CaraPruneError, ValidationError
from .io_stream import DomainSpec, NodeStream, SamplerStream
from .measure import DiscreteMeasure, append_nodes, perturb_weights
from .pruning import KernelBackend, PruneResult, csp, matrix_batches, prune_rows

__all__ = [
    "StabilityRecord",
    "BenchRecord",
    "MomentReport",
    "METHODS",
    "prune_matrix",
    "stability_experiment",
    "timing_benchmark",
    "moment_report",
    "write_records",
]

METHODS = ("gscsp", "scsp", "csp", "nnls", "lp", "lp_rand")
KINDS = ("weights", "append_few", "append_many")
APPEND_FEW = 10


@dataclass
class StabilityRecord:
    method: str
    kind: str
    delta: float
    tv: float
    rep: int
    seed: int
    kept: int = 0
    error: str = ""


@dataclass
class BenchRecord:
    method: str
    M: int
    N: int
    rep: int
    seed: int
    wall_time: float
    flops: int = -1
    first_iteration_flops: int = -1
    max_iteration_flops: int = -1
    peak_bytes: int = -1
    error: str = ""


@dataclass
class MomentReport:
    residual: float
    kept: int
    min_weight: float
    max_weight: float
    flagged: bool


def write_records(path, records: Sequence) -> None:
    """CSV with a header row; columns follow the record's field order."""
    if not records:
        raise ValidationError("no records to write")
    cols = [f.name for f in fields(records[0])]
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(cols)
        for r in records:
            d = asdict(r)
            wr.writerow([repr(d[c]) if isinstance(d[c], float) else d[c] for c in cols])


def _cell_seed(*key: int) -> int:
    return int(np.random.SeedSequence([int(k) for k in key]).generate_state(1)[0])


def prune_matrix(method: str, V, w, cost=None, warm=None) -> PruneResult:
    """Prune an in-memory system ``(V, w)`` with one of :data:`METHODS`."""
    if method == "gscsp":
        return prune_rows(matrix_batches(V, w), V.shape[1])
    if method == "scsp":
        return prune_rows(matrix_batches(V, w), V.shape[1], kernel_backend=KernelBackend.DENSE_QR)
    if method == "csp":
        return csp(V, w)
    eta = moments_of_rows(V, w)
    if method == "nnls":
        return nnls_prune(V, eta)
    if method in ("lp", "lp_rand"):
        if cost is None:
            raise ValidationError("lp needs a cost vector")
        return lp_prune(LpProblem(V, eta, cost), feasible_weights=w, warm_basis=warm)
    raise ValidationError(f"unknown method {method!r}")


def _tv_dense(a: np.ndarray, b: np.ndarray) -> float:
    # index-aligned TV over the union support; the shorter vector is zero-padded
    n = max(len(a), len(b))
    pa = np.zeros(n)
    pb = np.zeros(n)
    pa[: len(a)] = a
    pb[: len(b)] = b
    return float(np.abs(pa - pb).sum() / (np.abs(a).sum() + np.abs(b).sum()))


def stability_experiment(
    base: DiscreteMeasure,
    basis: BasisSpec,
    kind: str,
    deltas: Iterable[float],
    reps: int,
    methods: Sequence[str] = ("gscsp", "nnls", "lp"),
    seed: int = 0,
    domain: DomainSpec | None = None,
    append_count: int | None = None,
) -> list[StabilityRecord]:
    """Prune ``base`` and perturbed copies; record ``d_TV`` of the pruned rules.

    ``kind`` is ``weights`` (in-place weight displacement), ``append_few``
    (10 nodes) or ``append_many`` (``len(base)`` nodes, or ``append_count``).
    Appended nodes are drawn uniformly from ``domain``. The LP cost is one
    fixed U(0,1) draw; appended entries are ones for ``lp`` and fresh U(0,1)
    draws for ``lp_rand``. Failures are recorded per cell.
    """
    if kind not in KINDS:
        raise ValidationError(f"kind must be one of {KINDS}")
    if kind != "weights" and domain is None:
        raise ValidationError("append perturbations need a domain to sample from")
    deltas = list(deltas)
    if any(d < 0 for d in deltas):
        raise ValidationError("deltas must be nonnegative")
    M = len(base)
    V = eval_rows(basis, base.nodes)
    cost = np.random.default_rng(_cell_seed(seed, 0)).uniform(0.0, 1.0, M)
    reference: dict[str, tuple[np.ndarray, np.ndarray | None]] = {}
    records: list[StabilityRecord] = []

    for method in methods:
        try:
            if method.startswith("lp"):
                ref, warm = lp_prune(
                    LpProblem(V, moments_of_rows(V, base.weights), cost),
                    feasible_weights=base.weights,
                    return_basis=True,
                )
            else:
                ref, warm = prune_matrix(method, V, base.weights), None
            reference[method] = (ref.dense_weights(M), warm)
        except CaraPruneError as exc:
            reference[method] = (None, None)
            for di, delta in enumerate(deltas):
                for rep in range(reps):
                    s = _cell_seed(seed, KINDS.index(kind) + 1, di, rep)
                    records.append(StabilityRecord(method, kind, delta, float("nan"), rep, s, 0, f"reference: {exc}"))

    extra = APPEND_FEW if kind == "append_few" else (append_count or M)
    for di, delta in enumerate(deltas):
        for rep in range(reps):
            s = _cell_seed(seed, KINDS.index(kind) + 1, di, rep)
            try:
                if delta == 0:
                    pert = base
                elif kind == "weights":
                    pert = perturb_weights(base, delta, s)
                else:
                    new = SamplerStream(domain, extra, s).to_measure().nodes
                    pert = append_nodes(base, new, delta)
            except CaraPruneError as exc:
                for method in methods:
                    records.append(StabilityRecord(method, kind, delta, float("nan"), rep, s, 0, f"perturb: {exc}"))
                continue
            Mp = len(pert)
            Vp = V if Mp == M else np.vstack([V, eval_rows(basis, pert.nodes[M:])])
            wp = np.asarray(pert.weights)
            for method in methods:
                ref, warm = reference[method]
                if ref is None:
                    continue
                try:
                    c = cost
                    if Mp > M and method == "lp":
                        c = np.concatenate([cost, np.ones(Mp - M)])
                    elif Mp > M and method == "lp_rand":
                        c = np.concatenate([cost, np.random.default_rng(s).uniform(0.0, 1.0, Mp - M)])
                    out = prune_matrix(method, Vp, wp, c, warm)
                    records.append(
                        StabilityRecord(method, kind, delta, _tv_dense(ref, out.dense_weights(Mp)), rep, s, len(out))
                    )
                except CaraPruneError as exc:
                    records.append(StabilityRecord(method, kind, delta, float("nan"), rep, s, 0, str(exc)))
    return records


def timing_benchmark(
    methods: Sequence[str],
    M_grid: Sequence[int],
    N_grid: Sequence[int],
    reps: int,
    seed: int = 0,
    dense_cap: int = 100_000,
    track_memory: bool = False,
) -> list[BenchRecord]:
    """Wall time per (method, M, N, rep) on iid U(0,1) matrices and weights.

    Dense methods (everything but ``gscsp``) are skipped above ``dense_cap``.
    """
    out: list[BenchRecord] = []
    for method in methods:
        if reps > 0 and N_grid:
            # keep JIT compilation and cache loading out of the first timed cell
            rng = np.random.default_rng(seed)
            n0 = N_grid[0]
            prune_matrix(method, rng.uniform(size=(4 * n0 + 8, n0)), rng.uniform(0.5, 1.0, 4 * n0 + 8), rng.uniform(size=4 * n0 + 8))
        for N in N_grid:
            for M in M_grid:
                for rep in range(reps):
                    s = _cell_seed(seed, M, N, rep)
                    if method != "gscsp" and M > dense_cap:
                        out.append(BenchRecord(method, M, N, rep, s, float("nan"), error=f"skipped: M > {dense_cap}"))
                        continue
                    rng = np.random.default_rng(s)
                    V = rng.uniform(0.0, 1.0, (M, N))
                    w = rng.uniform(0.0, 1.0, M)
                    cost = rng.uniform(0.0, 1.0, M)
                    if track_memory:
                        tracemalloc.start()
                    t0 = time.perf_counter()
                    try:
                        res = prune_matrix(method, V, w, cost)
                        err = ""
                    except CaraPruneError as exc:
                        res, err = None, str(exc)
                    wall = time.perf_counter() - t0
                    peak = -1
                    if track_memory:
                        peak = tracemalloc.get_traced_memory()[1]
                        tracemalloc.stop()
                    rec = BenchRecord(method, M, N, rep, s, wall, peak_bytes=peak, error=err)
                    if res is not None and res.diagnostics.flops:
                        rec.flops = res.diagnostics.flops
                        rec.first_iteration_flops = res.diagnostics.first_iteration_flops
                        rec.max_iteration_flops = res.diagnostics.max_iteration_flops
                    out.append(rec)
    return out


def _kept_nodes(result: PruneResult, source: NodeStream) -> np.ndarray:
    if result.kept_nodes is not None and result.kept_nodes.shape[0] == len(result):
        return result.kept_nodes
    want = {int(g): i for i, g in enumerate(result.kept_global)}
    nodes = np.full((len(result), source.dim), np.nan)
    for b in source.batches():
        for j in np.flatnonzero(np.isin(b.index, result.kept_global)):
            nodes[want[int(b.index[j])]] = b.coords[j]
    if np.isnan(nodes).any():
        raise ValidationError("kept indices not found in the source")
    return nodes


def moment_report(result: PruneResult, basis: BasisSpec, source: NodeStream) -> MomentReport:
    """Relative residual ``||V_kept^T w_kept - eta|| / ||eta||`` with eta from a fresh pass."""
    eta = stream_moments(basis, source)
    nodes = _kept_nodes(result, source)
    got = moments_of_rows(eval_rows(basis, nodes), result.kept_weights) if len(result) else np.zeros_like(eta)
    norm = np.linalg.norm(eta)
    resid = float(np.linalg.norm(got - eta) / norm) if norm > 0 else float(np.linalg.norm(got))
    result.moment_residual = resid
    w = result.kept_weights
    return MomentReport(
        resid,
        len(result),
        float(w.min()) if w.size else float("nan"),
        float(w.max()) if w.size else float("nan"),
        resid > 1e-8,
    )

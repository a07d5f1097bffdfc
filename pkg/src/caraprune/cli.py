"""``caraprune`` command line: prune, perturb, compare, bench, stability.

Exit codes: 0 success, 2 invalid input, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from .basis import eval_rows, moments_of_rows, parse_basis, stream_moments
from .errors import NumericalError, ValidationError
from .harness import METHODS, prune_matrix, stability_experiment, timing_benchmark, write_records
from .io_stream import BUILTIN_SHAPES, SamplerStream, open_source, read_rule_csv, write_csv
from .measure import DiscreteMeasure, append_nodes, perturb_weights
from .pruning import KernelBackend, SigSelectPolicy, scsp


def _grid(text: str) -> list[int]:
    try:
        return [int(float(t)) for t in text.split(",") if t.strip()]
    except ValueError:
        raise ValidationError(f"bad integer grid {text!r}") from None


def _floats(text: str) -> list[float]:
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise ValidationError(f"bad number list {text!r}") from None


def cmd_prune(args) -> int:
    source = open_source(args.input, seed=args.seed)
    basis = parse_basis(args.basis, source.dim)
    if args.method in ("gscsp", "scsp"):
        backend = KernelBackend.GIVENS_WINDOW if args.method == "gscsp" else KernelBackend.DENSE_QR
        res = scsp(source, basis, args.k, SigSelectPolicy.parse(args.sigselect), backend, args.batch_size)
        nodes = res.kept_nodes
    else:
        mu = source.to_measure()
        V = eval_rows(basis, mu.nodes)
        cost = np.random.default_rng(args.seed).uniform(0.0, 1.0, len(mu)) if args.method == "lp" else None
        if args.method == "csp":
            from .pruning import csp

            res = csp(V, mu.weights, SigSelectPolicy.parse(args.sigselect))
        else:
            res = prune_matrix(args.method, V, np.asarray(mu.weights), cost)
        nodes = mu.nodes[res.kept_rows]
    write_csv(args.output, nodes, res.kept_weights, res.kept_global)
    print(f"kept={len(res)} iterations={res.iterations}")
    if args.verify:
        # second pass: fresh moments from the source against the rule as written to disk
        eta = stream_moments(basis, open_source(args.input, seed=args.seed))
        x, w, _ = read_rule_csv(args.output)
        got = moments_of_rows(eval_rows(basis, x), w)
        resid = float(np.linalg.norm(got - eta) / np.linalg.norm(eta))
        print(f"verify_residual={resid!r}")
        if not resid <= args.verify_tol:
            print(f"verification failed: residual {resid:.3e} > {args.verify_tol:.1e}", file=sys.stderr)
            return 3
    return 0


def cmd_perturb(args) -> int:
    source = open_source(args.input, seed=args.seed)
    mu = source.to_measure()
    if args.mode == "weights":
        out = perturb_weights(mu, args.tv, args.seed)
    else:
        shape = args.shape or (args.input.split(":")[1] if args.input.startswith("gen:") else None)
        if shape is None or shape not in BUILTIN_SHAPES:
            raise ValidationError("append mode needs --shape (one of %s)" % ", ".join(sorted(BUILTIN_SHAPES)))
        count = args.count if args.count is not None else len(mu)
        new = SamplerStream(BUILTIN_SHAPES[shape](), count, args.seed + 1).to_measure().nodes
        out = append_nodes(mu, new, args.tv)
    write_csv(args.output, out.nodes, out.weights)
    return 0


def _rule_weights(path):
    x, w, idx = read_rule_csv(path)
    return x, w, idx


def cmd_compare(args) -> int:
    xa, wa, ia = _rule_weights(args.a)
    xb, wb, ib = _rule_weights(args.b)
    denom = np.abs(wa).sum() + np.abs(wb).sum()
    if denom == 0:
        raise ValidationError("both rules have zero mass")
    if ia is not None and ib is not None and args.align == "auto":
        acc: dict[int, float] = {}
        for i, w in zip(ia.tolist(), wa.tolist()):
            acc[i] = acc.get(i, 0.0) + w
        for i, w in zip(ib.tolist(), wb.tolist()):
            acc[i] = acc.get(i, 0.0) - w
        tv = float(np.abs(np.fromiter(acc.values(), dtype=float)).sum() / denom)
    else:
        from .measure import SupportAlignment, tv_distance

        align = SupportAlignment.BY_COORDINATE_EXACT if args.align == "coordinate" else SupportAlignment.BY_INDEX
        tv = tv_distance(DiscreteMeasure(xa, wa), DiscreteMeasure(xb, wb), align)
    print(repr(tv))
    return 0


def cmd_bench(args) -> int:
    methods = [m.strip() for m in args.method.split(",")]
    for m in methods:
        if m not in METHODS:
            raise ValidationError(f"unknown method {m!r}")
    recs = timing_benchmark(methods, _grid(args.m_grid), _grid(args.n_grid), args.reps, args.seed)
    if recs:
        write_records(args.output, recs)
    else:
        with open(args.output, "w") as fh:
            fh.write("method,M,N,rep,seed,wall_time,flops,first_iteration_flops,max_iteration_flops,peak_bytes,error\n")
    return 0


def cmd_stability(args) -> int:
    if args.shape not in BUILTIN_SHAPES:
        raise ValidationError(f"unknown shape {args.shape!r}")
    domain = BUILTIN_SHAPES[args.shape]()
    base = SamplerStream(domain, args.M, args.seed).to_measure()
    basis = parse_basis(args.basis, domain.dim)
    methods = [m.strip() for m in args.methods.split(",")]
    recs = stability_experiment(base, basis, args.kind, _floats(args.deltas), args.reps, methods, args.seed, domain)
    write_records(args.output, recs)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="caraprune", description="Positive quadrature pruning.")
    sub = p.add_subparsers(dest="command", required=True)

    q = sub.add_parser("prune", help="prune a node source to at most N nodes")
    q.add_argument("--input", required=True, help="CSV file, binary file, or gen:<shape>:<M>")
    q.add_argument("--basis", required=True, help="family:KIND:r[:p], e.g. legendre:TD:10")
    q.add_argument("--method", default="gscsp", choices=["gscsp", "scsp", "csp", "nnls", "lp"])
    q.add_argument("--k", type=int, default=1)
    q.add_argument("--sigselect", default="minabs", choices=["minabs", "plus", "minus"])
    q.add_argument("--verify", action="store_true", help="re-read the source and check moments")
    q.add_argument("--verify-tol", type=float, default=1e-10)
    q.add_argument("--seed", type=int, default=0)
    q.add_argument("--batch-size", type=int, default=4096)
    q.add_argument("--output", required=True)
    q.set_defaults(func=cmd_prune)

    q = sub.add_parser("perturb", help="perturb a measure to a target TV distance")
    q.add_argument("--input", required=True)
    q.add_argument("--mode", required=True, choices=["weights", "append"])
    q.add_argument("--tv", type=float, required=True)
    q.add_argument("--seed", type=int, default=0)
    q.add_argument("--shape", help="domain for appended nodes")
    q.add_argument("--count", type=int, help="number of appended nodes (default: M)")
    q.add_argument("--output", required=True)
    q.set_defaults(func=cmd_perturb)

    q = sub.add_parser("compare", help="TV distance between two rule files")
    q.add_argument("--a", required=True)
    q.add_argument("--b", required=True)
    q.add_argument("--metric", default="tv", choices=["tv"])
    q.add_argument("--align", default="auto", choices=["auto", "index", "coordinate"])
    q.set_defaults(func=cmd_compare)

    q = sub.add_parser("bench", help="runtime scaling on random matrices")
    q.add_argument("--method", default="gscsp", help="comma-separated methods")
    q.add_argument("--n-grid", default="8")
    q.add_argument("--m-grid", default="1e4,1e5")
    q.add_argument("--reps", type=int, default=3)
    q.add_argument("--seed", type=int, default=0)
    q.add_argument("--output", required=True)
    q.set_defaults(func=cmd_bench)

    q = sub.add_parser("stability", help="TV stability of pruning under perturbations")
    q.add_argument("--shape", default="disk")
    q.add_argument("--M", type=int, default=10_000)
    q.add_argument("--basis", default="legendre:HC:30")
    q.add_argument("--kind", default="weights", choices=["weights", "append_few", "append_many"])
    q.add_argument("--deltas", default="1e-12,1e-9,1e-6")
    q.add_argument("--reps", type=int, default=20)
    q.add_argument("--methods", default="gscsp,nnls,lp")
    q.add_argument("--seed", type=int, default=0)
    q.add_argument("--output", required=True)
    q.set_defaults(func=cmd_stability)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

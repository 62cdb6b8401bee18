"""Command-line front end.

Subcommands:

* ``validate``        -- admissibility report for a graph config
* ``limit-q``         -- both limit-chain generator variants as CSV
* ``sweep``           -- kappa/t sweep against the limit chain
* ``resolvent-check`` -- small-lam averaging of the interval resolvent
* ``duality-check``   -- forward/adjoint pairing defect under refinement

Exit codes: 0 success, 1 graph validation failure, 2 I/O or parse
failure, 3 an acceptance criterion (monotone decrease) failed.  CSV
output is deterministic: fixed column order, 17 significant digits,
newline-terminated rows.
"""

from __future__ import annotations

import argparse
import csv
import sys

import numpy as np
from numpy.polynomial import Polynomial

from . import chain, evolution, finite_volume, resolvent
from .graphs import GraphConfigError, InvalidGraphError, load_graph, validate
from .grids import edge_indicator, make_grid

OK, INVALID, IOERR, FAILED = 0, 1, 2, 3


def _float_list(text: str):
    try:
        return [float(part) for part in text.split(",") if part != ""]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated float list: {text!r}")


def _open_out(path):
    if path is None or path == "-":
        return sys.stdout, False
    return open(path, "w", encoding="utf-8", newline=""), True


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="graphdiff",
        description="Diffusion on metric graphs with semipermeable membranes "
        "and its fast-diffusion Markov-chain limit.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check a graph config")
    p.add_argument("--graph", required=True, help="JSON graph config")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("limit-q", help="limit-chain generators as CSV")
    p.add_argument("--graph", required=True)
    p.add_argument("--out", default=None, help="output CSV (default stdout)")
    p.set_defaults(func=cmd_limit_q)

    p = sub.add_parser("sweep", help="kappa sweep against the limit chain")
    p.add_argument("--graph", required=True)
    p.add_argument("--kappa", type=_float_list, default=[1.0, 10.0, 100.0, 1000.0, 10000.0])
    p.add_argument("--t", type=_float_list, default=[0.25, 0.5, 1.0, 2.0])
    p.add_argument("--h", type=float, default=0.005, help="target cell width")
    p.add_argument("--disc", choices=[evolution.FV, evolution.FEM], default=evolution.FV)
    p.add_argument("--trace-order", type=int, choices=[1, 2], default=1)
    p.add_argument(
        "--phi0",
        default=None,
        help="initial state: 'indicator:<edge id>' (default: first edge) or 'uniform'",
    )
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("resolvent-check", help="small-lam averaging table")
    p.add_argument("--a", type=float, default=0.0)
    p.add_argument("--b", type=float, default=1.0)
    p.add_argument("--lambdas", type=_float_list, default=[1e-1, 1e-2, 1e-3, 1e-4])
    p.add_argument(
        "--phi",
        default="poly:0,1",
        help="source: 'poly:c0,c1,...' (ascending coefficients)",
    )
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_resolvent_check)

    p = sub.add_parser("duality-check", help="pairing defect refinement study")
    p.add_argument("--graph", required=True)
    p.add_argument("--kappa", type=float, default=1.0)
    p.add_argument("--h", type=float, default=0.04, help="coarsest cell width")
    p.add_argument("--levels", type=int, default=3)
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--trace-order", type=int, choices=[1, 2], default=1)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_duality_check)

    return parser


def cmd_validate(args) -> int:
    graph = load_graph(args.graph)
    report = validate(graph)
    if report.ok:
        print(f"valid graph with {graph.n_edges} edge(s)")
    else:
        for problem in report.problems:
            print(f"problem: {problem}")
    print(f"conservative: {str(report.conservative).lower()}")
    return OK if report.ok else INVALID


def cmd_limit_q(args) -> int:
    graph = load_graph(args.graph)
    report = validate(graph)
    if not report.ok:
        for problem in report.problems:
            print(f"problem: {problem}", file=sys.stderr)
        return INVALID
    dual = chain.chain_generator(graph, chain.DUAL)
    primal = chain.chain_generator(graph, chain.PRIMAL)
    fh, close = _open_out(args.out)
    try:
        n_diff = chain.write_csv(dual, primal, fh)
    finally:
        if close:
            fh.close()
    ids = dual.edge_ids
    for i in range(dual.n):
        for j in range(dual.n):
            if dual.q[i, j] != primal.q[i, j]:
                print(
                    f"variants differ at ({ids[i]}, {ids[j]}): "
                    f"dual {_fmt(dual.q[i, j])} vs primal {_fmt(primal.q[i, j])}"
                )
    print(f"entries differing between variants: {n_diff}")
    return OK


def _phi0_from_flag(graph, flag):
    if flag is None or flag.startswith("indicator"):
        if flag is None or flag == "indicator":
            edge = 0
        else:
            _, _, edge_id = flag.partition(":")
            try:
                edge = graph.index_of(edge_id)
            except KeyError:
                raise GraphConfigError(f"--phi0 references unknown edge {edge_id!r}")
        return edge_indicator(edge)
    if flag == "uniform":
        return lambda i, x: np.ones_like(np.asarray(x, dtype=float))
    raise GraphConfigError(f"unsupported --phi0 value {flag!r}")


def cmd_sweep(args) -> int:
    graph = load_graph(args.graph)
    report = validate(graph)
    if not report.ok:
        for problem in report.problems:
            print(f"problem: {problem}", file=sys.stderr)
        return INVALID
    phi0 = _phi0_from_flag(graph, args.phi0)
    grid = make_grid(graph, args.h)
    workers = evolution.default_thread_count()
    result = evolution.kappa_sweep(
        graph,
        grid,
        args.kappa,
        args.t,
        phi0,
        discretization=args.disc,
        trace_order=args.trace_order,
        max_workers=workers,
    )
    fh, close = _open_out(args.out)
    try:
        result.write_csv(fh)
    finally:
        if close:
            fh.close()
    ok = result.errors_nonincreasing()
    for t in result.times():
        errs = result.errors(t)
        print(
            f"t={_fmt(t)}: err {' -> '.join(_fmt(e) for e in errs)}"
            f" ({'nonincreasing' if np.all(errs[1:] <= errs[:-1] + 1e-12 * (1 + errs[:-1])) else 'NOT nonincreasing'})"
        )
    return OK if ok else FAILED


def _phi_from_flag(flag):
    kind, _, rest = flag.partition(":")
    if kind != "poly" or not rest:
        raise GraphConfigError(f"unsupported --phi value {flag!r}")
    try:
        coeffs = [float(c) for c in rest.split(",")]
    except ValueError:
        raise GraphConfigError(f"bad polynomial coefficients in {flag!r}")
    return Polynomial(coeffs)


def cmd_resolvent_check(args) -> int:
    if not args.b > args.a:
        print(f"need b > a, got ({args.a}, {args.b})", file=sys.stderr)
        return IOERR
    phi = _phi_from_flag(args.phi)
    table = resolvent.averaging_limit_check(args.a, args.b, phi, args.lambdas)
    fh, close = _open_out(args.out)
    try:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["lambda", "l1_distance"])
        for lam, dist in table.rows:
            writer.writerow([_fmt(lam), _fmt(dist)])
    finally:
        if close:
            fh.close()
    dists = table.distances()
    decreasing = table.nonincreasing(slack=0.05)
    vanishing = dists[-1] <= 0.05
    print(f"average: {_fmt(table.average)}")
    print(f"distances nonincreasing (5% slack): {str(decreasing).lower()}")
    print(f"final distance {_fmt(dists[-1])} <= 0.05: {str(vanishing).lower()}")
    return OK if (decreasing and vanishing) else FAILED


def cmd_duality_check(args) -> int:
    graph = load_graph(args.graph)
    report = validate(graph)
    if not report.ok:
        for problem in report.problems:
            print(f"problem: {problem}", file=sys.stderr)
        return INVALID
    rng = np.random.default_rng(args.seed)
    raw = [Polynomial(rng.uniform(-1.0, 1.0, size=4)) for _ in range(graph.n_edges)]
    f_polys = finite_volume.with_primal_conditions(graph, args.kappa, raw)
    raw2 = [Polynomial(rng.uniform(-1.0, 1.0, size=4)) for _ in range(graph.n_edges)]
    phi_polys = finite_volume.with_dual_conditions(graph, args.kappa, raw2)
    rows = []
    for level in range(args.levels):
        h = args.h / 2**level
        grid = make_grid(graph, h)
        defect = finite_volume.duality_defect(
            graph, grid, args.kappa, f_polys, phi_polys, trace_order=args.trace_order
        )
        rows.append((h, defect))
    fh, close = _open_out(args.out)
    try:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["h", "defect", "ratio"])
        for k, (h, defect) in enumerate(rows):
            ratio = "" if k == 0 else _fmt(rows[k][1] / rows[k - 1][1])
            writer.writerow([_fmt(h), _fmt(defect), ratio])
    finally:
        if close:
            fh.close()
    ok = True
    floor = 1e-12 * max(1.0, rows[0][1])
    for k in range(1, len(rows)):
        prev, cur = rows[k - 1][1], rows[k][1]
        if cur > floor and cur > 0.75 * prev:
            ok = False
        print(f"h={_fmt(rows[k][0])}: defect {_fmt(cur)} (ratio {_fmt(cur / prev) if prev else 'n/a'})")
    return OK if ok else FAILED


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except GraphConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return IOERR
    except InvalidGraphError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return INVALID
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return IOERR
    except ValueError as exc:
        # flags that parse as numbers but fail the library's preconditions
        # (decreasing kappa lists, negative times, ...) are user input errors
        print(f"error: {exc}", file=sys.stderr)
        return IOERR


def run() -> None:
    sys.exit(main())


if __name__ == "__main__":
    run()

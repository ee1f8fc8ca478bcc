"""Command line front end: ``sigma``, ``sweep``, ``verify`` and ``checks``.

Exit codes: 0 success, 2 bad input, 3 solver failure, 4 infeasible graph,
5 certificate rejected.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import graphspace as gs
from . import simcost as sc
from .sdpcore import ProblemTooLarge, SolverOptions

EXIT_OK = 0
EXIT_PARSE = 2
EXIT_SOLVER = 3
EXIT_INFEASIBLE = 4
EXIT_REJECTED = 5

SWEEP_HEADER = ["alpha", "cos2alpha", "sigma1", "sigma2avg", "gap"]


class InputError(ValueError):
    """Bad command line input (maps to exit code 2)."""


def fmt(x: float) -> str:
    """Ten significant digits."""
    return f"{x:.10g}"


@dataclass
class SweepRow:
    alpha: float
    cos2alpha: float
    sigma1: float | None
    sigma2avg: float | None
    gap: float | None
    status1: str
    status2: str

    def csv_fields(self) -> list[str]:
        vals = [self.alpha, self.cos2alpha, self.sigma1, self.sigma2avg, self.gap]
        return ["" if v is None else fmt(v) for v in vals]


# ---------------------------------------------------------------------------
# graph sources

def _load_json(path: str):
    try:
        with open(path) as fh:
            return json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc


def _load_adjacency(path: str) -> np.ndarray:
    """Adjacency as JSON (list of rows) or whitespace separated text; rows are outputs."""
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc
    try:
        adj = np.asarray(json.loads(text), dtype=float)
    except (json.JSONDecodeError, TypeError, ValueError):
        try:
            adj = np.atleast_2d(np.loadtxt(text.splitlines()))
        except ValueError as exc:
            raise InputError(f"cannot parse adjacency {path}: {exc}") from exc
    if adj.ndim != 2:
        raise InputError("adjacency must be a matrix")
    return adj


def _graph_from_args(args, required: bool = True) -> gs.NCBGraph | None:
    try:
        if args.kalpha is not None:
            return gs.kalpha(args.kalpha)
        if args.delta is not None:
            return gs.delta_ell(args.delta)
        if args.classical is not None:
            return gs.classical_graph(_load_adjacency(args.classical))
        if getattr(args, "graph", None):
            return gs.graph_from_json(_load_json(args.graph))
    except (ValueError, gs.la.DimensionError) as exc:
        if isinstance(exc, InputError):
            raise
        raise InputError(str(exc)) from exc
    if required:
        raise InputError("no graph given: use a JSON file, --kalpha, --delta or --classical")
    return None


def _add_graph_args(p: argparse.ArgumentParser, positional: bool = True) -> None:
    if positional:
        p.add_argument("graph", nargs="?", help="graph JSON file")
    p.add_argument("--kalpha", type=float, metavar="ALPHA", help="K_alpha family at angle ALPHA")
    p.add_argument("--delta", type=int, metavar="L", help="noiseless graph with L symbols")
    p.add_argument("--classical", metavar="FILE", help="classical adjacency matrix (|B| x |A|)")


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--tol", type=float, default=None, help="solver / verification tolerance")
    p.add_argument("--max-iter", type=int, default=200, help="interior point iteration cap")
    p.add_argument("--json", action="store_true", help="machine readable output")


def _solver_opts(args) -> SolverOptions:
    if args.tol is None:
        return SolverOptions(max_iter=args.max_iter)
    return SolverOptions(feas_tol=args.tol, gap_tol=args.tol, max_iter=args.max_iter)


def _emit(args, report: dict, lines: list[str]) -> None:
    if args.json:
        print(json.dumps(report, indent=2, sort_keys=True))
    else:
        for line in lines:
            print(line)


# ---------------------------------------------------------------------------
# commands

def cmd_sigma(args) -> int:
    k = _graph_from_args(args)
    opts = _solver_opts(args)
    res = sc.sigma_graph(k, opts)
    report = {"graph": k.name, "dimA": k.dim_a, "dimB": k.dim_b, "rank": k.rank,
              "sigma": res.value, "dual": res.dual_value, "status": res.status}
    lines = [f"sigma: {fmt(res.value)}", f"dual: {fmt(res.dual_value)}"]
    if args.minus:
        val = sc.sigma_minus(k, opts).value
        report["sigma_minus"] = val
        lines.append(f"sigma_minus: {fmt(val)}")
    if args.power is not None:
        if args.power < 1:
            raise InputError("--power must be >= 1")
        dim = (k.dim_a * k.dim_b) ** args.power
        if dim > sc.DIMENSION_CAP:
            raise InputError(f"tensor power dimension {dim} exceeds {sc.DIMENSION_CAP}")
        val = sc.sigma_graph(gs.tensor_power(k, args.power), opts, check=False).value
        avg = val ** (1.0 / args.power)
        report["sigma_power"] = {"n": args.power, "value": val, "average": avg}
        lines.append(f"sigma_power{args.power}: {fmt(val)}")
        lines.append(f"sigma_power{args.power}_avg: {fmt(avg)}")
    if args.bounds:
        try:
            b = sc.s0ns_bounds(k, max_power=args.bounds_power, opts=opts)
        except sc.DimensionCapError as exc:
            raise InputError(str(exc)) from exc
        report["bounds"] = {"lower_log2": b.lower, "upper_log2": b.upper,
                            "per_power": [{"n": n, "log2_avg": v} for n, v in b.power_values]}
        lines.append(f"s0ns_lower_log2: {fmt(b.lower)}")
        lines.append(f"s0ns_upper_log2: {fmt(b.upper)}")
    _emit(args, report, lines)
    return EXIT_OK


def sweep_row(cos2: float, opts: SolverOptions | None = None) -> SweepRow:
    """One grid point: Sigma(K_alpha) and sqrt Sigma(K_alpha (x) K_alpha)."""
    alpha = math.acos(math.sqrt(cos2))
    k = gs.kalpha(alpha)
    s1 = s2 = None
    st1 = st2 = "not-run"
    try:
        r1 = sc.sigma_graph(k, opts)
        s1, st1 = r1.value, r1.status
        r2 = sc.sigma_graph(gs.tensor_graph(k, k), opts, check=False)
        s2, st2 = math.sqrt(r2.value), r2.status
    except gs.InfeasibleGraphError as exc:
        st = "infeasible: " + str(exc)
        st1, st2 = (st, "not-run") if s1 is None else (st1, st)
    except gs.SolverFailure as exc:
        st = "solver-failure: " + str(exc)
        st1, st2 = (st, "not-run") if s1 is None else (st1, st)
    if s2 is None:
        return SweepRow(alpha, cos2, s1, None, None, st1, st2)
    return SweepRow(alpha, cos2, s1, s2, s1 - s2, st1, st2)


def _sweep_worker(task):
    cos2, opts = task
    return sweep_row(cos2, opts)


def sweep_threads() -> int:
    env = os.environ.get("ZESIM_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise InputError(f"ZESIM_THREADS must be an integer, got {env!r}") from None
    return os.cpu_count() or 1


def run_sweep(min_cos2: float, max_cos2: float, steps: int,
              opts: SolverOptions | None = None, threads: int = 1) -> list[SweepRow]:
    """Rows uniform in cos^2(alpha), in grid order."""
    if not (0.0 < min_cos2 < max_cos2 < 1.0):
        raise InputError("need 0 < min-cos2 < max-cos2 < 1")
    if steps < 2:
        raise InputError("steps must be >= 2")
    grid = [float(c) for c in np.linspace(min_cos2, max_cos2, steps)]
    tasks = [(c, opts) for c in grid]
    workers = min(threads, steps)
    if workers <= 1:
        return [_sweep_worker(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_sweep_worker, tasks))


def write_sweep_csv(rows: list[SweepRow], fh) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(SWEEP_HEADER)
    for r in rows:
        w.writerow(r.csv_fields())


def cmd_sweep(args) -> int:
    rows = run_sweep(args.min_cos2, args.max_cos2, args.steps, _solver_opts(args),
                     sweep_threads())
    if args.out == "-":
        write_sweep_csv(rows, sys.stdout)
    else:
        with open(args.out, "w", newline="") as fh:
            write_sweep_csv(rows, fh)
    failed = [r for r in rows if r.gap is None]
    for r in failed:
        print(f"row cos2={fmt(r.cos2alpha)}: {r.status1}; {r.status2}", file=sys.stderr)
    if args.json:
        print(json.dumps([{"cos2alpha": r.cos2alpha, "status": [r.status1, r.status2]}
                          for r in rows], indent=2))
    return EXIT_SOLVER if failed else EXIT_OK


def cmd_verify(args) -> int:
    if args.paper_pi3:
        cert = sc.paper_certificate_pi3()
    elif args.cert:
        try:
            cert = sc.Certificate.from_json(_load_json(args.cert))
        except (KeyError, ValueError) as exc:
            raise InputError(f"bad certificate: {exc}") from exc
    else:
        raise InputError("give a certificate file or --paper-pi3")
    k = _graph_from_args(args, required=False) or cert.graph
    if k is None:
        raise InputError("certificate has no graph; give one with --kalpha, --delta, --classical "
                         "or --graph")
    tol = 1e-9 if args.tol is None else args.tol
    try:
        check = cert.verify(k, tol=tol, strict=args.strict)
    except ValueError as exc:
        raise InputError(str(exc)) from exc
    report = {"kind": cert.kind, "ok": check.ok, "bound": check.bound,
              "margins": check.margins}
    lines = [f"{'PASS' if check.ok else 'FAIL'} {cert.kind} bound {fmt(check.bound)}"]
    lines += [f"  {name}: {fmt(v)}" for name, v in check.margins.items()]
    _emit(args, report, lines)
    return EXIT_OK if check.ok else EXIT_REJECTED


def cmd_checks(args) -> int:
    k = _graph_from_args(args)
    opts = _solver_opts(args)
    res = sc.sigma_graph(k, opts)
    nontriv = sc.nontrivial_check(k)
    full = sc.cheapest_full_rank_check(k, sigma=res.value, opts=opts)
    cond = sc.search_condition_dual(k, sigma=res.value, opts=opts)
    prop = sc.property_prop3_check(k, res)
    report = {
        "sigma": res.value,
        "nontrivial": nontriv,
        "cheapest_full_rank": {"value": full.full_rank, "t": full.t},
        "theorem1_condition": {"found": cond.found, "t": cond.t},
        "dual_face": {"W_min_eig": prop.w_min_eig, "W_norm": prop.w_norm,
                      "trWJ": prop.tr_wj, "trUJ_minus_trS": prop.tr_uj_minus_tr_s},
    }
    lines = [
        f"sigma: {fmt(res.value)}",
        f"nontrivial: {str(nontriv).lower()}",
        f"cheapest-full-rank: {str(full.full_rank).lower()} (t = {fmt(full.t)})",
        f"theorem1-condition: {'found' if cond.found else 'none found'} (t = {fmt(cond.t)})",
    ]
    lines += ["dual-face " + s for s in prop.lines()]
    _emit(args, report, lines)
    return EXIT_OK


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="zesim",
                                     description="No-signalling assisted zero-error simulation costs")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sigma", help="one-shot simulation cost of a graph")
    _add_graph_args(p)
    _add_common(p)
    p.add_argument("--minus", action="store_true", help="also the restricted value with S >= 0")
    p.add_argument("--power", type=int, default=None, help="also the cost of the n-th tensor power")
    p.add_argument("--bounds", action="store_true", help="asymptotic cost bounds")
    p.add_argument("--bounds-power", type=int, default=2, help="largest power for --bounds")
    p.set_defaults(func=cmd_sigma)

    p = sub.add_parser("sweep", help="K_alpha one-shot vs two-shot sweep as CSV")
    p.add_argument("--min-cos2", type=float, default=0.25)
    p.add_argument("--max-cos2", type=float, default=0.35)
    p.add_argument("--steps", type=int, default=11)
    p.add_argument("--out", default="-", help="CSV path, '-' for stdout")
    _add_common(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("verify", help="check a certificate")
    p.add_argument("cert", nargs="?", help="certificate JSON file")
    p.add_argument("--paper-pi3", action="store_true", help="built-in lower bound point for pi/3")
    p.add_argument("--graph", help="graph JSON file (overrides the certificate's graph)")
    p.add_argument("--strict", action="store_true", help="require strict support margins")
    _add_graph_args(p, positional=False)
    _add_common(p)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("checks", help="multiplicativity diagnostics for a graph")
    _add_graph_args(p)
    _add_common(p)
    p.set_defaults(func=cmd_checks)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except (sc.DimensionCapError, ProblemTooLarge) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except gs.InfeasibleGraphError as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except gs.SolverFailure as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())

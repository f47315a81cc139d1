"""Command-line surface: fit solvers on CSV data, run the dual route,
run simulation scenarios and benchmarks, emit JSON/CSV artifacts.

Exit codes: 0 success, 2 usage error, 1 runtime error. Runtime errors
print the originating error class so failures are attributable. The
ROBUST_MSPCA_THREADS environment variable caps the scenario worker
count; output rows are sorted before writing, so results do not depend
on it.
"""

from __future__ import annotations

import argparse
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import report_io, simulate
from .dual import dual_solve, tightness_check
from .errors import RobustMspcaError
from .mirrorprox import solve
from .moments import compute_second_moment, load_moment_matrices, load_sources
from .variants import VARIANTS, solve_variant


def _worker_count(cells: int) -> int:
    raw = os.environ.get("ROBUST_MSPCA_THREADS", "")
    try:
        cap = int(raw) if raw else (os.cpu_count() or 1)
    except ValueError:
        cap = 1
    return max(1, min(cap, cells))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="robust-mspca",
        description="Distributionally robust low-rank projections from multi-source data")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_input_flags(p):
        p.add_argument("--input", required=True,
                       help="directory of per-source CSVs, or a single CSV")
        p.add_argument("--source-column", default=None,
                       help="single-file mode: header column holding source labels")
        p.add_argument("--moments", action="store_true",
                       help="inputs are d x d second-moment matrices, one CSV per source")
        p.add_argument("--center", action="store_true",
                       help="subtract per-source sample means before forming moments")

    fit = sub.add_parser("fit", help="solve a worst-case projection problem")
    add_input_flags(fit)
    fit.add_argument("--k", type=int, required=True)
    fit.add_argument("--T", type=int, default=500)
    fit.add_argument("--variant", choices=VARIANTS, default="stable")
    fit.add_argument("--eta-scale", type=float, default=1.0,
                     help="multiplier on the default step-size scale")
    fit.add_argument("--gap-stride", type=int, default=None)
    fit.add_argument("--gap-tol", type=float, default=1e-6,
                     help="eigengap threshold for the tightness flag")
    fit.add_argument("--out", required=True)

    dual = sub.add_parser("dual", help="run the dual eigenvalue-sum route")
    add_input_flags(dual)
    dual.add_argument("--k", type=int, required=True)
    dual.add_argument("--T", type=int, default=2000)
    dual.add_argument("--eta-scale", type=float, default=1.0,
                      help="multiplier on the dual step schedule")
    dual.add_argument("--gap-tol", type=float, default=1e-6)
    dual.add_argument("--out", required=True)

    sim = sub.add_parser("simulate", help="run a desk-scale experiment scenario")
    sim.add_argument("--scenario", required=True,
                     choices=("settings", "factor", "certificate-grid", "convergence"))
    sim.add_argument("--seed", type=int, default=None)
    sim.add_argument("--T", type=int, default=500)
    sim.add_argument("--k", type=int, default=3)
    sim.add_argument("--reps", type=int, default=None)
    sim.add_argument("--out", required=True)

    bench = sub.add_parser("bench", help="per-iteration timing over a dimension sweep")
    bench.add_argument("--dims", default="30,50,100,200",
                       help="comma-separated ambient dimensions")
    bench.add_argument("--T", type=int, default=100)
    bench.add_argument("--k", type=int, default=3)
    bench.add_argument("--reps", type=int, default=1)
    bench.add_argument("--seed", type=int, default=0)
    bench.add_argument("--out", required=True)
    return parser


def _load_instance(args):
    if args.moments:
        return load_moment_matrices(args.input)
    samples = load_sources(args.input, source_column=args.source_column)
    return compute_second_moment(samples, center=args.center)


def _cmd_fit(args) -> int:
    m = _load_instance(args)
    report = solve_variant(m, args.k, args.T, args.variant,
                           gap_stride=args.gap_stride, eta_scale=args.eta_scale)
    extra = {"variant": args.variant, "T": args.T}
    if m.count >= 2 and args.k < m.dim:
        eigengap, tight, _ = tightness_check(m, report.omega_avg, args.k,
                                             gap_tol=args.gap_tol)
        extra["eigengap"] = eigengap
        extra["tight"] = tight
    doc, sidecars = report_io.solve_report_doc(report, args.out, labels=m.labels,
                                               extra=extra)
    report_io.write_report(doc, sidecars, args.out)
    print(f"fit: wrote {args.out} (wall time {report.wall_time:.3f}s)", file=sys.stderr)
    return 0


def _cmd_dual(args) -> int:
    m = _load_instance(args)
    report = dual_solve(m, args.k, args.T, gap_tol=args.gap_tol,
                        eta_scale=args.eta_scale)
    doc, sidecars = report_io.dual_report_doc(report, args.out, labels=m.labels,
                                              extra={"T": args.T})
    report_io.write_report(doc, sidecars, args.out)
    print(f"dual: wrote {args.out}", file=sys.stderr)
    return 0


def _cmd_simulate(args) -> int:
    if args.scenario == "settings":
        rows = simulate.run_settings_scenario(
            seed=1 if args.seed is None else args.seed, T=args.T)
    elif args.scenario == "factor":
        reps = 20 if args.reps is None else args.reps
        rows = simulate.run_factor_scenario(
            seed=0 if args.seed is None else args.seed, reps=reps, k=args.k,
            T=args.T, workers=_worker_count(reps))
    elif args.scenario == "certificate-grid":
        reps = 10 if args.reps is None else args.reps
        rows = simulate.run_certificate_grid(
            seed=1 if args.seed is None else args.seed, reps=reps, k=args.k,
            T=args.T, workers=_worker_count(4 * reps))
        # wide table mirroring the reported layout: rows d, columns n
        table = _pivot_certificate(rows)
        report_io.write_rows_csv(table, Path(args.out).with_name(
            Path(args.out).stem + "_table.csv"))
    else:
        reps = 5 if args.reps is None else args.reps
        rows = simulate.run_convergence_scenario(
            seed=0 if args.seed is None else args.seed, reps=reps, k=args.k,
            T=args.T, workers=_worker_count(8 * reps))
    report_io.write_rows_csv(rows, args.out)
    print(f"simulate[{args.scenario}]: wrote {args.out} ({len(rows)} rows)",
          file=sys.stderr)
    return 0


def _pivot_certificate(rows) -> list[dict]:
    dims = sorted({r["d"] for r in rows})
    sizes = sorted({r["n"] for r in rows})
    table = []
    for d in dims:
        entry = {"d": d}
        for n in sizes:
            taus = [r["tau"] for r in rows if r["d"] == d and r["n"] == n]
            entry[f"n{n}"] = float(np.mean(taus))
        table.append(entry)
    return table


def _cmd_bench(args) -> int:
    try:
        dims = [int(x) for x in args.dims.split(",") if x.strip()]
    except ValueError:
        raise RobustMspcaError(f"--dims must be comma-separated integers, got {args.dims!r}")
    rows = []
    for d in dims:
        for rep in range(args.reps):
            spec = simulate.FactorModelSpec(d=d, L=4, n=max(2 * d, 100),
                                            seed=args.seed + rep)
            samples, _, _, _ = simulate.gen_factor_sources(spec)
            m = compute_second_moment(samples)
            start = time.perf_counter()
            report = solve(m, args.k, args.T)
            elapsed = time.perf_counter() - start
            rows.append({"d": d, "rep": rep, "T": args.T, "k": args.k,
                         "seconds_total": elapsed,
                         "seconds_per_iter": elapsed / max(1, report.iterations)})
    rows.sort(key=lambda r: (r["d"], r["rep"]))
    report_io.write_rows_csv(rows, args.out)
    print(f"bench: wrote {args.out}", file=sys.stderr)
    return 0


def run_command(argv) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    handlers = {"fit": _cmd_fit, "dual": _cmd_dual,
                "simulate": _cmd_simulate, "bench": _cmd_bench}
    try:
        return handlers[args.command](args)
    except RobustMspcaError as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"IoError: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run_command(sys.argv[1:]))


if __name__ == "__main__":
    main()

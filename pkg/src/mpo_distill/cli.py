"""Command-line interface: region scans, distillation runs, verification.

Subcommands: region | distill | verify | physmodel | tables.  All commands
are deterministic for fixed flags and seed; grids can be evaluated by a
thread pool capped with the MPO_DISTILL_THREADS environment variable.  Exit
codes: 0 success, 1 verification failure, 2 runtime/gauge failure, 64 usage
error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import flowbounds, oracle, physmodel, protocols
from .mpo import BellMPO

EXIT_OK = 0
EXIT_VERIFY = 1
EXIT_RUNTIME = 2
EXIT_USAGE = 64


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"error: {message}\n")
        sys.exit(EXIT_USAGE)


def _pmap(fn, items):
    """Map preserving order, optionally threaded via MPO_DISTILL_THREADS."""
    workers = int(os.environ.get("MPO_DISTILL_THREADS", "1"))
    if workers <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def _fmt(x: float) -> str:
    return format(float(x), ".12g")


def _parse_grid(spec: str):
    try:
        a, b = spec.lower().split("x")
        n1, n2 = int(a), int(b)
    except ValueError as exc:
        raise UsageError(f"bad grid spec {spec!r}; expected NxM") from exc
    if n1 < 2 or n2 < 2:
        raise UsageError("grid resolution must be >= 2 per axis")
    return n1, n2


def _parse_range(spec: str):
    try:
        lo, hi, n = spec.split(":")
        lo, hi, n = float(lo), float(hi), int(n)
    except ValueError as exc:
        raise UsageError(f"bad range spec {spec!r}; expected lo:hi:n") from exc
    if n < 1:
        raise UsageError("range needs at least one point")
    return np.linspace(lo, hi, n)


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_region(args) -> int:
    n_eps, n_tau = _parse_grid(args.grid)
    eps_grid = np.linspace(0.0, args.eps_max, n_eps)
    tau_grid = np.linspace(0.0, args.tau_max, n_tau)
    points = [(float(e), float(t)) for e in eps_grid for t in tau_grid]
    results = _pmap(
        lambda p: flowbounds.iterate_to_target(p[0], p[1], max_iter=args.max_iter),
        points,
    )
    with open(args.out, "w") as fh:
        fh.write("eps0,tau0,converged,rounds\n")
        for (e, t), (ok, rounds) in zip(points, results):
            fh.write(f"{_fmt(e)},{_fmt(t)},{str(ok).lower()},{rounds}\n")
    curve_path = args.curve_out or args.out + ".curve.csv"
    with open(curve_path, "w") as fh:
        fh.write("tau0,eps_threshold\n")
        for t in tau_grid:
            fh.write(f"{_fmt(t)},{_fmt(flowbounds.analytic_threshold(float(t)))}\n")
    return EXIT_OK


def _load_physmodel_params(path) -> physmodel.PhysicalParams:
    with open(path) as fh:
        doc = json.load(fh)
    return physmodel.PhysicalParams(
        f0=float(doc["F0"]),
        j=float(doc["J"]),
        t=float(doc["t"]),
        c_d=float(doc["cD"]),
        mem_init=doc.get("mem_init", "maximally_mixed"),
    )


def cmd_distill(args) -> int:
    sources = [s for s in (args.mpo, args.werner, args.physmodel) if s is not None]
    if len(sources) != 1:
        raise UsageError("exactly one of --mpo, --werner, --physmodel is required")
    if args.mpo:
        mpo = BellMPO.load(args.mpo)
    elif args.werner is not None:
        if not 0.25 < args.werner <= 1.0:
            raise UsageError("--werner fidelity must lie in (1/4, 1]")
        mpo = BellMPO.werner(args.werner)
    else:
        mpo = physmodel.build_memory_mpo(_load_physmodel_params(args.physmodel))
    trace = protocols.distill_flow(
        mpo, args.protocol, rounds=args.rounds, chain_length=args.chain, seed=args.seed
    )
    doc = trace.to_json_dict()
    payload = json.dumps(doc, sort_keys=True, indent=1)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(payload + "\n")
    else:
        print(payload)
    return EXIT_RUNTIME if trace.status != "ok" else EXIT_OK


def cmd_verify(args) -> int:
    extra = {}
    reports = []
    failed = False
    if args.suite in ("all", "inequalities"):
        reports = oracle.inequality_suite(seed=args.seed, samples=args.samples)
        failed |= any(r.violations > 0 for r in reports)
    if args.suite in ("all", "oracle"):
        mism, worst, checked = oracle.oracle_equivalence_report(
            seed=args.seed, samples=args.oracle_samples
        )
        extra["oracle"] = {
            "mismatches": mism,
            "worst_deviation": worst,
            "checked": checked,
            "samples": args.oracle_samples,
            "seed": args.seed,
        }
        failed |= mism > 0
    if args.suite in ("all", "tables"):
        rep = oracle.tables_report()
        extra["tables"] = rep
        failed |= rep["agreement"] != rep["total"]
        failed |= rep["class_sizes"] != [256, 256, 256, 256]
        failed |= not rep["weight_le1_to_phi_plus"]
    if args.out:
        oracle.write_suite_report(args.out, reports, extra=extra)
    summary = {
        "inequality_violations": sum(r.violations for r in reports),
        **{k: v for k, v in extra.items()},
    }
    print(json.dumps(summary, sort_keys=True, indent=1))
    return EXIT_VERIFY if failed else EXIT_OK


def cmd_physmodel(args) -> int:
    f0s = _parse_range(args.f0_range)
    js = _parse_range(args.j_range)
    points = [(float(f0), float(j)) for f0 in f0s for j in js]

    def one(p):
        return list(
            physmodel.heatmap([p[0]], [p[1]], t=args.t, c_d=args.cd, rounds=args.rounds,
                              chain_length=args.chain)
        )[0]

    rows = _pmap(one, points)
    with open(args.out, "w") as fh:
        fh.write("F0,J,gamma\n")
        for f0, j, gam in rows:
            fh.write(f"{_fmt(f0)},{_fmt(j)},{_fmt(gam) if np.isfinite(gam) else 'nan'}\n")
    return EXIT_OK


def cmd_tables(args) -> int:
    protocols.export_pattern_tables(args.out)
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def build_parser() -> _Parser:
    p = _Parser(prog="mpo-distill", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("region", help="scan the recurrence convergence region")
    r.add_argument("--grid", required=True, help="grid size NxM (eps x tau)")
    r.add_argument("--eps-max", type=float, default=0.25)
    r.add_argument("--tau-max", type=float, default=0.99)
    r.add_argument("--max-iter", type=int, default=200)
    r.add_argument("--out", required=True)
    r.add_argument("--curve-out", default=None, help="analytic curve CSV (default <out>.curve.csv)")
    r.set_defaults(fn=cmd_region)

    d = sub.add_parser("distill", help="run a distillation flow and emit its trace")
    d.add_argument("--mpo", help="BellMPO JSON file")
    d.add_argument("--werner", type=float, help="i.i.d. Werner fidelity")
    d.add_argument("--physmodel", help="physical-model parameter JSON file")
    d.add_argument("--protocol", required=True, choices=["recurrence", "five-qubit"])
    d.add_argument("--rounds", type=int, default=6)
    d.add_argument("--chain", type=int, default=64)
    d.add_argument("--seed", type=int, default=0)
    d.add_argument("--out", default=None)
    d.set_defaults(fn=cmd_distill)

    v = sub.add_parser("verify", help="run verification suites")
    v.add_argument("--suite", default="all", choices=["all", "oracle", "inequalities", "tables"])
    v.add_argument("--seed", type=int, default=0)
    v.add_argument("--samples", type=int, default=1000, help="samples per inequality")
    v.add_argument("--oracle-samples", type=int, default=50)
    v.add_argument("--out", default=None, help="JSON report path")
    v.set_defaults(fn=cmd_verify)

    m = sub.add_parser("physmodel", help="relative-noise heatmap over (F0, J)")
    m.add_argument("--f0-range", required=True, help="lo:hi:n")
    m.add_argument("--j-range", required=True, help="lo:hi:n")
    m.add_argument("--t", type=float, required=True)
    m.add_argument("--cd", type=float, required=True)
    m.add_argument("--rounds", type=int, default=3)
    m.add_argument("--chain", type=int, default=64)
    m.add_argument("--out", required=True)
    m.set_defaults(fn=cmd_physmodel)

    t = sub.add_parser("tables", help="export the pattern classification tables")
    t.add_argument("--out", required=True)
    t.set_defaults(fn=cmd_tables)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except UsageError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_USAGE
    except Exception as exc:  # runtime/gauge failures
        sys.stderr.write(f"runtime failure: {exc}\n")
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())

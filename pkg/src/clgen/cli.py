"""Command line entry point: ``clgen {weights,plan,generate,verify,bench}``.

Exit codes: 0 on success, 1 for usage errors, 2 when a run fails (I/O,
invalid input data, communicator errors or failed verification checks).
"""

from __future__ import annotations

import argparse
import csv
import logging
import sys
from pathlib import Path

from clgen import analysis
from clgen.comm import BACKENDS, CommError, resolve_backend
from clgen.degree_model import (
    WeightError,
    load_weights,
    save_weights,
    synth_constant,
    synth_powerlaw,
    validate,
)
from clgen.edgeio import FORMATS, EdgeFileError
from clgen.partitioner import SCHEMES, make_plan, plan_ucp, plan_ucp_oracle, read_plan, write_plan
from clgen.runtime import GenConfig, run_generate

log = logging.getLogger("clgen")

EXIT_OK, EXIT_USAGE, EXIT_FAIL = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    """argparse exits with 2 on bad usage; we reserve 2 for runtime failures."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _powerlaw_spec(text: str):
    parts = text.split(",")
    if len(parts) != 3:
        raise argparse.ArgumentTypeError("expected gamma,wmin,wmax")
    try:
        return tuple(float(x) for x in parts)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not numbers: {text!r}") from None


def _int_list(text: str):
    try:
        vals = [int(x) for x in text.split(",") if x]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None
    if not vals or min(vals) < 1:
        raise argparse.ArgumentTypeError("values must be positive integers")
    return vals


def _add_source(p: argparse.ArgumentParser, allow_file: bool = True):
    g = p.add_mutually_exclusive_group(required=True)
    if allow_file:
        g.add_argument("--weights", type=Path, help="weight file, one value per line")
    g.add_argument("--powerlaw", type=_powerlaw_spec, metavar="GAMMA,WMIN,WMAX",
                   help="synthesize truncated power-law weights")
    g.add_argument("--constant", type=float, metavar="D", help="synthesize n weights equal to D")
    p.add_argument("--n", type=int, help="number of nodes for synthesized weights")
    p.add_argument("--seed", type=int, default=0, help="seed for all randomness (default 0)")
    if allow_file:
        p.add_argument("--sort-policy", choices=("sort-desc", "require-sorted"), default="sort-desc")


def _load_source(args):
    if getattr(args, "weights", None) is not None:
        return load_weights(args.weights, args.sort_policy)
    if args.n is None:
        raise UsageError("--n is required with --powerlaw/--constant")
    if args.n < 1:
        raise UsageError("--n must be >= 1")
    if args.constant is not None:
        return synth_constant(args.n, args.constant)
    gamma, w_min, w_max = args.powerlaw
    return synth_powerlaw(args.n, gamma, w_min, w_max, args.seed)


def _print_kv(pairs, fh=None):
    fh = fh or sys.stdout
    for k, v in pairs:
        print(f"{k}={v}", file=fh)


# -- subcommands ------------------------------------------------------------

def cmd_weights(args):
    ws = _load_source(args)
    rep = validate(ws)
    if args.out:
        save_weights(ws, args.out)
    else:
        for x in ws.weights:
            print(repr(float(x)))
    _print_kv([("n", rep.n), ("S", repr(rep.sum_S)), ("max_weight", repr(rep.max_weight)),
               ("admissible", int(rep.admissible))], sys.stderr if not args.out else None)
    return EXIT_OK


def cmd_plan(args):
    ws = _load_source(args)
    plan = make_plan(ws, args.scheme, args.procs)
    write_plan(plan, args.out)
    kv = [("scheme", plan.scheme), ("procs", plan.P), ("n", plan.n)]
    if plan.boundaries is not None:
        kv.append(("boundaries", ",".join(str(int(b)) for b in plan.boundaries)))
    _print_kv(kv)
    return EXIT_OK


def cmd_generate(args):
    ws = _load_source(args)
    plan = None
    procs = args.procs
    if args.plan is not None:
        plan = read_plan(args.plan)
        if args.procs_given and plan.P != args.procs:
            raise UsageError(f"--procs {args.procs} disagrees with plan file (P={plan.P})")
        procs = plan.P
    out_dir = Path(args.out) if args.out else None
    config = GenConfig(
        weights=ws,
        scheme=plan.scheme if plan is not None else args.scheme,
        procs=procs,
        seed=args.seed,
        out_dir=out_dir,
        fmt=args.format,
        merge=args.merge,
        relabel=args.relabel,
        plan=plan,
        keep_edges=False,
        store_edges=out_dir is not None,
        backend=args.backend,
    )
    report = run_generate(config)
    if report is None:  # non-root MPI rank
        return EXIT_OK
    sys.stdout.write(report.table())
    sys.stdout.write(report.machine_lines())
    if out_dir is not None:
        (out_dir / "report.txt").write_text(report.machine_lines(), encoding="utf-8")
    return EXIT_OK


def cmd_verify(args):
    ws = _load_source(args)
    P = args.procs
    kv = []
    ok = True

    rep = validate(ws)
    kv += [("n", rep.n), ("S", repr(rep.sum_S)), ("sorted", int(rep.is_sorted)),
           ("admissible", int(rep.admissible))]

    ledger = analysis.verify_inequalities(ws, P)
    for c in ledger.checks:
        kv.append((f"{c.name}", "pass" if c.passed else "fail"))
        ok &= c.passed

    par = plan_ucp(ws, P)
    ref = plan_ucp_oracle(ws, P)
    same = par.same_partition(ref)
    kv.append(("ucp_matches_oracle", int(same)))
    ok &= same
    slack = analysis.ucp_slack(ws, par)
    kv.append(("ucp_balance_slack", f"{slack:.6g}"))
    ok &= slack >= 0

    if not args.no_generate:
        g = run_generate(GenConfig(ws, scheme="ucp", procs=P, seed=args.seed, backend=args.backend))
        hist = analysis.degree_histogram(*g.edges, ws.n)
        fid = analysis.compare_distributions(ws, hist)
        kv += [("total_edges", g.total_edges), ("expected_edges", f"{g.expected_edges:.3f}"),
               ("mean_degree", f"{fid.mean_degree:.6f}"),
               ("expected_mean_degree", f"{fid.expected_mean_degree:.6f}"),
               ("mean_degree_rel_error", f"{fid.mean_rel_error:.6g}"),
               ("max_bin_rel_error", f"{fid.max_flagged_error:.6g}")]
        print(f"{'bin':>16} {'observed':>12} {'expected':>12} {'rel_err':>9}")
        for lo, hi, obs, exp, _, err, flag in fid.rows():
            if obs or exp >= 0.5:
                mark = "*" if flag else " "
                print(f"{f'[{lo},{hi})':>16} {obs:>12.0f} {exp:>12.1f} {err:>9.4f}{mark}")

    if args.census:
        for row in analysis.boundary_census(ws, args.census):
            kv.append((f"census.P{row.P}", f"{row.max_interior},{row.max_held}"))

    if args.csv and not args.no_generate:
        with open(args.csv, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["bin_lo", "bin_hi", "observed", "expected", "expected_degree_hist", "rel_error", "flagged"])
            wr.writerows(fid.rows())

    kv.append(("verify", "pass" if ok else "fail"))
    _print_kv(kv)
    return EXIT_OK if ok else EXIT_FAIL


def cmd_bench(args):
    strong_ws = None
    if not args.weak_only:
        if args.n is None:
            raise UsageError("--n is required for the strong-scaling sweep (or pass --weak-only)")
        strong_ws = analysis.powerlaw_for(args.n, args.avg_degree, args.seed, gamma=args.gamma)
    rows = analysis.bench_scaling(
        strong_ws,
        workers=tuple(args.workers),
        scheme=args.scheme,
        seed=args.seed,
        repeats=args.repeats,
        nodes_per_worker=0 if args.strong_only else args.nodes_per_worker,
        edges_per_worker=args.edges_per_worker,
        csv_path=args.csv,
    )
    sys.stdout.write(analysis.scaling_table(rows))
    for r in rows:
        _print_kv([(f"{r.mode}.P{r.workers}.seconds", f"{r.seconds:.6f}"),
                   (f"{r.mode}.P{r.workers}.ratio", f"{r.ratio:.4f}")])
    return EXIT_OK


# -- parser -----------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    default_backend = None  # resolved later so CLGEN_BACKEND applies
    parser = _Parser(prog="clgen", description="Parallel Chung-Lu graph generator.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("weights", help="synthesize a weight sequence")
    _add_source(p, allow_file=False)
    p.add_argument("--out", type=Path, help="output file (stdout when omitted)")
    p.set_defaults(func=cmd_weights)

    p = sub.add_parser("plan", help="compute a partition plan and write it to a file")
    _add_source(p)
    p.add_argument("--scheme", choices=SCHEMES, default="ucp")
    p.add_argument("--procs", type=int, default=1)
    p.add_argument("--out", type=Path, required=True, help="plan file to write")
    p.set_defaults(func=cmd_plan)

    p = sub.add_parser("generate", help="generate a graph")
    _add_source(p)
    p.add_argument("--scheme", choices=SCHEMES, default="ucp")
    p.add_argument("--procs", type=int, default=None, help="number of ranks (default 1)")
    p.add_argument("--out", type=Path, help="output directory for edge files and report")
    p.add_argument("--format", choices=FORMATS, default="text")
    p.add_argument("--merge", action="store_true", help="also write one merged edge file")
    p.add_argument("--relabel", action="store_true", help="write edges with input labels")
    p.add_argument("--plan", type=Path, help="use a plan file written by 'plan'")
    p.add_argument("--backend", choices=BACKENDS, default=default_backend)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("verify", help="check cost inequalities, UCP plan and degree fidelity")
    _add_source(p)
    p.add_argument("--procs", type=int, default=4)
    p.add_argument("--no-generate", action="store_true", help="skip the generation-based checks")
    p.add_argument("--census", type=_int_list, metavar="P1,P2,...",
                   help="report boundaries per rank block for these P")
    p.add_argument("--csv", type=Path, help="write the degree-bin comparison as CSV")
    p.add_argument("--backend", choices=BACKENDS, default=default_backend)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("bench", help="strong and weak scaling sweeps")
    p.add_argument("--n", type=int, help="nodes for the strong-scaling input")
    p.add_argument("--avg-degree", type=float, default=40.0, help="mean weight of the strong input")
    p.add_argument("--gamma", type=float, default=2.5)
    p.add_argument("--workers", type=_int_list, default=[1, 2, 4, 8])
    p.add_argument("--scheme", choices=SCHEMES, default="ucp")
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--repeats", type=int, default=3)
    p.add_argument("--nodes-per-worker", type=int, default=100_000)
    p.add_argument("--edges-per-worker", type=float, default=1e6)
    mode = p.add_mutually_exclusive_group()
    mode.add_argument("--strong-only", action="store_true")
    mode.add_argument("--weak-only", action="store_true")
    p.add_argument("--csv", type=Path, help="write rows as CSV")
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if hasattr(args, "procs"):
        args.procs_given = args.procs is not None
        if args.procs is None:
            args.procs = 1
        if args.procs < 1:
            parser.error("--procs must be >= 1")
    try:
        if hasattr(args, "backend"):
            args.backend = resolve_backend(args.backend)
        return args.func(args)
    except UsageError as exc:
        parser.error(str(exc))
    except (WeightError, EdgeFileError, CommError, OSError, ValueError) as exc:
        print(f"clgen: error: {exc}", file=sys.stderr)
        return EXIT_FAIL
    return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())

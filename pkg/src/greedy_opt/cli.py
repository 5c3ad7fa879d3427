"""Command-line entry point: ``greedy-opt {run,verify,trace}``.

Exit codes: 0 success, 1 fatal error, 2 partial results (some seeds failed),
64 usage error.
"""
import argparse
import json
import os
import sys
import warnings

from . import experiments, invariants
from .experiments import ExperimentConfig, gen_example
from .greedy import ALGORITHMS, ErrorSchedule, GreedyRunError, GreedyTrace, StopRule, run
from .greedy import verify_conditions

EXIT_OK, EXIT_FATAL, EXIT_PARTIAL, EXIT_USAGE = 0, 1, 2, 64
BIORTH_HEAD = "<E'(G),G>"


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _algorithms(text):
    algs = tuple(a.strip() for a in text.split(",") if a.strip())
    bad = [a for a in algs if a not in experiments.ALL_ALGORITHMS]
    if bad:
        raise argparse.ArgumentTypeError(f"unknown algorithm(s): {', '.join(bad)}")
    return algs


def _errors(text):
    try:
        ErrorSchedule.parse(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None
    return text


def _weakness(text):
    t = float(text)
    if not 0.0 < t <= 1.0:
        raise argparse.ArgumentTypeError("weakness must lie in (0, 1]")
    return t


def _positive(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return v


def default_out():
    return os.environ.get("GREEDY_OPT_OUT", "./out")


def build_parser():
    p = _Parser(prog="greedy-opt",
                description="Weak biorthogonal greedy algorithms: benchmarks and checks.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    r = sub.add_parser("run", help="run a multi-seed benchmark and write CSV/JSON/SVG")
    r.add_argument("--example", type=int, choices=[1, 2, 3, 4], required=True)
    r.add_argument("--sims", type=_positive, default=None,
                   help="number of simulations (default 20, or 100 with --paper-scale)")
    r.add_argument("--seed", type=int, default=0, help="base seed; sim i uses seed + i")
    r.add_argument("--max-sparsity", type=_positive, default=None,
                   help="sparsity target (default 50, 100 for example 4)")
    r.add_argument("--algorithms", type=_algorithms, default=experiments.ALL_ALGORITHMS,
                   help="comma-separated subset of wcga,wgafr,rwrga,l1")
    r.add_argument("--weakness", type=_weakness, default=1.0)
    r.add_argument("--errors", type=_errors, default="none",
                   help="error schedule: none | power:c,q | constant:delta,eps")
    r.add_argument("--dim-override", type=_positive, default=None)
    r.add_argument("--out", default=None, help="output directory (env GREEDY_OPT_OUT, ./out)")
    r.add_argument("--paper-scale", action="store_true",
                   help="full dimensions and 100 simulations")
    r.add_argument("--workers", type=_positive, default=os.cpu_count() or 1)

    v = sub.add_parser("verify", help="run the invariant suites")
    g = v.add_mutually_exclusive_group()
    g.add_argument("--example", type=int, choices=[1, 2, 3, 4])
    g.add_argument("--quick", action="store_true")
    g.add_argument("--trace", help="check a saved JSON trace instead")
    v.add_argument("--seed", type=int, default=0)
    v.add_argument("--tol", type=float, default=invariants.BIORTH_TOL)

    t = sub.add_parser("trace", help="trace one run and print its iterations")
    t.add_argument("--algorithm", choices=ALGORITHMS, required=True)
    t.add_argument("--example", type=int, choices=[1, 2, 3, 4], required=True)
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--iters", type=_positive, default=10)
    t.add_argument("--errors", type=_errors, default="none")
    t.add_argument("--dim-override", type=_positive, default=None)
    t.add_argument("--paper-scale", action="store_true")
    t.add_argument("--out", default=None)
    return p


def _echo(args):
    items = {k: v for k, v in vars(args).items() if k != "command"}
    print(f"# {args.command} " + " ".join(f"{k}={v}" for k, v in items.items()), flush=True)


def cmd_run(args):
    _echo(args)
    max_sparsity = args.max_sparsity or experiments.PAPER_TARGET_SPARSITY[args.example]
    sims = args.sims or (100 if args.paper_scale else 20)
    config = ExperimentConfig(args.example, n_sims=sims, base_seed=args.seed,
                              max_sparsity=max_sparsity, algorithms=args.algorithms,
                              weakness=args.weakness, errors=args.errors,
                              dim=args.dim_override, paper_scale=args.paper_scale,
                              workers=args.workers)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        report, results = experiments.run_batch(config)
    paths = experiments.write_outputs(config, report, results, args.out or default_out())
    for alg, it in report.mean_iterations.items():
        shown = "n/a" if it is None else f"{it:.1f}"
        print(f"{alg:6s} mean iterations to sparsity {report.max_sparsity}: {shown}")
    for kind, path in paths.items():
        print(f"wrote {kind}: {path}")
    if report.failed_seeds:
        print(f"{len(report.failed_seeds)} seed(s) failed: {report.failed_seeds}",
              file=sys.stderr)
        return EXIT_PARTIAL
    return EXIT_OK


def _print_table(checks):
    width = max(len(c.name) for c in checks)
    for c in checks:
        print(f"{c.name:<{width}}  {'PASS' if c.passed else 'FAIL'}  {c.detail}")


def cmd_verify(args):
    _echo(args)
    if args.trace:
        trace = GreedyTrace.load(args.trace)
        rep = verify_conditions(trace, tol=args.tol)
        checks = [invariants.CheckResult(f"condition:{k}", v == 0, f"{v} failing iterations")
                  for k, v in rep.summary().items()]
    else:
        seeds = range(args.seed, args.seed + (3 if args.quick else 5))
        example = args.example or 3
        checks = invariants.suite(example, seeds, with_lemma=True,
                                  with_coincidence=args.quick or example == 4)
    _print_table(checks)
    return EXIT_OK if all(c.passed for c in checks) else EXIT_FATAL


def cmd_trace(args):
    _echo(args)
    dim = None if args.paper_scale else (args.dim_override or experiments.DESK_DIM[args.example])
    dic, obj, _ = gen_example(args.example, args.seed, dim=dim)
    errors = ErrorSchedule.parse(args.errors)
    trace = run(args.algorithm, obj, dic, errors=errors, stop=StopRule(max_iters=args.iters),
                seed=args.seed, meta={"example": args.example, "seed": args.seed})
    print(f"{'m':>4} {'atom':>5} {'sign':>4}  {'step':<34} {'E(G_m)':>22} {BIORTH_HEAD:>11}")
    for r in trace.records:
        step = " ".join(f"{k}={v:.4g}" for k, v in r.step_params.items()
                        if k in ("lambda", "omega", "mu"))
        print(f"{r.m:>4} {r.choice.index:>5} {r.choice.sign:>+4d}  {step:<34} "
              f"{r.e_value:>22.15e} {r.biorth_residual:>11.2e}")
    out = args.out or default_out()
    os.makedirs(out, exist_ok=True)
    path = os.path.join(out, f"trace_{args.algorithm}_example{args.example}_seed{args.seed}.json")
    trace.save(path)
    print(f"stop: {trace.stop_reason}; wrote {path}")
    return EXIT_OK


COMMANDS = {"run": cmd_run, "verify": cmd_verify, "trace": cmd_trace}


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    try:
        return COMMANDS[args.command](args)
    except (GreedyRunError, OSError, ValueError, json.JSONDecodeError, KeyError) as exc:
        print(f"greedy-opt: error: {exc}", file=sys.stderr)
        return EXIT_FATAL


if __name__ == "__main__":
    sys.exit(main())

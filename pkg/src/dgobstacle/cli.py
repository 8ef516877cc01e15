"""Command line entry point: ``dgobstacle run`` and ``dgobstacle verify``."""
import argparse
import logging
import sys

from .assembly import METHODS, MethodConfig
from .driver import InvariantError, adaptive_solve, fit_slope, write_outputs
from .problems import builtin_example
from .solver import NonConvergenceError, SolverError

EXIT_OK, EXIT_USAGE, EXIT_NONCONVERGENCE = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on bad usage; 2 is reserved for solver failure here
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser():
    p = _Parser(prog="dgobstacle", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true", help="log every iteration")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    r = sub.add_parser("run", help="adaptive solve of a built-in example")
    r.add_argument("--example", type=int, choices=(1, 2), default=1)
    r.add_argument("--f-variant", type=int, choices=(0, -15), default=-15,
                   help="load of example 2")
    r.add_argument("--degree", type=int, choices=(1, 2), default=1)
    r.add_argument("--constraints", choices=("integral", "quadrature"), default="integral")
    r.add_argument("--method", choices=tuple(METHODS), default="sipg")
    r.add_argument("--penalty", type=float, default=None,
                   help="interior penalty (default 45 SIPG, 20 NIPG, 30 IIPG)")
    r.add_argument("--gamma", type=float, default=0.4, help="maximum marking parameter")
    r.add_argument("--max-dofs", type=int, default=None)
    r.add_argument("--max-iters", type=int, default=40)
    r.add_argument("--out", required=True, help="output directory")
    r.add_argument("--emit-meshes", action="store_true", help="write one VTK file per iteration")
    r.add_argument("--seed", type=int, default=0,
                   help="recorded for reproducibility; the run itself is deterministic")

    v = sub.add_parser("verify", help="run the oracle and property checks")
    v.add_argument("--seed", type=int, default=0)
    return p


def _run(args):
    try:
        cfg = MethodConfig.from_names(args.method, args.degree, args.constraints, args.penalty)
        kw = {"gamma": args.gamma, "max_iters": args.max_iters}
        if args.max_dofs is not None:
            kw["max_dofs"] = args.max_dofs
        spec = builtin_example(args.example, args.f_variant, cfg, **kw)
    except ValueError as exc:
        print(f"dgobstacle: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    if args.max_iters < 1 or spec.max_dofs < 1:
        print("dgobstacle: error: stopping limits must be positive", file=sys.stderr)
        return EXIT_USAGE
    extra = {"seed": args.seed, "emit_meshes": args.emit_meshes}
    code = EXIT_OK
    try:
        rec = adaptive_solve(spec, keep_meshes=args.emit_meshes)
    except (NonConvergenceError, SolverError, InvariantError) as exc:
        rec = getattr(exc, "record", None)
        print(f"dgobstacle: solver failure: {exc}", file=sys.stderr)
        code = EXIT_NONCONVERGENCE
        if rec is None:
            return code
    try:
        paths = write_outputs(rec, args.out, spec, args.emit_meshes, extra)
    except OSError as exc:
        print(f"dgobstacle: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    last = rec.rows[-1] if rec.rows else None
    if last is not None:
        msg = f"{len(rec.rows)} iterations, {last['dofs']} dofs, eta {last['eta_total']:.4e}"
        if last["error_linf"] is not None:
            msg += f", error {last['error_linf']:.4e}"
        if len(rec.rows) >= 5:
            msg += f", eta slope {fit_slope(rec.column('dofs'), rec.column('eta_total')):.3f}"
        print(msg)
    print(f"status: {rec.status}; wrote {len(paths)} files to {args.out}")
    return code


def _verify(args):
    from .verify import run_all
    results = run_all(seed=args.seed)
    for r in results:
        print(r.line())
    return EXIT_OK if all(r.passed for r in results) else EXIT_USAGE


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command == "run":
        return _run(args)
    return _verify(args)


if __name__ == "__main__":
    sys.exit(main())

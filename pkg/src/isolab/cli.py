"""Command-line entry point: ``isolab <subcommand> ...``.

Exit status is 0 on success, 1 for invalid input or configuration and 2 when
a numerical routine fails.
"""

from __future__ import annotations

import argparse
import logging
import sys

from . import harness
from .errors import NumericalError, ValidationError

EXIT_OK, EXIT_VALIDATION, EXIT_NUMERICAL = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_VALIDATION, f"{self.prog}: error: {message}\n")


def _tags(text: str) -> tuple[str, ...]:
    return tuple(t.strip() for t in text.split(",") if t.strip())


def _ints(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(t) for t in _tags(text))
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from exc


def _common(p: argparse.ArgumentParser, config: bool = True) -> None:
    if config:
        p.add_argument("--config", help="flat key = value file (esn., cs., rng., out. keys)")
        p.add_argument("--methods", type=_tags, help="comma-separated, e.g. M1,M2")
        p.add_argument("--scalings", type=_tags, help="comma-separated, e.g. R1,R2")
    p.add_argument("--out", help="output directory")
    p.add_argument("--seed", type=int, help="base seed (unsigned 64-bit)")
    p.add_argument("--reps", type=int, help="repetitions per pair")
    p.add_argument("--threads", type=int, help=f"worker processes (default: ${harness.THREADS_ENV} or all cores)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="isolab", description="Reservoir and sparse-recovery experiment grids.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("esn-grid", help="echo state network classification grid")
    _common(p)
    acc = p.add_mutually_exclusive_group()
    acc.add_argument("--held-out", dest="accuracy", action="store_const", const="held-out",
                     help="report accuracy on fresh noise realizations (default)")
    acc.add_argument("--train-acc", dest="accuracy", action="store_const", const="train",
                     help="report training-set accuracy")

    p = sub.add_parser("cs-grid", help="sparse recovery grid")
    _common(p)
    p.add_argument("--noise-as-variance", action="store_true", default=None,
                   help="read the noise level as a variance instead of a standard deviation")
    p.add_argument("--constraint", choices=("correlation", "residual"))
    p.add_argument("--estimator", choices=("gauss-dantzig", "dantzig"))
    p.add_argument("--table2-r4-as", choices=("R5", "R4strict"))

    p = sub.add_parser("isometry", help="near-isometry interval against matrix size")
    _common(p, config=False)
    p.add_argument("--method", type=_tags, default=("M3",), help="comma-separated; I is the identity")
    p.add_argument("--n", type=_ints, default=(50, 100, 200, 400), help="comma-separated sizes")
    p.add_argument("--scaling", type=_tags, default=("R1", "R2"))
    p.add_argument("--samples", type=int, default=None)

    sub.add_parser("selfcheck", help="oracle comparisons for the numerical kernels")
    return parser


def _config_from_args(args) -> harness.ExperimentConfig:
    common = dict(seed=args.seed, repetitions=args.reps, out_dir=args.out)
    if args.command == "isometry":
        sweep = {"sizes": args.n}
        if args.samples is not None:
            sweep["samples"] = args.samples
        return harness.build_config("isometry-sweep", methods=args.method, scalings=args.scaling,
                                    sweep=sweep, **common)
    values = harness.load_config_file(args.config) if args.config else {}
    mode = args.command
    common.update(methods=args.methods, scalings=args.scalings)
    if mode == "esn-grid":
        over = {"accuracy": args.accuracy} if args.accuracy else {}
        return harness.build_config(mode, values, esn=over, **common)
    over = {k: v for k, v in (("noise_as_variance", args.noise_as_variance),
                              ("constraint", args.constraint),
                              ("estimator", args.estimator),
                              ("table2_r4_as", args.table2_r4_as)) if v is not None}
    return harness.build_config(mode, values, cs=over, **common)


def _selfcheck() -> int:
    from .selfcheck import run_all
    checks = run_all(print)
    failed = [c for c in checks if not c.passed]
    print(f"{len(checks) - len(failed)}/{len(checks)} checks passed")
    return EXIT_OK if not failed else EXIT_NUMERICAL


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "selfcheck":
            return _selfcheck()
        cfg = _config_from_args(args)
        result = harness.run(cfg, args.threads)
        for path in harness.emit_results(result, cfg.out_dir, cfg.formats):
            print(path)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())

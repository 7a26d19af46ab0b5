"""Command line front end.

Exit codes: 0 success, 1 validation failure, 2 configuration or input error.
"""

from __future__ import annotations

import argparse
import logging
import sys

from .harness import (
    ConfigError,
    ExperimentConfig,
    run_autocorr,
    run_bounds,
    run_ids,
    run_kmc,
    run_report,
    run_validate,
)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="glauber1d",
        description="Spectral and Monte Carlo runs for the random-coupling chain",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, needs_out=True):
        p.add_argument("--config", required=True, help="JSON config file")
        if needs_out:
            p.add_argument("--out", required=True, help="output file path")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        p.add_argument("--threads", type=int, default=None, help="override the config thread count")
        p.add_argument("--quiet", action="store_true", help="suppress progress logging")

    common(sub.add_parser("ids", help="Monte Carlo integrated density of states"))
    p_auto = sub.add_parser("autocorr", help="disorder-averaged spin autocorrelation")
    common(p_auto)
    p_auto.add_argument(
        "--dump-realizations",
        default=None,
        metavar="PATH",
        help="also write one JSON line per realization",
    )
    common(sub.add_parser("kmc", help="kinetic Monte Carlo vs exact finite chain"))
    common(sub.add_parser("bounds", help="tabulate the long-time decay envelopes"))
    common(sub.add_parser("validate", help="run the invariant self-checks"), needs_out=False)
    common(sub.add_parser("report", help="fit slopes/constants from earlier runs"))
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING if args.quiet else logging.INFO,
        format="%(message)s",
        stream=sys.stderr,
    )
    try:
        cfg = ExperimentConfig.from_file(args.config).with_overrides(args.seed, args.threads)
        if args.command == "ids":
            run_ids(cfg, args.out)
        elif args.command == "autocorr":
            run_autocorr(cfg, args.out, dump_path=args.dump_realizations)
        elif args.command == "kmc":
            run_kmc(cfg, args.out)
        elif args.command == "bounds":
            run_bounds(cfg, args.out)
        elif args.command == "report":
            run_report(cfg, args.out)
        elif args.command == "validate":
            results = run_validate(cfg)
            ok = True
            for res in results:
                print(f"{'PASS' if res.ok else 'FAIL'} {res.name}: {res.detail}")
                ok &= res.ok
            return 0 if ok else 1
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())

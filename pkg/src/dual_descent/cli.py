"""Command line entry point: ``dual-descent {solve,semiconv,compare,sure,verify}``."""
from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from . import harness
from .solver import ConfigurationError, DivergenceError

EXIT_OK, EXIT_FAIL, EXIT_VALIDATION, EXIT_DIVERGENCE = 0, 1, 2, 3


def _parser():
    p = argparse.ArgumentParser(prog="dual-descent", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, config=True):
        if config:
            sp.add_argument("--config", required=True, help="JSON experiment config")
        sp.add_argument("--out", default=None, help="output directory")
        sp.add_argument("--seed", type=int, default=None, help="override the config seed")
        sp.add_argument("--max-iters", type=int, default=None, help="override max_iters")

    common(sub.add_parser("solve", help="single run with trace, checkpoints and stop report"))
    common(sub.add_parser("semiconv", help="ground-truth gap curves over a noise-level sweep"))
    cmp_ = sub.add_parser("compare", help="vanilla vs warm-restart table")
    cmp_.add_argument("--config", required=True, nargs=2, metavar=("VANILLA", "WARM"))
    common(cmp_, config=False)
    common(sub.add_parser("sure", help="SURE curve and min-slope stopping index"))
    common(sub.add_parser("verify", help="run the numerical diagnostics suite"), config=False)
    return p


def _load(path, args):
    return harness.load_config(path, {"seed": args.seed, "max_iters": args.max_iters})


def main(argv=None):
    args = _parser().parse_args(argv)
    try:
        if args.command == "verify":
            from .verify import run_suite

            rows = run_suite(seed=args.seed or 0)
            width = max(len(name) for name, _, _ in rows)
            for name, ok, detail in rows:
                print(f"{name:<{width}}  {'PASS' if ok else 'FAIL'}  {detail}")
            return EXIT_OK if all(ok for _, ok, _ in rows) else EXIT_FAIL
        if args.command == "compare":
            a, b = (_load(c, args) for c in args.config)
            rows = harness.cli_compare(a, b, args.out)
            print(harness.format_table(rows), end="")
            return EXIT_OK
        cfg = _load(args.config, args)
        if args.command == "solve":
            res = harness.cli_solve(cfg, args.out)
            print(f"iterations={len(res.trace)} n_bar={res.n_bar} gtg={res.gtg_report.value:.6e} "
                  f"delta={res.cert.delta:.6e} tau={res.tau:.6e}")
        elif args.command == "semiconv":
            rows = harness.cli_semiconvergence(cfg, args.out)
            for r in rows:
                print(f"scale={r['scale']:g} delta={r['delta']:.6e} n_bar={r['n_bar']} "
                      f"gtg_min={r['gtg_min']:.6e} interior={r['interior']}")
            print(f"n_bar nondecreasing as delta decreases: {harness.n_bar_monotone(rows)}")
        elif args.command == "sure":
            res = harness.solve(cfg, with_sure=True)
            if args.out:
                harness.write_artifacts(res, args.out)
                np.savetxt(os.path.join(args.out, "sure.csv"), np.column_stack([res.trace.n, res.trace.sure]),
                           delimiter=",", header="n,sure", comments="", fmt=["%d", "%.17g"])
            print(f"n_hat={res.n_hat} n_bar={res.n_bar}")
        return EXIT_OK
    except DivergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DIVERGENCE
    except (harness.ValidationError, ConfigurationError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())

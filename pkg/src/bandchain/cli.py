"""Command-line front end.

Exit codes: 0 success, 1 operational error (bad spec, assumption violated),
2 indeterminate rate classification, 3 oracle disagreement.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .analysis import (
    EXIT_ERROR,
    AnalysisConfig,
    analyze,
    run_sweep,
    verify,
)
from .errors import BandChainError
from .io import dumps_report, write_sweep_csv

log = logging.getLogger("bandchain")


def _k_grid(text: str) -> tuple:
    try:
        return tuple(int(x) for x in text.split(",") if x.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"--k-grid expects integers like 25,50,100: {text!r}")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--spec", required=True, metavar="PATH", help="chain-spec JSON file")
    common.add_argument("--k-grid", type=_k_grid, default=(25, 50, 100, 200), metavar="a,b,c")
    common.add_argument("--unit-tol", type=float, default=1e-9, metavar="X")
    common.add_argument("--margin", type=float, default=0.01, metavar="X",
                        help="decision margin around alpha0")
    common.add_argument("--horizon", type=int, default=200, metavar="N")
    common.add_argument("--seed", type=int, default=0, metavar="N")
    common.add_argument("--out", metavar="DIR", help="directory for report, CSV and figures")
    common.add_argument("--figures", action="store_true",
                        help="also render PNG figures into --out")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="bandchain",
                                description="Convergence-rate certificates for band Markov chains.")
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("analyze", parents=[common], help="full analysis, JSON report")
    sub.add_parser("sweep", parents=[common], help="rho_k sweep as CSV")
    sub.add_parser("verify", parents=[common], help="oracle cross-checks")
    return p


def _config(args) -> AnalysisConfig:
    return AnalysisConfig(spec=args.spec, k_grid=args.k_grid, unit_tol=args.unit_tol,
                          decision_margin=args.margin, horizon=args.horizon, seed=args.seed,
                          out=args.out, figures=args.figures)


def _emit(text: str, out: str | None, name: str) -> None:
    if out:
        d = Path(out)
        d.mkdir(parents=True, exist_ok=True)
        (d / name).write_text(text)
    sys.stdout.write(text)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = _config(args)
        if args.command == "analyze":
            report, code = analyze(cfg)
            _emit(dumps_report(report) + "\n", args.out, "report.json")
            log.info("case %s", report["rate"]["case"])
            return code
        if args.command == "sweep":
            kernel, results = run_sweep(cfg)
            if args.out:
                d = Path(args.out)
                d.mkdir(parents=True, exist_ok=True)
                with open(d / "sweep.csv", "w", newline="") as fh:
                    write_sweep_csv(results, fh)
                if args.figures:
                    from . import plotting
                    from .bounds import alpha0_closed_form, solve_tau

                    law = kernel.limit_law
                    plotting.plot_sweep(results, alpha0_closed_form(law, solve_tau(law)),
                                        d / "sweep.png", cfg.decision_margin)
            write_sweep_csv(results, sys.stdout)
            return 0
        report, code = verify(cfg)
        _emit(dumps_report(report) + "\n", args.out, "verify.json")
        return code
    except (BandChainError, FileNotFoundError) as exc:
        print(f"bandchain: error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())

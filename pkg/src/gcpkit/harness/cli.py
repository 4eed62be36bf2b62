"""``gcpkit`` command line.

    gcpkit pmf --process gcp --k 2 --lambda 1,1 --t 1 --n-max 20
    gcpkit simulate --process gfcp --lambda 1,1 --beta 0.7 --sims 100000 --seed 7
    gcpkit verify reduction-lattice

Exit codes: 0 success, 2 usage error, 3 numerical failure, 4 goodness-of-fit
gate failure.  Failures print a one-line JSON diagnostic on stderr.
"""

from __future__ import annotations

import argparse
import json
import sys

from ..errors import EvaluationError, ParameterError
from .config import ENV_PREFIX, SUITES, build_config
from .output import write_result
from .suites import VERIFY_TARGETS, run_suite

EXIT_OK, EXIT_USAGE, EXIT_NUMERICAL, EXIT_GOF = 0, 2, 3, 4

PROCESSES = ("gcp", "gfcp", "ngcp", "ngfcp", "tcgcp", "tcgfcp", "gsfcp", "gsmcp", "gstfcp",
             "mfa", "tfnb", "stfpp")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        _diagnose("usage", message)
        self.print_usage(sys.stderr)
        sys.exit(EXIT_USAGE)


def make_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="gcpkit", description="Generalized counting processes: evaluate, simulate, verify.",
                 epilog=f"Every flag can also be set through an environment variable {ENV_PREFIX}<FLAG> "
                        f"(e.g. {ENV_PREFIX}SEED, {ENV_PREFIX}N_MAX) or a TOML file given with --config.",
                 argument_default=argparse.SUPPRESS)
    ap.add_argument("suite", choices=SUITES)
    ap.add_argument("target", nargs="?", help=f"verify target: {', '.join(VERIFY_TARGETS)}")
    ap.add_argument("--config", help="TOML file with default settings")
    ap.add_argument("--process", choices=PROCESSES)
    ap.add_argument("--k", type=int, help="number of jump sizes (checked against --lambda)")
    ap.add_argument("--lambda", dest="lambda",
                    help="rates: '1,1' for homogeneous processes, 'linear:1,0;constant:2' for ngcp/ngfcp")
    ap.add_argument("--beta", type=float)
    ap.add_argument("--alpha", type=float)
    ap.add_argument("--bernstein", help="e.g. 'gamma:1,1' or 'stable:0.7'")
    ap.add_argument("--beta-profile", help="e.g. 'linear:0.4,0.3' or 'constant:0.6'")
    ap.add_argument("--t", type=float)
    ap.add_argument("--t-grid", help="comma-separated times")
    ap.add_argument("--n-max", type=int)
    ap.add_argument("--sims", type=int)
    ap.add_argument("--seed", type=int)
    ap.add_argument("--out")
    ap.add_argument("--format", choices=("csv", "jsonl"))
    ap.add_argument("--workers", type=int)
    ap.add_argument("--u", help="pgf arguments")
    ap.add_argument("--level", type=int, help="first passage level")
    ap.add_argument("--c", type=float, help="premium rate (ruin)")
    ap.add_argument("--claims", help="exp:theta, det:d or lattice:unit:p0,p1,...")
    ap.add_argument("--u-grid", help="initial capitals (ruin)")
    ap.add_argument("--y-grid", help="deficit levels (ruin); 'inf' gives the ruin probability")
    ap.add_argument("--horizon", type=float)
    ap.add_argument("--k-stat", type=int, help="order statistic index")
    ap.add_argument("--f-at-z", type=float, help="F(z) for order statistics")
    ap.add_argument("--s", type=float, help="base time for correlations (lrd)")
    return ap


def _diagnose(kind: str, message: str, **extra) -> None:
    sys.stderr.write(json.dumps({"error": kind, "message": message, **extra}) + "\n")


def main(argv=None) -> int:
    args = vars(make_parser().parse_args(argv))
    if args.get("target") is None:
        args.pop("target", None)
    try:
        cfg = build_config(args)
        result = run_suite(cfg)
    except ParameterError as exc:
        _diagnose("usage", str(exc))
        return EXIT_USAGE
    except (EvaluationError, ArithmeticError) as exc:
        _diagnose("numerical", str(exc), type=type(exc).__name__)
        return EXIT_NUMERICAL
    write_result(result, cfg)
    if result.check_failed:
        _diagnose("numerical", "an invariant check failed", suite=cfg.suite)
        return EXIT_NUMERICAL
    if result.gof_failed:
        _diagnose("gof", "a goodness-of-fit gate failed", suite=cfg.suite)
        return EXIT_GOF
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())

"""
towerlab command line

    towerlab <subcommand> [--config path.json] [--override key=value]... [flags]

Exit codes: 0 all checks passed, 2 a scientific check failed, 1 execution
error (bad config, I/O, solver breakdown). The registry root is taken from
TOWERLAB_REGISTRY.
"""

import argparse
import json
import logging
import sys
from typing import List, Optional

from .core.exceptions import TowerLabError
from .harness import Registry, load_config, report, run
from .utils.constants import DomainKinds, ExitCodes, ExperimentKinds, REGISTRY_ENV, SolverMethods

logger = logging.getLogger("towerlab")

EPILOGS = {
    ExperimentKinds.PARAMS: "Payload: per-lambda table (i, alpha, delta, log_delta, d, exponent).",
    ExperimentKinds.ANSATZ: "Payload: boundary value, evenness defect, W range per lambda; "
                            "Theta certificate constants and their max/min spread per level.",
    ExperimentKinds.RESIDUAL_SCAN: "Report CSV columns: ln_lambda, ln_norm, ln_reference "
                                   "(predicted slope through the first point).",
    ExperimentKinds.LINEAR_SPECTRUM: "Payload columns: lambda, mode, sigma_min, sigma_min_log; the full sector "
                                     "adds sigma_min on a 2x refined mesh at the smallest lambda.",
    ExperimentKinds.SOLVE: "Profile CSV columns (with --output): r, u, W, phi.",
    ExperimentKinds.LIMIT_CHECKS: "Payload: limit masses, kernel integrals, stereographic "
                                  "ratios per alpha.",
}


def _experiment_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="RunConfig JSON file")
    parser.add_argument("--override", action="append", default=[], metavar="KEY=VALUE",
                        help="Dotted-key override, repeatable (value parsed as JSON)")
    parser.add_argument("--k", type=int, help="Number of bubbles")
    parser.add_argument("--lambda", dest="lam", type=float, help="Single lambda")
    parser.add_argument("--lambda-from", dest="lambda_from", type=float, help="Sweep start")
    parser.add_argument("--lambda-to", dest="lambda_to", type=float, help="Sweep end")
    parser.add_argument("--points", type=int, help="Sweep points (geometric)")
    parser.add_argument("--domain", choices=DomainKinds.ALL)
    parser.add_argument("--p", type=float, nargs="+", help="L^p exponents")
    parser.add_argument("--modes", type=int, nargs="+", help="Fourier modes")
    parser.add_argument("--method", choices=SolverMethods.ALL)
    parser.add_argument("--tol", type=float)
    parser.add_argument("--output", help="Directory for CSV side outputs")
    parser.add_argument("--workers", type=int, help="Worker threads for sweep points")
    parser.add_argument("--seed", type=int)
    parser.add_argument("-v", "--verbose", action="store_true", help="Debug logging")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="towerlab",
        description="Numerical verification harness for sign-changing bubble towers of "
                    "-Laplace u = lambda (e^u - e^-u).",
        epilog=f"Records are written under ${REGISTRY_ENV} (default ./towerlab-registry).")
    sub = parser.add_subparsers(dest="command", required=True)
    for kind in ExperimentKinds.ALL:
        _experiment_flags(sub.add_parser(kind, help=f"Run a {kind} experiment",
                                         epilog=EPILOGS[kind]))
    rep = sub.add_parser("report", help="Collate registry records into CSV/JSON",
                         epilog="CSV columns: ln_lambda, ln_norm, ln_reference; footer lines "
                                "give fitted and predicted slopes.")
    rep.add_argument("--kind", choices=ExperimentKinds.ALL)
    rep.add_argument("--k", type=int)
    rep.add_argument("--verdict", choices=["pass", "fail"])
    rep.add_argument("--output", default="towerlab-report", help="Output directory")
    rep.add_argument("-v", "--verbose", action="store_true", help="Debug logging")
    return parser


def overrides_from_args(args: argparse.Namespace) -> List[str]:
    """Translate shorthand flags into dotted-key overrides (applied after --override)"""
    out = list(args.override) + [f"kind={args.command}"]

    def add(key, value):
        out.append(f"{key}={json.dumps(value)}")

    if args.k is not None:
        add("k", args.k)
    if args.lam is not None:
        add("lambda", args.lam)
        add("sweep", None)
    sweep = (args.lambda_from, args.lambda_to, args.points)
    if any(v is not None for v in sweep):
        if not all(v is not None for v in sweep):
            raise TowerLabError("--lambda-from, --lambda-to and --points go together")
        add("sweep", {"from": args.lambda_from, "to": args.lambda_to, "points": args.points})
        add("lambda", None)
    if args.domain is not None:
        add("domain.kind", args.domain)
    for key, value in (("p", args.p), ("modes", args.modes), ("method", args.method),
                       ("tol", args.tol), ("output", args.output), ("workers", args.workers),
                       ("seed", args.seed)):
        if value is not None:
            add(key, value)
    return out


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "report":
            bundle = report(Registry.from_env(), args.output, kind=args.kind, k=args.k,
                            verdict=args.verdict)
            print(json.dumps({"records": bundle.summary["records"], "csv": str(bundle.csv_path),
                              "summary": str(bundle.summary_path)}))
            return ExitCodes.OK
        config = load_config(args.config, overrides_from_args(args))
        record = run(config, Registry.from_env())
    except TowerLabError as e:
        logger.error(f"❌ {e}")
        return ExitCodes.EXECUTION_ERROR
    print(json.dumps({"id": record.record_id, "passed": record.passed, "verdicts": record.verdicts},
                     sort_keys=True))
    return ExitCodes.OK if record.passed else ExitCodes.CHECK_FAILED


if __name__ == "__main__":
    sys.exit(main())

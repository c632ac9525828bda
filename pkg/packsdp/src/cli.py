"""
Command-line front end: solve, verify and normalize packing/covering SDP instances.

    python -m packsdp.src.cli solve --input toy.json --eps 0.1 --solver log --seed 7 --output sol.json
    python -m packsdp.src.cli verify --input toy.json --solution sol.json
    python -m packsdp.src.cli normalize --input toy.json --output normalized.json

Exit codes: 0 success, 1 usage error, 2 validation error, 3 certificate failure, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from typing import Any, Optional, Sequence

from packsdp.src.config import DEFAULT_CONFIG_PATH, SolverConfig, certificate_tolerances, load_config
from packsdp.src.errors import ConfigError, IterationCapExceeded, PackSdpError
from packsdp.src.instance import load_instance, load_solution, save_solution
from packsdp.src.io import ensure_serializable, read_text, write_ndjson, write_text
from packsdp.src.normalization import normalize, normalized_to_dict
from packsdp.src.pipeline import SOLVERS, solve_instance
from packsdp.src.verification import certify

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_VALIDATION = 2
EXIT_CERTIFICATE = 3
EXIT_NUMERICAL = 4


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    """argparse that raises instead of exiting with status 2."""

    def error(self, message: str) -> None:  # type: ignore[override]
        raise _UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="packsdp", description="Sparse width-independent packing/covering SDP solver.")
    parser.add_argument("--log-level", default="WARNING", help="Logging level on stderr (default WARNING)")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    solve = sub.add_parser("solve", help="Solve an instance and certify the result against it")
    solve.add_argument("--input", required=True, help="Instance JSON")
    solve.add_argument("--output", default=None, help="Solution JSON (stdout when omitted)")
    solve.add_argument("--eps", type=float, default=None, help="Target accuracy in (0, 0.5); default from config (0.1)")
    solve.add_argument("--solver", choices=SOLVERS, default="log", help="log (default) or mwu (type2 only)")
    solve.add_argument("--seed", type=int, default=None, help="Seed for randomized eigenvalue estimates (default 0)")
    solve.add_argument("--trace", default=None, help="Write per-iteration NDJSON trace to this path")
    solve.add_argument("--dense-init", action="store_true", help="Start from y = 1/m")
    solve.add_argument("--config", default=str(DEFAULT_CONFIG_PATH), help="Path to solver_config.yml")

    verify = sub.add_parser("verify", help="Certify a solution against an instance")
    verify.add_argument("--input", required=True, help="Instance JSON")
    verify.add_argument("--solution", required=True, help="Solution JSON")
    verify.add_argument("--output", default=None, help="Certificate JSON (stdout when omitted)")
    verify.add_argument("--eps", type=float, default=None, help="Accuracy used when the solution carries no claim")
    verify.add_argument("--config", default=str(DEFAULT_CONFIG_PATH), help="Path to solver_config.yml")

    norm = sub.add_parser("normalize", help="Write the normalized instance and its transform record")
    norm.add_argument("--input", required=True, help="Instance JSON")
    norm.add_argument("--output", default=None, help="Normalized JSON (stdout when omitted)")
    norm.add_argument("--eps", type=float, default=0.1, help="Accuracy used by the reductions (default 0.1)")
    norm.add_argument("--seed", type=int, default=0, help="Seed for the trimming eigenvalue estimates")
    return parser


def _emit(text: str, output: Optional[str]) -> None:
    if output is None:
        sys.stdout.write(text if text.endswith("\n") else text + "\n")
    else:
        write_text(text, output)


def _config(args: argparse.Namespace) -> tuple[SolverConfig, dict[str, Any]]:
    raw = load_config(args.config)
    base = SolverConfig.from_dict(raw.get("solver"))
    overrides: dict[str, Any] = {"eps": args.eps, "seed": getattr(args, "seed", None)}
    if getattr(args, "dense_init", False):
        overrides["dense_init"] = True
    return base.with_overrides(**overrides), raw


def _cmd_solve(args: argparse.Namespace) -> int:
    config, raw = _config(args)
    if args.solver == "mwu" and args.eps is None:
        config = config.with_overrides(eps=(raw.get("mwu") or {}).get("eps"))
    instance = load_instance(read_text(args.input))
    result = solve_instance(instance, config, args.solver, certificate_tolerances(raw))
    if args.trace:
        every = max(int((raw.get("trace") or {}).get("every", 1)), 1)
        records = result.trace.public_records()[::every]
        write_ndjson(records, args.trace)
    _emit(save_solution(result.pair), args.output)
    pair, cert = result.pair, result.certificate
    status = "OK" if cert.passed else "FAIL"
    print(
        f"{status}: {pair.iterations} iterations, {pair.phases} phase(s), support {pair.support_size}, "
        f"primal {pair.primal_objective:.8g}, dual {pair.dual_objective:.8g}, "
        f"ratio {cert.gap_ratio:.6f} (claim {cert.claim_ratio:.6f})",
        file=sys.stderr,
    )
    return EXIT_OK if cert.passed else EXIT_CERTIFICATE


def _cmd_verify(args: argparse.Namespace) -> int:
    raw = load_config(args.config)
    instance = load_instance(read_text(args.input))
    pair = load_solution(read_text(args.solution))
    cert = certify(instance, pair, eps=args.eps, **certificate_tolerances(raw))
    _emit(json.dumps(ensure_serializable(cert.to_dict()), indent=2), args.output)
    if not cert.passed:
        print(f"certificate failed: {cert.to_dict()}", file=sys.stderr)
    return EXIT_OK if cert.passed else EXIT_CERTIFICATE


def _cmd_normalize(args: argparse.Namespace) -> int:
    if not 0.0 < args.eps < 0.5:
        raise ConfigError(f"eps must lie in (0, 0.5), got {args.eps}")
    instance = load_instance(read_text(args.input))
    normalized = normalize(instance, args.eps, args.seed)
    _emit(json.dumps(ensure_serializable(normalized_to_dict(normalized)), indent=2), args.output)
    return EXIT_OK


COMMANDS = {"solve": _cmd_solve, "verify": _cmd_verify, "normalize": _cmd_normalize}


def run(argv: Optional[Sequence[str]] = None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except _UsageError as e:
        print(f"usage error: {e}", file=sys.stderr)
        return EXIT_USAGE
    level = logging.getLevelName(str(args.log_level).upper())
    if not isinstance(level, int):
        print(f"usage error: unknown log level {args.log_level!r}", file=sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(level=level, stream=sys.stderr, format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (ConfigError, FileNotFoundError) as e:
        print(f"usage error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (ArithmeticError, IterationCapExceeded) as e:
        print(f"numerical failure: {e}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (PackSdpError, ValueError) as e:
        print(f"validation error: {e}", file=sys.stderr)
        return EXIT_VALIDATION


def main() -> None:
    raise SystemExit(run(sys.argv[1:]))


if __name__ == "__main__":
    main()

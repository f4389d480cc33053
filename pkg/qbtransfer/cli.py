"""
Command-line entry point.

    qbtransfer run --config configs/direct.env --methods analytic,piecewise
    qbtransfer sweep --scenarios direct,two_step,coherent --g 0.01:0.10:0.01 --sigma 100
    qbtransfer verify --report output/verify.yaml

Exit codes: 0 success, 1 usage or model error, 2 tolerance breach (rk4
accuracy and trace checks included).
"""

from __future__ import annotations

import argparse
import logging
import math
import sys
from collections.abc import Sequence
from pathlib import Path

from qbtransfer import __version__
from qbtransfer.config import Config, get_config
from qbtransfer.errors import (
    AccuracyError,
    ConfigurationError,
    PreconditionError,
    TraceCheckError,
    TransferModelError,
    UnsupportedByAnalyticError,
)
from qbtransfer.services.run_config import load_run_config
from qbtransfer.services.runner import EXIT_OK, EXIT_TOLERANCE, EXIT_USAGE, run_scenario, run_sweep
from qbtransfer.services.trace_export import sweep_to_csv, write_sweep_csv, write_yaml_report
from qbtransfer.services.verification import build_verification_report

logger = logging.getLogger(__name__)

USAGE_ERRORS = (ConfigurationError, PreconditionError, UnsupportedByAnalyticError)


class _ArgumentParser(argparse.ArgumentParser):
    """Reports bad arguments as ConfigurationError so ``main`` owns the exit code."""

    def error(self, message: str) -> None:  # type: ignore[override]
        raise ConfigurationError(f"{self.prog}: {message}")


def parse_g_values(raw: str) -> list[float]:
    """``0.01,0.05`` or an inclusive range ``start:stop:step``."""
    raw = raw.strip()
    if not raw:
        return []
    try:
        if ":" in raw:
            start, stop, step = (float(part) for part in raw.split(":"))
            if not step > 0:
                raise ConfigurationError(f"g range step must be > 0, got {step}")
            count = int(math.floor((stop - start) / step + 1e-9)) + 1
            return [round(start + index * step, 12) for index in range(max(count, 0))]
        return [float(token) for token in raw.split(",") if token.strip()]
    except ValueError as exc:
        raise ConfigurationError(f"cannot parse g values '{raw}'") from exc


def build_parser() -> argparse.ArgumentParser:
    parser = _ArgumentParser(prog="qbtransfer", description="Coherent energy transfer between two-level systems.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--env", default=None, help="Config profile: development, testing or production.")
    parser.add_argument("--verbose", "-v", action="store_true", help="Debug logging.")
    subparsers = parser.add_subparsers(dest="command", required=True, parser_class=_ArgumentParser)

    run = subparsers.add_parser("run", help="Run one scenario and write traces and reports.")
    run.add_argument("--config", type=Path, default=None, help="Flat key=value run config file.")
    run.add_argument("--scenario", choices=["direct", "two_step", "coherent"])
    run.add_argument("--g", dest="g_over_omega_b", type=float, help="Coupling g/omega_B.")
    run.add_argument("--sigma-g", type=float, help="Two-step delay as g*sigma.")
    run.add_argument("--tau-mode", choices=["first_maximum", "explicit"])
    run.add_argument("--tau-g", type=float, help="Explicit window length as g*tau.")
    run.add_argument("--model-variant", choices=["reduced", "full_rwa", "full_counter_rotating"])
    run.add_argument("--omega-c", type=float, help="Charger spacing in units of omega_B.")
    run.add_argument("--omega-m", type=float, help="Mediator spacing in units of omega_B.")
    run.add_argument("--t-end-g", type=float, help="Window end as g*t.")
    run.add_argument("--n-samples", type=int)
    run.add_argument("--trace-path", type=Path)
    run.add_argument("--report-path", type=Path)
    run.add_argument("--methods", help="Comma list of analytic, piecewise, rk4.")
    run.add_argument("--rk4-step", type=float, help="rk4 step in units of 1/omega_B.")
    run.add_argument("--tolerance", type=float, help="Max allowed deviation between methods.")
    run.add_argument("--output-dir", type=Path, default=None)

    sweep = subparsers.add_parser("sweep", help="Transfer time versus coupling for several scenarios.")
    sweep.add_argument("--scenarios", default="direct,two_step,coherent")
    sweep.add_argument("--g", dest="g_values", default="0.01:0.10:0.01", help="List or start:stop:step.")
    sweep.add_argument("--sigma", type=float, default=None, help="Two-step delay omega_B*sigma.")
    sweep.add_argument("--cross-check", action="store_true", default=None, help="Add numeric transfer times.")
    sweep.add_argument("--output", type=Path, default=None, help="Sweep CSV path (stdout if omitted).")
    sweep.add_argument("--workers", type=int, default=None)

    verify = subparsers.add_parser("verify", help="Analytic versus numeric verification suite.")
    verify.add_argument("--report", type=Path, default=None, help="Write the verification report as YAML.")
    return parser


def _configure_logging(app_config: type[Config], verbose: bool) -> None:
    level = logging.DEBUG if verbose else getattr(logging, app_config.LOG_LEVEL, logging.INFO)
    logging.basicConfig(
        level=level,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )


def _command_run(args: argparse.Namespace, app_config: type[Config]) -> int:
    overrides = {
        key: getattr(args, key)
        for key in (
            "scenario",
            "g_over_omega_b",
            "sigma_g",
            "tau_mode",
            "tau_g",
            "model_variant",
            "omega_c",
            "omega_m",
            "t_end_g",
            "n_samples",
            "trace_path",
            "report_path",
            "methods",
            "rk4_step",
            "tolerance",
        )
    }
    resolution = load_run_config(args.config, overrides, app_config)
    for warning in resolution.warnings:
        logger.warning(warning)

    outcome = run_scenario(resolution.config, app_config, args.output_dir)
    for name, report in outcome.reports.items():
        print(
            f"{name:10s} E_B,max/omega_B={report.e_b_max / report.omega_b:.12f} "
            f"g*t_B,max={report.g_t_max:.12f} omega_B*t_B,max={report.omega_b_t_max:.12f}"
            + ("" if report.interior else f" ({report.note})")
        )
    for comparison in outcome.comparisons:
        verdict = "ok" if comparison.passed else "FAILED"
        print(f"compare {' vs '.join(comparison.methods)}: max |delta| = {comparison.max_deviation:.3e} {verdict}")
    for path in outcome.written:
        print(f"wrote {path}")
    return outcome.exit_code


def _command_sweep(args: argparse.Namespace, app_config: type[Config]) -> int:
    scenarios = [token.strip() for token in args.scenarios.split(",") if token.strip()]
    try:
        result = run_sweep(
            scenarios,
            parse_g_values(args.g_values),
            args.sigma,
            cross_check=app_config.SWEEP_CROSS_CHECK if args.cross_check is None else args.cross_check,
            app_config=app_config,
            max_workers=args.workers,
        )
    except ValueError as exc:
        raise ConfigurationError(str(exc)) from exc
    if args.output is None:
        print(sweep_to_csv(result.rows), end="")
    else:
        print(f"wrote {write_sweep_csv(result.rows, args.output)}")
    return EXIT_OK


def _command_verify(args: argparse.Namespace, app_config: type[Config]) -> int:
    report = build_verification_report(app_config)
    for name, check in report["checks"].items():
        status = "PASS" if check["ok"] else "FAIL"
        print(f"{status}  {name:24s} {check['detail']}")
    print(f"verification {report['status']}")
    if args.report is not None:
        write_yaml_report(report, args.report)
    return EXIT_OK if report["passed"] else EXIT_TOLERANCE


_COMMANDS = {
    "run": _command_run,
    "sweep": _command_sweep,
    "verify": _command_verify,
}


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except ConfigurationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:
        # --help and --version
        return int(exc.code or 0)

    app_config = get_config(args.env)
    _configure_logging(app_config, args.verbose)

    try:
        return _COMMANDS[args.command](args, app_config)
    except USAGE_ERRORS as exc:
        logger.error("%s", exc)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except TraceCheckError as exc:
        logger.error("trace check failed: %s", exc)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_TOLERANCE
    except AccuracyError as exc:
        logger.error("numeric accuracy not reached: %s", exc)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_TOLERANCE
    except TransferModelError as exc:
        logger.exception("%s failed", args.command)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())

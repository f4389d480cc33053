"""
Scenario Runner

Executes one configured scenario with every selected method, checks and
writes the traces, and runs transfer-time sweeps over coupling values.
"""

from __future__ import annotations

import concurrent.futures
import logging
from collections.abc import Sequence
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from qbtransfer.config import Config
from qbtransfer.errors import PreconditionError
from qbtransfer.models import (
    EnergyTrace,
    Method,
    Scenario,
    SystemSpec,
    TimeGrid,
    TransferReport,
)
from qbtransfer.services.analytic import analytic_trace, transfer_time
from qbtransfer.services.observables import (
    TraceComparison,
    check_trace,
    compare_traces,
    energies_from_states,
    find_first_maximum,
)
from qbtransfer.services.propagator import StateHistory, propagate_piecewise, propagate_rk4
from qbtransfer.services.run_config import RunConfig
from qbtransfer.services.switching import ProtocolSchedule, first_maximum_tau, make_protocol_schedule
from qbtransfer.services.trace_export import (
    SweepRow,
    comparison_report_path,
    method_trace_path,
    write_trace_csv,
    write_yaml_report,
)

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_TOLERANCE = 2

# Conservation bound applied to closed-form traces
ANALYTIC_TRACE_TOLERANCE = 1e-10
# rk4 traces at the default step conserve energy to this bound
RK4_TRACE_TOLERANCE = 1e-7

RWA_SWEEP_LIMIT = 0.1


@dataclass(frozen=True, eq=False)
class SimulationResult:
    trace: EnergyTrace
    history: StateHistory | None = None


def simulate(
    spec: SystemSpec,
    schedule: ProtocolSchedule,
    grid: TimeGrid,
    method: Method,
    rk4_step: float = 1e-3,
) -> SimulationResult:
    """Energy trace of ``spec`` under ``schedule`` computed with ``method``."""
    if method is Method.ANALYTIC:
        return SimulationResult(trace=analytic_trace(spec, schedule, grid))
    if method is Method.PIECEWISE:
        history = propagate_piecewise(spec, schedule, grid)
    else:
        history = propagate_rk4(spec, schedule, grid, rk4_step)
    return SimulationResult(trace=energies_from_states(spec, history), history=history)


def _trace_tolerance(method: Method, app_config: type[Config]) -> float:
    if method is Method.ANALYTIC:
        return ANALYTIC_TRACE_TOLERANCE
    if method is Method.PIECEWISE:
        return app_config.PIECEWISE_TOLERANCE
    return max(app_config.RK4_TOLERANCE, RK4_TRACE_TOLERANCE)


@dataclass
class ScenarioOutcome:
    """Everything one ``run`` produced, plus the exit status the CLI returns."""

    exit_code: int = EXIT_OK
    traces: dict[str, EnergyTrace] = field(default_factory=dict)
    reports: dict[str, TransferReport] = field(default_factory=dict)
    prediction: TransferReport | None = None
    comparisons: list[TraceComparison] = field(default_factory=list)
    written: list[Path] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)

    def to_dict(self, config: RunConfig) -> dict[str, Any]:
        return {
            "scenario": config.scenario.value,
            "g_over_omega_b": float(config.g_over_omega_b),
            "sigma_g": config.sigma_g,
            "model_variant": config.model_variant.value,
            "prediction": None if self.prediction is None else self.prediction.to_dict(),
            "methods": {name: report.to_dict() for name, report in self.reports.items()},
            "warnings": list(self.warnings),
        }


def _prediction(config: RunConfig, spec: SystemSpec) -> TransferReport | None:
    if not spec.is_resonant:
        return None
    return transfer_time(config.scenario, config.g, sigma=config.sigma, omega_b=spec.omega_b)


def run_scenario(
    config: RunConfig,
    app_config: type[Config] = Config,
    output_dir: Path | None = None,
) -> ScenarioOutcome:
    """
    Run and check every selected method, then write the traces and compare.

    Traces go to ``<trace stem>.<method>.csv``; the transfer report to
    ``report_path``; a comparison report when two or more methods ran.
    A comparison above ``config.tolerance`` sets exit code 2.
    """
    outcome = ScenarioOutcome()
    output_dir = Path(output_dir or app_config.OUTPUT_DIR)
    trace_path = config.trace_path or output_dir / f"{config.scenario.value}.csv"
    report_path = config.report_path or output_dir / f"{config.scenario.value}.yaml"

    spec = config.spec()
    schedule = config.schedule(app_config.SEPARATION_WARN_FACTOR)
    grid = config.grid(schedule)
    if schedule.warning:
        outcome.warnings.append(schedule.warning)
    if spec.rwa_warning:
        outcome.warnings.append(f"g/omega_B = {spec.g / spec.omega_b:g} is outside the RWA validity range")

    logger.info(
        "running %s (g/omega_B=%g, %s) with %s on %d samples",
        config.scenario.value,
        config.g,
        config.model_variant.value,
        ", ".join(method.value for method in config.methods),
        len(grid),
    )

    for method in config.methods:
        result = simulate(spec, schedule, grid, method, config.rk4_step)
        conserving = spec.is_resonant
        if result.history is not None:
            leakage = float(result.history.sector_leakage().max())
            if leakage > _trace_tolerance(method, app_config):
                conserving = False
                outcome.warnings.append(
                    f"{method.value}: {leakage:.3e} of the population leaves the single-excitation "
                    "sector; energy conservation not checked"
                )
        check_trace(result.trace, _trace_tolerance(method, app_config), resonant=conserving)
        outcome.traces[method.value] = result.trace
        outcome.reports[method.value] = find_first_maximum(result.trace)

    # nothing is written until every method has run and passed its checks
    for name, trace in outcome.traces.items():
        outcome.written.append(write_trace_csv(trace, method_trace_path(trace_path, name)))

    outcome.prediction = _prediction(config, spec)
    for warning in outcome.warnings:
        logger.warning(warning)
    outcome.written.append(write_yaml_report(outcome.to_dict(config), report_path))

    if len(config.methods) >= 2:
        reference = outcome.traces[config.methods[0].value]
        for method in config.methods[1:]:
            outcome.comparisons.append(compare_traces(reference, outcome.traces[method.value], config.tolerance))
        passed = all(comparison.passed for comparison in outcome.comparisons)
        comparison_data = {
            "passed": passed,
            "tolerance": float(config.tolerance),
            "comparisons": [comparison.to_dict() for comparison in outcome.comparisons],
        }
        outcome.written.append(write_yaml_report(comparison_data, comparison_report_path(report_path)))
        if not passed:
            logger.error("method comparison exceeded tolerance %.3e", config.tolerance)
            outcome.exit_code = EXIT_TOLERANCE

    return outcome


@dataclass
class SweepResult:
    rows: list[SweepRow] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)

    def lookup(self, scenario: Scenario | str, g_over_omega_b: float, method: str = "analytic") -> SweepRow:
        scenario = Scenario(scenario)
        for row in self.rows:
            if row.scenario == scenario.value and row.method == method and row.g_over_omega_b == g_over_omega_b:
                return row
        raise KeyError((scenario.value, g_over_omega_b, method))


def _sweep_point(
    scenario: Scenario,
    g: float,
    sigma: float | None,
    cross_check: bool,
    n_samples: int,
    separation_warn_factor: float,
) -> tuple[list[SweepRow], list[str]]:
    report = transfer_time(scenario, g, sigma=sigma)
    rows = [SweepRow(g, scenario.value, Method.ANALYTIC.value, report.omega_b_t_max)]
    if not cross_check:
        return rows, []

    try:
        schedule = make_protocol_schedule(scenario, g, sigma=sigma, separation_warn_factor=separation_warn_factor)
    except PreconditionError as exc:
        return rows, [f"{scenario.value} at g/omega_B={g:g}: numeric cross-check skipped ({exc})"]

    spec = SystemSpec.resonant(scenario, g)
    t_end = schedule.end_time + first_maximum_tau(Scenario.DIRECT, g)
    grid = TimeGrid.build(0.0, t_end, n_samples, schedule.breakpoints())
    numeric = find_first_maximum(simulate(spec, schedule, grid, Method.PIECEWISE).trace)
    rows.append(SweepRow(g, scenario.value, Method.PIECEWISE.value, numeric.omega_b_t_max))
    return rows, []


def run_sweep(
    scenarios: Sequence[Scenario | str],
    g_values: Sequence[float],
    sigma: float | None = None,
    *,
    cross_check: bool = False,
    app_config: type[Config] = Config,
    n_samples: int | None = None,
    max_workers: int | None = None,
) -> SweepResult:
    """
    Transfer time omega_B * t_B,max for every (scenario, g/omega_B) pair.

    ``sigma`` is the two-step delay in units of 1/omega_B. Points run
    concurrently; rows come back sorted by g, scenario and method.
    """
    if not g_values:
        raise PreconditionError("sweep needs at least one g value")
    if not scenarios:
        raise PreconditionError("sweep needs at least one scenario")
    resolved = [Scenario(scenario) for scenario in scenarios]
    if Scenario.TWO_STEP in resolved and sigma is None:
        raise PreconditionError("two_step sweeps need the delay sigma")

    result = SweepResult()
    for g in g_values:
        if not g > 0:
            raise PreconditionError(f"g/omega_B must be > 0, got {g}")
        if g > RWA_SWEEP_LIMIT:
            result.warnings.append(f"g/omega_B = {g:g} exceeds {RWA_SWEEP_LIMIT:g}; outside the RWA regime")

    n_samples = n_samples or app_config.SWEEP_N_SAMPLES
    workers = max(1, max_workers or app_config.SWEEP_MAX_WORKERS)
    with concurrent.futures.ThreadPoolExecutor(max_workers=workers) as executor:
        futures = [
            executor.submit(
                _sweep_point,
                scenario,
                float(g),
                sigma if scenario is Scenario.TWO_STEP else None,
                cross_check,
                n_samples,
                app_config.SEPARATION_WARN_FACTOR,
            )
            for scenario in resolved
            for g in g_values
        ]
        for future in futures:
            rows, warnings = future.result()
            result.rows.extend(rows)
            result.warnings.extend(warnings)

    result.rows.sort()
    for warning in result.warnings:
        logger.warning(warning)
    logger.info("sweep finished: %d rows over %d scenarios", len(result.rows), len(resolved))
    return result

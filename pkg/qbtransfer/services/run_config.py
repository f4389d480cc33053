"""Run configuration parsing and resolution for the command-line runner."""

from __future__ import annotations

import logging
import math
from collections.abc import Mapping
from dataclasses import dataclass, field, replace
from pathlib import Path

from dotenv import dotenv_values

from qbtransfer.config import Config
from qbtransfer.errors import ConfigurationError
from qbtransfer.models import Method, ModelVariant, Scenario, SystemSpec, TimeGrid
from qbtransfer.services.switching import (
    ProtocolSchedule,
    TauChoice,
    TauMode,
    first_maximum_tau,
    make_protocol_schedule,
)

logger = logging.getLogger(__name__)

RUN_CONFIG_KEYS = (
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

_KEY_ALIASES = {
    "g": "g_over_omega_b",
    "sigma": "sigma_g",
    "tau": "tau_g",
    "variant": "model_variant",
    "trace": "trace_path",
    "report": "report_path",
    "method": "methods",
    "step": "rk4_step",
}

_SCENARIO_ALIASES = {
    "direct": Scenario.DIRECT,
    "two_step": Scenario.TWO_STEP,
    "twostep": Scenario.TWO_STEP,
    "two_step_mediated": Scenario.TWO_STEP,
    "coherent": Scenario.COHERENT,
    "coherent_mediated": Scenario.COHERENT,
}


@dataclass(frozen=True)
class RunConfig:
    """
    One scenario run. All quantities are dimensionless: energies and
    spacings in omega_B, times as g*t.
    """

    scenario: Scenario
    g_over_omega_b: float
    sigma_g: float | None = None
    tau_mode: TauMode = TauMode.FIRST_MAXIMUM
    tau_g: float | None = None
    model_variant: ModelVariant = ModelVariant.REDUCED
    omega_c: float = 1.0
    omega_m: float | None = None
    t_end_g: float | None = None
    n_samples: int = 2000
    trace_path: Path | None = None
    report_path: Path | None = None
    methods: tuple[Method, ...] = (Method.ANALYTIC,)
    rk4_step: float = 1e-3
    tolerance: float = 1e-8

    def __post_init__(self) -> None:
        if not self.methods:
            raise ConfigurationError("select at least one method (analytic, piecewise, rk4)")
        if not self.g_over_omega_b > 0:
            raise ConfigurationError(f"g_over_omega_b must be > 0, got {self.g_over_omega_b}")
        if self.scenario is Scenario.TWO_STEP and self.sigma_g is None:
            raise ConfigurationError("two_step runs require sigma_g")
        if self.scenario is not Scenario.TWO_STEP and self.sigma_g is not None:
            raise ConfigurationError(f"sigma_g applies to two_step runs only, not {self.scenario}")
        if self.tau_mode is TauMode.EXPLICIT and self.tau_g is None:
            raise ConfigurationError("tau_mode=explicit requires tau_g")
        if self.scenario is Scenario.DIRECT and self.omega_m is not None:
            raise ConfigurationError("direct runs have no mediator; drop omega_m")
        if self.n_samples < 2:
            raise ConfigurationError(f"n_samples must be >= 2, got {self.n_samples}")
        if self.t_end_g is not None and not self.t_end_g > 0:
            raise ConfigurationError(f"t_end_g must be > 0, got {self.t_end_g}")
        if not self.rk4_step > 0:
            raise ConfigurationError(f"rk4_step must be > 0, got {self.rk4_step}")
        if not self.tolerance > 0:
            raise ConfigurationError(f"tolerance must be > 0, got {self.tolerance}")

    @property
    def g(self) -> float:
        return self.g_over_omega_b

    @property
    def sigma(self) -> float | None:
        return None if self.sigma_g is None else self.sigma_g / self.g

    def spec(self) -> SystemSpec:
        omega_m = self.omega_m
        if self.scenario.is_mediated and omega_m is None:
            omega_m = 1.0
        return SystemSpec(
            g=self.g,
            scenario=self.scenario,
            omega_c=self.omega_c,
            omega_m=omega_m,
            omega_b=1.0,
            model_variant=self.model_variant,
        )

    def tau_choice(self) -> TauChoice:
        if self.tau_mode is TauMode.EXPLICIT:
            return TauChoice.explicit(float(self.tau_g) / self.g)  # type: ignore[arg-type]
        return TauChoice.first_maximum()

    def schedule(self, separation_warn_factor: float = 5.0) -> ProtocolSchedule:
        return make_protocol_schedule(
            self.scenario,
            self.g,
            self.tau_choice(),
            self.sigma,
            separation_warn_factor=separation_warn_factor,
        )

    def t_end(self, schedule: ProtocolSchedule) -> float:
        """Window end in units of 1/omega_B; defaults to the protocol end plus a quarter period."""
        if self.t_end_g is not None:
            return self.t_end_g / self.g
        return schedule.end_time + first_maximum_tau(Scenario.DIRECT, self.g)

    def grid(self, schedule: ProtocolSchedule) -> TimeGrid:
        return TimeGrid.build(0.0, self.t_end(schedule), self.n_samples, schedule.breakpoints())


@dataclass
class RunConfigResolution:
    """Resolved run configuration plus soft warnings for the caller to log."""

    config: RunConfig
    warnings: list[str] = field(default_factory=list)


def _normalize_key(name: str) -> str:
    lowered = (name or "").strip().lower().replace("-", "_")
    return _KEY_ALIASES.get(lowered, lowered)


def _parse_float(key: str, raw: str) -> float:
    try:
        value = float(raw)
    except ValueError as exc:
        raise ConfigurationError(f"{key}: '{raw}' is not a number") from exc
    if not math.isfinite(value):
        raise ConfigurationError(f"{key}: '{raw}' must be finite")
    return value


def _parse_int(key: str, raw: str) -> int:
    try:
        return int(raw)
    except ValueError as exc:
        raise ConfigurationError(f"{key}: '{raw}' is not an integer") from exc


def _parse_scenario(raw: str) -> Scenario:
    key = raw.strip().lower().replace("-", "_")
    if key not in _SCENARIO_ALIASES:
        raise ConfigurationError(f"scenario: '{raw}' is not one of direct, two_step, coherent")
    return _SCENARIO_ALIASES[key]


def _parse_enum(key: str, raw: str, enum_type: type[ModelVariant] | type[TauMode]) -> ModelVariant | TauMode:
    try:
        return enum_type(raw.strip().lower())
    except ValueError as exc:
        allowed = ", ".join(member.value for member in enum_type)
        raise ConfigurationError(f"{key}: '{raw}' is not one of {allowed}") from exc


def _parse_methods(raw: str) -> tuple[Method, ...]:
    methods: list[Method] = []
    for token in raw.split(","):
        token = token.strip().lower()
        if not token:
            continue
        try:
            method = Method(token)
        except ValueError as exc:
            raise ConfigurationError(f"methods: '{token}' is not one of analytic, piecewise, rk4") from exc
        if method not in methods:
            methods.append(method)
    return tuple(methods)


def read_run_config_file(path: Path | str) -> dict[str, str]:
    """Flat ``key=value`` pairs from ``path``; comments and blank lines are skipped."""
    path = Path(path)
    if not path.is_file():
        raise ConfigurationError(f"run config file '{path}' does not exist")
    return {key: value for key, value in dotenv_values(path).items() if value is not None}


def load_run_config(
    path: Path | str | None = None,
    overrides: Mapping[str, object | None] | None = None,
    app_config: type[Config] = Config,
) -> RunConfigResolution:
    """
    Resolve a RunConfig.

    Priority order:
    1. ``overrides`` (command-line flags; None values are ignored)
    2. Values from the run-config file at ``path``
    3. ``app_config`` defaults
    """
    raw: dict[str, str] = {}
    warnings: list[str] = []
    if path is not None:
        for key, value in read_run_config_file(path).items():
            raw[_normalize_key(key)] = value
    for key, value in (overrides or {}).items():
        if value is not None:
            raw[_normalize_key(key)] = str(value)

    unknown = sorted(set(raw) - set(RUN_CONFIG_KEYS))
    if unknown:
        warnings.append(f"ignoring unknown run config keys: {', '.join(unknown)}")

    if "scenario" not in raw:
        raise ConfigurationError("scenario is required")
    if "g_over_omega_b" not in raw:
        raise ConfigurationError("g_over_omega_b is required")

    def text(key: str) -> str | None:
        value = raw.get(key, "").strip()
        return value or None

    def number(key: str) -> float | None:
        value = text(key)
        return None if value is None else _parse_float(key, value)

    def number_or(key: str, default: float) -> float:
        value = number(key)
        return default if value is None else value

    def path_value(key: str) -> Path | None:
        value = text(key)
        return None if value is None else Path(value)

    tau_mode_raw = text("tau_mode")
    variant_raw = text("model_variant")
    n_samples_raw = text("n_samples")
    methods_raw = text("methods")

    config = RunConfig(
        scenario=_parse_scenario(raw["scenario"]),
        g_over_omega_b=_parse_float("g_over_omega_b", raw["g_over_omega_b"]),
        sigma_g=number("sigma_g"),
        tau_mode=(
            _parse_enum("tau_mode", tau_mode_raw, TauMode)  # type: ignore[arg-type]
            if tau_mode_raw
            else TauMode.EXPLICIT if text("tau_g") else TauMode.FIRST_MAXIMUM
        ),
        tau_g=number("tau_g"),
        model_variant=(
            _parse_enum("model_variant", variant_raw, ModelVariant)  # type: ignore[arg-type]
            if variant_raw
            else ModelVariant.REDUCED
        ),
        omega_c=number_or("omega_c", 1.0),
        omega_m=number("omega_m"),
        t_end_g=number("t_end_g"),
        n_samples=_parse_int("n_samples", n_samples_raw) if n_samples_raw else app_config.DEFAULT_N_SAMPLES,
        trace_path=path_value("trace_path"),
        report_path=path_value("report_path"),
        methods=_parse_methods(methods_raw) if methods_raw else (Method.ANALYTIC,),
        rk4_step=number_or("rk4_step", app_config.RK4_STEP),
        tolerance=number_or("tolerance", app_config.COMPARE_TOLERANCE),
    )

    if config.g_over_omega_b > app_config.RWA_WARN_RATIO:
        warnings.append(
            f"g/omega_B = {config.g_over_omega_b:g} exceeds {app_config.RWA_WARN_RATIO:g}; "
            "the rotating wave approximation may not hold"
        )
    if config.tau_mode is TauMode.FIRST_MAXIMUM and config.tau_g is not None:
        warnings.append("tau_g is ignored with tau_mode=first_maximum")
        config = replace(config, tau_g=None)

    return RunConfigResolution(config=config, warnings=warnings)

"""
Closed-Form Transfer Dynamics

Exact state evolution, stored energies and transfer times for the three
resonant protocols driven by unit step switching functions. Energies are
returned in absolute units (multiples of omega_B); traces store ratios.
"""

from __future__ import annotations

import logging
import math

import numpy as np

from qbtransfer.errors import (
    ConfigurationError,
    PreconditionError,
    UnsupportedByAnalyticError,
)
from qbtransfer.models import (
    EnergyTrace,
    FloatArray,
    Method,
    ReducedState,
    Scenario,
    SystemSpec,
    TimeGrid,
    TraceSource,
    TransferReport,
)
from qbtransfer.services.switching import COHERENT_SCALE, ProtocolSchedule, angle

logger = logging.getLogger(__name__)

# Leg 1 must end with |cos(phi_CM)| below this for the two-step closed form
COMPLETE_LEG_TOLERANCE = 1e-9

FloatLike = float | FloatArray


def _require_closed_form(spec: SystemSpec, schedule: ProtocolSchedule, scenario: Scenario) -> None:
    if spec.scenario is not scenario:
        raise ConfigurationError(f"expected a {scenario} system, got {spec.scenario}")
    if schedule.scenario is not scenario:
        raise ConfigurationError(f"expected a {scenario} schedule, got {schedule.scenario}")
    if not spec.is_resonant:
        raise UnsupportedByAnalyticError(
            "closed forms cover resonant systems only; use the piecewise or rk4 propagator"
        )
    if not schedule.is_step:
        raise UnsupportedByAnalyticError(
            "closed forms need unit step switching functions; use the piecewise or rk4 propagator"
        )


def _require_two_step(spec: SystemSpec, schedule: ProtocolSchedule) -> None:
    _require_closed_form(spec, schedule, Scenario.TWO_STEP)
    assert schedule.bm is not None and schedule.sigma is not None
    if schedule.legs_overlap() or schedule.sigma < schedule.tau:
        raise PreconditionError(
            f"two-step legs overlap (sigma={schedule.sigma:.6g}, tau={schedule.tau:.6g})"
        )
    if schedule.bm != schedule.cm.shifted(schedule.sigma):
        raise ConfigurationError("two-step BM switching must be the CM switching delayed by sigma")

    leg_angle = angle(schedule.cm, schedule.cm.end_time, spec.g)
    if abs(math.cos(leg_angle)) > COMPLETE_LEG_TOLERANCE:
        raise UnsupportedByAnalyticError(
            f"first leg transfers only part of the excitation (g*tau={leg_angle:.6g}); "
            "the closed form needs g*tau = pi/2 mod pi, use a numeric method"
        )


def direct_state(spec: SystemSpec, schedule: ProtocolSchedule, t: float) -> ReducedState:
    """(cos phi, -i sin phi) starting from |1_C 0_B>."""
    _require_closed_form(spec, schedule, Scenario.DIRECT)
    phi = angle(schedule.cm, float(t), spec.g)
    return ReducedState(amplitudes=np.array([math.cos(phi), -1j * math.sin(phi)]), time=t)


def direct_energies(spec: SystemSpec, schedule: ProtocolSchedule, t: FloatLike) -> tuple[FloatLike, FloatLike]:
    """(E_B, E_C) with E_B = omega_B sin^2 phi and E_C = -E_B."""
    _require_closed_form(spec, schedule, Scenario.DIRECT)
    phi = angle(schedule.cm, t, spec.g)
    e_b = spec.omega_b * np.sin(phi) ** 2
    return _as_scalar(e_b, t), _as_scalar(-e_b, t)


def two_step_state(spec: SystemSpec, schedule: ProtocolSchedule, t: float) -> ReducedState:
    """C->M rotation followed, after the delay, by M->B rotation."""
    _require_two_step(spec, schedule)
    assert schedule.bm is not None
    phi_cm = angle(schedule.cm, float(t), spec.g)
    phi_bm = angle(schedule.bm, float(t), spec.g)
    amplitudes = np.array(
        [
            math.cos(phi_cm),
            -1j * math.sin(phi_cm) * math.cos(phi_bm),
            -math.sin(phi_cm) * math.sin(phi_bm),
        ]
    )
    return ReducedState(amplitudes=amplitudes, time=t)


def two_step_energies(
    spec: SystemSpec,
    schedule: ProtocolSchedule,
    t: FloatLike,
) -> tuple[FloatLike, FloatLike, FloatLike]:
    """(E_B, E_C, E_M) for well-separated legs with a complete first transfer."""
    _require_two_step(spec, schedule)
    assert schedule.bm is not None
    charged_m = np.sin(angle(schedule.cm, t, spec.g)) ** 2
    charged_b = np.sin(angle(schedule.bm, t, spec.g)) ** 2
    omega_b = spec.omega_b
    e_b = omega_b * charged_b
    e_c = -omega_b * charged_m
    e_m = omega_b * (charged_m - charged_b)
    return _as_scalar(e_b, t), _as_scalar(e_c, t), _as_scalar(e_m, t)


def coherent_state(spec: SystemSpec, schedule: ProtocolSchedule, t: float) -> ReducedState:
    """Simultaneous C-M and M-B coupling, rotation angle scaled by sqrt(2)."""
    _require_closed_form(spec, schedule, Scenario.COHERENT)
    phi = angle(schedule.cm, float(t), spec.g, COHERENT_SCALE)
    cos_phi = math.cos(phi)
    amplitudes = np.array(
        [
            0.5 * (cos_phi + 1.0),
            -1j * math.sin(phi) / math.sqrt(2.0),
            0.5 * (cos_phi - 1.0),
        ]
    )
    return ReducedState(amplitudes=amplitudes, time=t)


def coherent_energies(
    spec: SystemSpec,
    schedule: ProtocolSchedule,
    t: FloatLike,
) -> tuple[FloatLike, FloatLike, FloatLike]:
    """(E_B, E_C, E_M); the mediator never holds more than omega_B / 2."""
    _require_closed_form(spec, schedule, Scenario.COHERENT)
    phi = angle(schedule.cm, t, spec.g, COHERENT_SCALE)
    cos_phi = np.cos(phi)
    omega_b = spec.omega_b
    e_b = omega_b * (0.5 * cos_phi - 0.5) ** 2
    e_c = omega_b * (0.25 * cos_phi**2 + 0.5 * cos_phi - 0.75)
    e_m = 0.5 * omega_b * np.sin(phi) ** 2
    return _as_scalar(e_b, t), _as_scalar(e_c, t), _as_scalar(e_m, t)


def analytic_state(spec: SystemSpec, schedule: ProtocolSchedule, t: float) -> ReducedState:
    if spec.scenario is Scenario.DIRECT:
        return direct_state(spec, schedule, t)
    if spec.scenario is Scenario.TWO_STEP:
        return two_step_state(spec, schedule, t)
    return coherent_state(spec, schedule, t)


def analytic_trace(spec: SystemSpec, schedule: ProtocolSchedule, grid: TimeGrid) -> EnergyTrace:
    """Closed-form energies sampled on ``grid``."""
    times = grid.times
    e_m: FloatArray | None = None
    if spec.scenario is Scenario.DIRECT:
        e_b, e_c = direct_energies(spec, schedule, times)
    elif spec.scenario is Scenario.TWO_STEP:
        e_b, e_c, e_m = two_step_energies(spec, schedule, times)
    else:
        e_b, e_c, e_m = coherent_energies(spec, schedule, times)

    omega_b = spec.omega_b
    return EnergyTrace(
        times=times,
        e_b=np.asarray(e_b) / omega_b,
        e_c=np.asarray(e_c) / omega_b,
        e_m=None if e_m is None else np.asarray(e_m) / omega_b,
        scenario=spec.scenario,
        g=spec.g,
        source=TraceSource.ANALYTIC,
        method=Method.ANALYTIC.value,
        omega_b=omega_b,
    )


def transfer_time(
    scenario: Scenario | str,
    g: float,
    k: int | None = None,
    sigma: float | None = None,
    *,
    omega_b: float = 1.0,
) -> TransferReport:
    """
    Time of a battery-energy maximum.

    Direct: k*pi/(2g); two-step: k*pi/(2g) + sigma (k odd and positive,
    even k fall on nodes of sin^2). Coherent: (2k+1)*pi/(sqrt(2) g), k >= 0.
    Defaults select the first maximum.
    """
    scenario = Scenario(scenario)
    if not g > 0:
        raise PreconditionError(f"g must be > 0, got {g}")

    if scenario is Scenario.COHERENT:
        k = 0 if k is None else k
        if k < 0:
            raise PreconditionError(f"coherent maxima are indexed by k >= 0, got {k}")
        t_max = (2 * k + 1) * math.pi / (COHERENT_SCALE * g)
    else:
        k = 1 if k is None else k
        if k < 1 or k % 2 == 0:
            raise PreconditionError(f"{scenario} maxima need a positive odd k, got {k}")
        t_max = k * math.pi / (2.0 * g)
        if scenario is Scenario.TWO_STEP:
            if sigma is None:
                raise PreconditionError("two-step transfer time needs the delay sigma")
            if sigma < 0:
                raise PreconditionError(f"sigma must be >= 0, got {sigma}")
            t_max += sigma

    return TransferReport(
        e_b_max=omega_b,
        t_b_max=t_max,
        scenario=scenario,
        g=g,
        k_index=k,
        omega_b=omega_b,
        method=Method.ANALYTIC.value,
        e_c_at_max=-omega_b,
        e_m_at_max=0.0 if scenario.is_mediated else None,
    )


def _as_scalar(value: FloatArray, t: FloatLike) -> FloatLike:
    if np.ndim(t) == 0:
        return float(value)
    return value

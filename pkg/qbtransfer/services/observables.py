"""
Observables

Stored energies from propagated states, trace comparison, transfer-time
location and trace sanity checks.
"""

from __future__ import annotations

import logging
from collections.abc import Sequence
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from qbtransfer.errors import DimensionMismatchError, GridMismatchError, TraceCheckError
from qbtransfer.models import (
    ComplexArray,
    EnergyTrace,
    FloatArray,
    FullState,
    ReducedState,
    Scenario,
    SystemSpec,
    TraceSource,
    TransferReport,
)
from qbtransfer.services.hamiltonians import hamiltonian_terms
from qbtransfer.services.propagator import CouplingSource, StateHistory

logger = logging.getLogger(__name__)

NO_INTERIOR_MAXIMUM = "no interior maximum"

# Trace label for states that did not come from a propagation run
NUMERIC_METHOD_LABEL = "numeric"

# Ratio changes below this count as flat when scanning for a maximum
FLAT_TOLERANCE = 1e-12


def site_populations(spec: SystemSpec, amplitudes: ComplexArray) -> FloatArray:
    """
    Excited-state population of every site, charger first.

    Accepts one state or a stack of states (last axis is the basis).
    """
    amplitudes = np.asarray(amplitudes, dtype=np.complex128)
    if amplitudes.shape[-1] != spec.dimension:
        raise DimensionMismatchError(
            f"states of dimension {amplitudes.shape[-1]} do not match the {spec.model_variant} "
            f"model of dimension {spec.dimension}"
        )
    probabilities = np.abs(amplitudes) ** 2
    if not spec.model_variant.is_full:
        return probabilities

    n_sites = spec.n_sites
    basis = np.arange(spec.dimension)
    columns = []
    for site in range(n_sites):
        excited = ((basis >> (n_sites - 1 - site)) & 1).astype(bool)
        columns.append(probabilities[..., excited].sum(axis=-1))
    return np.stack(columns, axis=-1)


def energies_from_states(
    spec: SystemSpec,
    states: StateHistory | Sequence[ReducedState | FullState],
    method: str | None = None,
) -> EnergyTrace:
    """
    Stored energy of every site relative to the first state.

    E_X(t) = omega_X (p_X(t) - p_X(t_0)); returned as ratios to omega_B.
    The trace is labelled with ``method``, else the history's own method,
    else "numeric" for a plain state sequence.
    """
    if isinstance(states, StateHistory):
        times = states.times
        amplitudes = states.amplitudes
        method = method or states.method
        if states.spec.dimension != spec.dimension:
            raise DimensionMismatchError(
                f"history of dimension {states.spec.dimension} does not match dimension {spec.dimension}"
            )
    else:
        if not states:
            raise DimensionMismatchError("no states to evaluate")
        times = np.array([state.time for state in states], dtype=np.float64)
        amplitudes = np.stack([state.amplitudes for state in states])
        method = method or NUMERIC_METHOD_LABEL

    populations = site_populations(spec, amplitudes)
    spacings = np.array([spec.spacing(label) for label in spec.site_labels])
    stored = (populations - populations[0]) * spacings / spec.omega_b

    return EnergyTrace(
        times=times,
        e_c=stored[:, 0],
        e_b=stored[:, -1],
        e_m=stored[:, 1] if spec.scenario.is_mediated else None,
        scenario=spec.scenario,
        g=spec.g,
        source=TraceSource.NUMERIC,
        method=method,
        omega_b=spec.omega_b,
    )


@dataclass(frozen=True)
class TraceComparison:
    """Per-channel maximum absolute deviation between two traces."""

    deviations: dict[str, float]
    tolerance: float
    methods: tuple[str, str]
    passed: bool = field(init=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "passed", self.max_deviation <= self.tolerance)

    @property
    def max_deviation(self) -> float:
        return max(self.deviations.values(), default=0.0)

    def to_dict(self) -> dict[str, Any]:
        return {
            "methods": list(self.methods),
            "tolerance": float(self.tolerance),
            "max_deviation": float(self.max_deviation),
            "deviations": {name: float(value) for name, value in self.deviations.items()},
            "passed": self.passed,
        }


def compare_traces(a: EnergyTrace, b: EnergyTrace, tolerance: float = 1e-8) -> TraceComparison:
    """Max |a - b| per channel; both traces must share the same grid and channels."""
    if a.times.shape != b.times.shape or not np.array_equal(a.times, b.times):
        raise GridMismatchError(f"traces '{a.method}' and '{b.method}' are sampled on different grids")
    channels_a, channels_b = a.channels(), b.channels()
    if channels_a.keys() != channels_b.keys():
        raise GridMismatchError(
            f"traces carry different channels: {sorted(channels_a)} vs {sorted(channels_b)}"
        )

    deviations = {
        name: float(np.max(np.abs(channels_a[name] - channels_b[name]))) for name in channels_a
    }
    comparison = TraceComparison(deviations=deviations, tolerance=tolerance, methods=(a.method, b.method))
    if not comparison.passed:
        logger.warning(
            "trace comparison %s vs %s: max deviation %.3e exceeds %.3e",
            a.method,
            b.method,
            comparison.max_deviation,
            tolerance,
        )
    return comparison


def _refine_peak(times: FloatArray, values: FloatArray, index: int) -> tuple[float, float]:
    window = slice(index - 1, index + 2)
    local_times = times[window]
    origin = local_times[1]
    curvature, slope, offset = np.polyfit(local_times - origin, values[window], 2)
    if curvature >= 0:
        return float(times[index]), float(values[index])
    shift = float(np.clip(-slope / (2.0 * curvature), local_times[0] - origin, local_times[2] - origin))
    return float(origin + shift), float(np.polyval([curvature, slope, offset], shift))


def find_first_maximum(trace: EnergyTrace) -> TransferReport:
    """
    Locate the first maximum of E_B on ``trace``.

    A maximum is the first sample that ends a strict rise and is not
    exceeded by its successor. Flat tops (coupling switched off at the
    peak) report their first sample; strict peaks are refined with a
    parabola through the three neighbouring samples.
    """
    times, e_b = trace.times, trace.e_b
    omega_b = trace.omega_b

    peak: int | None = None
    for index in range(1, len(e_b) - 1):
        rising = e_b[index] > e_b[index - 1] + FLAT_TOLERANCE
        if rising and e_b[index + 1] <= e_b[index] + FLAT_TOLERANCE:
            peak = index
            break

    if peak is None:
        logger.info("E_B has no interior maximum on [%.6g, %.6g]", trace.times[0], trace.times[-1])
        t_max, value, interior, note = float(times[-1]), float(e_b[-1]), False, NO_INTERIOR_MAXIMUM
    elif e_b[peak + 1] < e_b[peak] - FLAT_TOLERANCE:
        t_max, value = _refine_peak(times, e_b, peak)
        interior, note = True, None
    else:
        t_max, value, interior, note = float(times[peak]), float(e_b[peak]), True, None

    e_m_at_max = None
    if trace.e_m is not None:
        e_m_at_max = float(np.interp(t_max, times, trace.e_m)) * omega_b
    return TransferReport(
        e_b_max=float(np.clip(value, 0.0, 1.0)) * omega_b,
        t_b_max=t_max,
        scenario=trace.scenario,
        g=trace.g,
        omega_b=omega_b,
        method=trace.method,
        interior=interior,
        note=note,
        e_c_at_max=float(np.interp(t_max, times, trace.e_c)) * omega_b,
        e_m_at_max=e_m_at_max,
    )


def interaction_energy(
    spec: SystemSpec,
    schedule: CouplingSource,
    state: ReducedState | FullState,
    t: float,
) -> float:
    """Expectation of the coupling part of H(t) in ``state``."""
    amplitudes = state.amplitudes
    if amplitudes.shape != (spec.dimension,):
        raise DimensionMismatchError(f"state of shape {amplitudes.shape} does not match dimension {spec.dimension}")
    terms = hamiltonian_terms(spec)
    coupling = terms.at(*schedule.coupling_values(t)) - terms.drift
    return float(np.real(np.vdot(amplitudes, coupling @ amplitudes)))


def check_trace(trace: EnergyTrace, tolerance: float, resonant: bool = True) -> float:
    """
    Check energy bounds and, for resonant systems, per-sample conservation.

    Returns the largest |energy sum|. Detuned traces carry interaction
    energy, so only finiteness is checked for them. Coherent traces bound
    E_M by omega_B / 2.
    """
    channels = trace.channels()
    if not all(np.all(np.isfinite(values)) for values in channels.values()):
        raise TraceCheckError(f"{trace.method} trace contains non-finite energies")

    residual = float(np.max(np.abs(trace.energy_sum())))
    if not resonant:
        return residual

    bounds = {"E_B": (0.0, 1.0), "E_C": (-1.0, 0.0), "E_M": (0.0, 1.0)}
    if trace.scenario is Scenario.COHERENT:
        # a mediator shared by both couplings holds at most half a quantum
        bounds["E_M"] = (0.0, 0.5)
    for name, values in channels.items():
        low, high = bounds[name]
        if values.min() < low - tolerance or values.max() > high + tolerance:
            raise TraceCheckError(
                f"{trace.method} trace: {name}/omega_B leaves [{low:g}, {high:g}] "
                f"(range {values.min():.6g} .. {values.max():.6g})"
            )
    if residual > tolerance:
        raise TraceCheckError(f"{trace.method} trace: energy sum deviates from zero by {residual:.3e}")
    return residual

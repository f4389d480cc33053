"""
State Propagation

Two independent numerical evolutions of the reduced and full models:

- ``propagate_piecewise`` applies the exact unitary exp(-i H dt) on every
  constant-coupling segment, obtained from a Hermitian eigendecomposition.
- ``propagate_rk4`` integrates the Schroedinger equation with a classic
  fixed-step fourth-order Runge-Kutta scheme and accepts any coupling
  profile.

Neither method renormalizes; the norm drift is reported on the result.
"""

from __future__ import annotations

import logging
import math
from collections.abc import Iterator
from dataclasses import dataclass
from typing import Protocol

import numpy as np
from scipy.linalg import eigh

from qbtransfer.errors import (
    AccuracyError,
    DimensionMismatchError,
    GridMismatchError,
    NotPiecewiseConstantError,
    PreconditionError,
)
from qbtransfer.models import (
    ComplexArray,
    FloatArray,
    FullState,
    Method,
    ReducedState,
    SystemSpec,
    TimeGrid,
)
from qbtransfer.services.hamiltonians import (
    designated_initial_amplitudes,
    hamiltonian_terms,
    sector_offset,
    single_excitation_indices,
)
from qbtransfer.services.switching import ProfileSchedule, ProtocolSchedule, SwitchingSchedule

logger = logging.getLogger(__name__)

# rk4 runs drifting further than this from unit norm are rejected
RK4_MAX_NORM_DRIFT = 1e-6


class CouplingSource(Protocol):
    def coupling_values(self, t: float) -> tuple[float, float]: ...

    def breakpoints(self) -> tuple[float, ...]: ...


@dataclass(frozen=True, eq=False)
class StateHistory:
    """States of one propagation run, one row of ``amplitudes`` per grid time."""

    times: FloatArray
    amplitudes: ComplexArray
    spec: SystemSpec
    method: str
    norm_drift: float

    def __len__(self) -> int:
        return int(self.times.shape[0])

    def __getitem__(self, index: int) -> ReducedState | FullState:
        state_type = FullState if self.spec.model_variant.is_full else ReducedState
        return state_type(amplitudes=self.amplitudes[index], time=float(self.times[index]))

    def __iter__(self) -> Iterator[ReducedState | FullState]:
        for index in range(len(self)):
            yield self[index]

    @property
    def final(self) -> ReducedState | FullState:
        return self[len(self) - 1]

    def norms(self) -> FloatArray:
        return np.linalg.norm(self.amplitudes, axis=1)

    def sector_leakage(self) -> FloatArray:
        """Population outside the single-excitation sector at every sample."""
        if not self.spec.model_variant.is_full:
            return np.zeros(len(self))
        inside = np.abs(self.amplitudes[:, list(single_excitation_indices(self.spec.n_sites))]) ** 2
        total = np.abs(self.amplitudes) ** 2
        return np.clip(total.sum(axis=1) - inside.sum(axis=1), 0.0, None)

    def reduced_amplitudes(self) -> ComplexArray:
        """
        Single-excitation amplitudes in the reduced model's gauge.

        Full-model sector amplitudes carry the extra phase exp(-i offset t)
        of the constant removed from the reduced matrix.
        """
        if not self.spec.model_variant.is_full:
            return self.amplitudes.copy()
        projected = self.amplitudes[:, list(single_excitation_indices(self.spec.n_sites))]
        phase = np.exp(1j * sector_offset(self.spec) * self.times)
        return projected * phase[:, np.newaxis]


def _initial_amplitudes(spec: SystemSpec, initial: ReducedState | FullState | ComplexArray | None) -> ComplexArray:
    if initial is None:
        return designated_initial_amplitudes(spec)
    amplitudes = np.asarray(getattr(initial, "amplitudes", initial), dtype=np.complex128)
    if amplitudes.shape != (spec.dimension,):
        raise DimensionMismatchError(
            f"initial state has shape {amplitudes.shape}, {spec.model_variant} model needs ({spec.dimension},)"
        )
    return amplitudes.copy()


def _split_points(grid: TimeGrid, breakpoints: tuple[float, ...]) -> FloatArray:
    """Grid times plus every switching edge inside the window, none merged or moved."""
    inside = [b for b in breakpoints if grid.t_start < b < grid.t_end]
    return np.unique(np.concatenate([grid.times, np.asarray(inside, dtype=np.float64)]))


def _empty_rows(grid: TimeGrid, dimension: int) -> ComplexArray:
    return np.full((len(grid), dimension), np.nan, dtype=np.complex128)


def _require_filled(amplitudes: ComplexArray, filled: int) -> None:
    if filled != amplitudes.shape[0]:
        raise GridMismatchError(f"propagation reached {filled} of {amplitudes.shape[0]} grid times")


def _norm_drift(amplitudes: ComplexArray) -> float:
    return float(np.max(np.abs(np.linalg.norm(amplitudes, axis=1) - 1.0)))


def _require_piecewise(schedule: CouplingSource) -> None:
    if isinstance(schedule, ProtocolSchedule):
        return
    if isinstance(schedule, ProfileSchedule):
        profiles = [schedule.cm] if schedule.bm is None else [schedule.cm, schedule.bm]
        if all(isinstance(profile, SwitchingSchedule) for profile in profiles):
            return
    raise NotPiecewiseConstantError(
        "exact segment propagation needs switching windows; use propagate_rk4 for arbitrary profiles"
    )


def propagate_piecewise(
    spec: SystemSpec,
    schedule: CouplingSource,
    grid: TimeGrid,
    initial: ReducedState | FullState | ComplexArray | None = None,
) -> StateHistory:
    """
    Evolve ``initial`` (the charger-excited state by default) over ``grid``.

    Each interval between grid times and switching edges has a constant
    Hamiltonian, sampled at its midpoint and diagonalized once per
    distinct coupling pair.
    """
    _require_piecewise(schedule)
    terms = hamiltonian_terms(spec)
    state = _initial_amplitudes(spec, initial)
    points = _split_points(grid, schedule.breakpoints())

    eigen_cache: dict[tuple[float, float], tuple[FloatArray, ComplexArray]] = {}
    sample_index = {float(t): index for index, t in enumerate(grid.times)}
    amplitudes = _empty_rows(grid, spec.dimension)
    amplitudes[0] = state
    filled = 1

    for left, right in zip(points[:-1], points[1:], strict=True):
        couplings = schedule.coupling_values(0.5 * (left + right))
        if couplings not in eigen_cache:
            eigen_cache[couplings] = eigh(terms.at(*couplings))
        energies, vectors = eigen_cache[couplings]
        phases = np.exp(-1j * energies * (right - left))
        state = vectors @ (phases * (vectors.conj().T @ state))
        index = sample_index.get(float(right))
        if index is not None:
            amplitudes[index] = state
            filled += 1

    _require_filled(amplitudes, filled)
    drift = _norm_drift(amplitudes)
    logger.debug(
        "piecewise propagation: %d segments, %d distinct Hamiltonians, norm drift %.3e",
        len(points) - 1,
        len(eigen_cache),
        drift,
    )
    return StateHistory(
        times=grid.times,
        amplitudes=amplitudes,
        spec=spec,
        method=Method.PIECEWISE.value,
        norm_drift=drift,
    )


def propagate_rk4(
    spec: SystemSpec,
    schedule: CouplingSource,
    grid: TimeGrid,
    step: float,
    initial: ReducedState | FullState | ComplexArray | None = None,
) -> StateHistory:
    """
    Fixed-step RK4 integration of dx/dt = -i H(t) x.

    Steps never straddle a grid time or switching edge: every interval
    is cut into ceil(length / step) equal sub-steps. Stage times at the
    right end of a sub-step are taken one ulp inside it so a switch-off
    edge still sees the segment's own coupling.
    """
    span = grid.t_end - grid.t_start
    if not step > 0:
        raise PreconditionError(f"rk4 step must be > 0, got {step}")
    if step > span / 100.0:
        raise PreconditionError(f"rk4 step {step:.6g} exceeds 1/100 of the window ({span / 100.0:.6g})")

    terms = hamiltonian_terms(spec)
    state = _initial_amplitudes(spec, initial)
    points = _split_points(grid, schedule.breakpoints())

    generator_cache: dict[tuple[float, float], ComplexArray] = {}

    def generator(t: float) -> ComplexArray:
        couplings = schedule.coupling_values(t)
        if couplings not in generator_cache:
            generator_cache[couplings] = -1j * terms.at(*couplings)
        return generator_cache[couplings]

    sample_index = {float(t): index for index, t in enumerate(grid.times)}
    amplitudes = _empty_rows(grid, spec.dimension)
    amplitudes[0] = state
    filled = 1
    n_steps = 0

    for left, right in zip(points[:-1], points[1:], strict=True):
        n_sub = max(1, math.ceil((right - left) / step - 1e-9))
        h = (right - left) / n_sub
        for sub in range(n_sub):
            t0 = left + sub * h
            # t0 + h may round past the edge
            t1 = np.nextafter(min(t0 + h, right), left)
            a_start = generator(t0)
            a_mid = generator(t0 + 0.5 * h)
            a_end = generator(t1)
            k1 = a_start @ state
            k2 = a_mid @ (state + 0.5 * h * k1)
            k3 = a_mid @ (state + 0.5 * h * k2)
            k4 = a_end @ (state + h * k3)
            state = state + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        n_steps += n_sub
        index = sample_index.get(float(right))
        if index is not None:
            amplitudes[index] = state
            filled += 1

    _require_filled(amplitudes, filled)
    drift = _norm_drift(amplitudes)
    logger.debug("rk4 propagation: %d steps of at most %.3e, norm drift %.3e", n_steps, step, drift)
    # NaN drift from an overflowing state fails this too
    if not drift <= RK4_MAX_NORM_DRIFT:
        raise AccuracyError(
            f"rk4 norm drift {drift:.3e} exceeds {RK4_MAX_NORM_DRIFT:g}; use a smaller step than {step:.6g}"
        )
    return StateHistory(
        times=grid.times,
        amplitudes=amplitudes,
        spec=spec,
        method=Method.RK4.value,
        norm_drift=drift,
    )

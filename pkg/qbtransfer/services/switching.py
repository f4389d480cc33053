"""Time-dependent coupling switches and their accumulated rotation angles."""

from __future__ import annotations

import logging
import math
from collections.abc import Callable, Sequence
from dataclasses import dataclass
from enum import StrEnum
from typing import Protocol, overload, runtime_checkable

import numpy as np

from qbtransfer.errors import ConfigurationError, PreconditionError
from qbtransfer.models import FloatArray, Scenario

logger = logging.getLogger(__name__)

DIRECT_SCALE = 1.0
COHERENT_SCALE = math.sqrt(2.0)
_ALLOWED_SCALES = (DIRECT_SCALE, COHERENT_SCALE)


@runtime_checkable
class CouplingProfile(Protocol):
    """Anything the fixed-step integrator can sample."""

    def evaluate(self, t: float) -> float: ...

    def breakpoints(self) -> tuple[float, ...]: ...


@dataclass(frozen=True)
class Window:
    """Coupling switched on at ``t_on`` (inclusive) and off at ``t_off`` (exclusive)."""

    t_on: float
    t_off: float
    amplitude: float = 1.0

    def __post_init__(self) -> None:
        if not (math.isfinite(self.t_on) and math.isfinite(self.t_off)):
            raise ConfigurationError("window edges must be finite")
        if not self.t_on < self.t_off:
            raise ConfigurationError(f"window needs t_on < t_off, got ({self.t_on}, {self.t_off})")
        if not math.isfinite(self.amplitude):
            raise ConfigurationError("window amplitude must be finite")


@dataclass(frozen=True)
class SwitchingSchedule:
    """Piecewise-constant switching function built from non-overlapping windows."""

    windows: tuple[Window, ...] = ()

    def __post_init__(self) -> None:
        windows = tuple(self.windows)
        for previous, current in zip(windows, windows[1:], strict=False):
            if current.t_on < previous.t_off:
                raise ConfigurationError(
                    "windows must be sorted and non-overlapping: "
                    f"({previous.t_on}, {previous.t_off}) then ({current.t_on}, {current.t_off})"
                )
        object.__setattr__(self, "windows", windows)

    @classmethod
    def single(cls, t_on: float, duration: float, amplitude: float = 1.0) -> SwitchingSchedule:
        return cls((Window(t_on, t_on + duration, amplitude),))

    @classmethod
    def from_samples(cls, times: Sequence[float], amplitudes: Sequence[float]) -> SwitchingSchedule:
        """
        Hold ``amplitudes[i]`` on ``[times[i], times[i+1])``.

        Used to approximate smooth profiles by amplitude windows; zero
        amplitudes leave the coupling off.
        """
        if len(times) != len(amplitudes) + 1:
            raise ConfigurationError("need one more edge time than amplitudes")
        windows = [
            Window(float(t_on), float(t_off), float(amplitude))
            for t_on, t_off, amplitude in zip(times[:-1], times[1:], amplitudes, strict=True)
            if amplitude != 0.0
        ]
        return cls(tuple(windows))

    @property
    def is_step(self) -> bool:
        """True when every window has unit amplitude (the closed forms need this)."""
        return all(window.amplitude == 1.0 for window in self.windows)

    @property
    def end_time(self) -> float:
        if not self.windows:
            return 0.0
        return self.windows[-1].t_off

    def breakpoints(self) -> tuple[float, ...]:
        edges = {edge for window in self.windows for edge in (window.t_on, window.t_off)}
        return tuple(sorted(edges))

    def shifted(self, sigma: float) -> SwitchingSchedule:
        return SwitchingSchedule(
            tuple(Window(w.t_on + sigma, w.t_off + sigma, w.amplitude) for w in self.windows)
        )

    @overload
    def evaluate(self, t: float) -> float: ...

    @overload
    def evaluate(self, t: FloatArray) -> FloatArray: ...

    def evaluate(self, t: float | FloatArray) -> float | FloatArray:
        if np.ndim(t) == 0:
            value = float(t)  # type: ignore[arg-type]
            for window in self.windows:
                if window.t_on <= value < window.t_off:
                    return window.amplitude
            return 0.0

        times = np.asarray(t, dtype=np.float64)
        result = np.zeros_like(times)
        for window in self.windows:
            inside = (times >= window.t_on) & (times < window.t_off)
            result[inside] = window.amplitude
        return result

    @overload
    def integral(self, t: float) -> float: ...

    @overload
    def integral(self, t: FloatArray) -> FloatArray: ...

    def integral(self, t: float | FloatArray) -> float | FloatArray:
        """Exact running integral of the switching function from 0 to ``t``."""
        times = np.asarray(t, dtype=np.float64)
        total = np.zeros_like(times)
        for window in self.windows:
            # Windows before t = 0 do not contribute to an integral starting at 0
            start = max(window.t_on, 0.0)
            if window.t_off <= start:
                continue
            total = total + window.amplitude * (np.clip(times, start, window.t_off) - start)
        if np.ndim(t) == 0:
            return float(total)
        return total


def evaluate(schedule: SwitchingSchedule, t: float) -> float:
    """Switching-function value at ``t``: right-continuous on, 0 at ``t_off``."""
    return schedule.evaluate(t)


@overload
def angle(schedule: SwitchingSchedule, t: float, g: float, scale: float = ...) -> float: ...


@overload
def angle(schedule: SwitchingSchedule, t: FloatArray, g: float, scale: float = ...) -> FloatArray: ...


def angle(
    schedule: SwitchingSchedule,
    t: float | FloatArray,
    g: float,
    scale: float = DIRECT_SCALE,
) -> float | FloatArray:
    """Accumulated rotation ``scale * g * integral_0^t f``, in radians."""
    if not g > 0:
        raise PreconditionError(f"g must be > 0, got {g}")
    if not any(math.isclose(scale, allowed, rel_tol=1e-12) for allowed in _ALLOWED_SCALES):
        raise PreconditionError(f"scale must be 1 or sqrt(2), got {scale}")
    return scale * g * schedule.integral(t)


class TauMode(StrEnum):
    FIRST_MAXIMUM = "first_maximum"
    EXPLICIT = "explicit"


@dataclass(frozen=True)
class TauChoice:
    """How long each coupling window stays on."""

    mode: TauMode = TauMode.FIRST_MAXIMUM
    tau: float | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "mode", TauMode(self.mode))
        if self.mode is TauMode.EXPLICIT and (self.tau is None or not self.tau > 0):
            raise ConfigurationError(f"explicit tau must be > 0, got {self.tau}")

    @classmethod
    def first_maximum(cls) -> TauChoice:
        return cls(TauMode.FIRST_MAXIMUM)

    @classmethod
    def explicit(cls, tau: float) -> TauChoice:
        return cls(TauMode.EXPLICIT, tau)


@dataclass(frozen=True)
class ProtocolSchedule:
    """
    Switching functions of one protocol.

    For the direct scenario ``cm`` plays the role of f(t) and ``bm`` is
    absent. ``warning`` carries a soft validity notice for the caller.
    """

    scenario: Scenario
    cm: SwitchingSchedule
    bm: SwitchingSchedule | None = None
    tau: float = 0.0
    sigma: float | None = None
    warning: str | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "scenario", Scenario(self.scenario))
        if self.scenario is Scenario.DIRECT and self.bm is not None:
            raise ConfigurationError("direct protocol uses a single switching function")
        if self.scenario.is_mediated and self.bm is None:
            raise ConfigurationError(f"{self.scenario} protocol needs both CM and BM switching functions")
        if self.scenario is Scenario.COHERENT and self.bm != self.cm:
            raise ConfigurationError("coherent protocol requires identical CM and BM switching functions")
        if self.scenario is Scenario.TWO_STEP and self.sigma is None:
            raise ConfigurationError("two-step protocol requires a delay sigma")

    @property
    def f(self) -> SwitchingSchedule:
        return self.cm

    @property
    def schedules(self) -> tuple[SwitchingSchedule, ...]:
        if self.bm is None:
            return (self.cm,)
        return (self.cm, self.bm)

    @property
    def is_step(self) -> bool:
        return all(schedule.is_step for schedule in self.schedules)

    @property
    def end_time(self) -> float:
        return max(schedule.end_time for schedule in self.schedules)

    def breakpoints(self) -> tuple[float, ...]:
        return tuple(sorted({point for schedule in self.schedules for point in schedule.breakpoints()}))

    def coupling_values(self, t: float) -> tuple[float, float]:
        f_cm = self.cm.evaluate(t)
        f_bm = self.bm.evaluate(t) if self.bm is not None else 0.0
        return f_cm, f_bm

    def legs_overlap(self) -> bool:
        if self.bm is None or not self.cm.windows or not self.bm.windows:
            return False
        return self.bm.windows[0].t_on < self.cm.end_time


def first_maximum_tau(scenario: Scenario | str, g: float) -> float:
    """On-duration that switches off exactly at the first battery maximum."""
    scenario = Scenario(scenario)
    if scenario is Scenario.COHERENT:
        return math.pi / (COHERENT_SCALE * g)
    return math.pi / (2.0 * g)


def make_protocol_schedule(
    scenario: Scenario | str,
    g: float,
    tau_choice: TauChoice | None = None,
    sigma: float | None = None,
    *,
    separation_warn_factor: float = 5.0,
) -> ProtocolSchedule:
    """
    Build the step switching functions of a protocol.

    Two-step legs must not overlap (sigma >= tau); sigma below
    ``separation_warn_factor * tau`` is accepted with a warning.
    """
    scenario = Scenario(scenario)
    tau_choice = tau_choice or TauChoice.first_maximum()
    if not g > 0:
        raise PreconditionError(f"g must be > 0, got {g}")

    if scenario is Scenario.TWO_STEP and sigma is None:
        raise ConfigurationError("two-step protocol requires sigma")
    if scenario is not Scenario.TWO_STEP and sigma is not None:
        raise ConfigurationError(f"sigma applies to the two-step protocol only, not {scenario}")

    if tau_choice.mode is TauMode.FIRST_MAXIMUM:
        tau = first_maximum_tau(scenario, g)
    else:
        tau = float(tau_choice.tau)  # type: ignore[arg-type]

    leg = SwitchingSchedule.single(0.0, tau)
    if scenario is Scenario.DIRECT:
        return ProtocolSchedule(scenario=scenario, cm=leg, tau=tau)
    if scenario is Scenario.COHERENT:
        return ProtocolSchedule(scenario=scenario, cm=leg, bm=leg, tau=tau)

    assert sigma is not None
    if sigma < tau:
        raise PreconditionError(
            f"two-step legs overlap: sigma={sigma:.6g} < tau={tau:.6g}; "
            "use a larger delay or a numeric method with custom windows"
        )
    warning = None
    if sigma < separation_warn_factor * tau:
        warning = (
            f"two-step delay sigma={sigma:.6g} is below {separation_warn_factor:g}*tau "
            f"({separation_warn_factor * tau:.6g}); legs are separated but not well separated."
        )
        logger.warning(warning)
    return ProtocolSchedule(
        scenario=scenario,
        cm=leg,
        bm=leg.shifted(sigma),
        tau=tau,
        sigma=sigma,
        warning=warning,
    )


@dataclass(frozen=True)
class FunctionProfile:
    """
    Smooth coupling profile given by a callable.

    ``edges`` lists points where ``func`` may jump; the fixed-step
    integrator splits its steps there.
    """

    func: Callable[[float], float]
    edges: tuple[float, ...] = ()

    def evaluate(self, t: float) -> float:
        return float(self.func(float(t)))

    def breakpoints(self) -> tuple[float, ...]:
        return tuple(sorted(self.edges))


@dataclass(frozen=True)
class ProfileSchedule:
    """Arbitrary CM (or f) and BM coupling profiles, sampled by the rk4 propagator only."""

    scenario: Scenario
    cm: CouplingProfile
    bm: CouplingProfile | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "scenario", Scenario(self.scenario))
        if self.scenario is Scenario.DIRECT and self.bm is not None:
            raise ConfigurationError("direct protocol uses a single coupling profile")
        if self.scenario.is_mediated and self.bm is None:
            raise ConfigurationError(f"{self.scenario} protocol needs both CM and BM coupling profiles")

    def breakpoints(self) -> tuple[float, ...]:
        profiles = [self.cm] if self.bm is None else [self.cm, self.bm]
        return tuple(sorted({point for profile in profiles for point in profile.breakpoints()}))

    def coupling_values(self, t: float) -> tuple[float, float]:
        f_cm = self.cm.evaluate(t)
        f_bm = self.bm.evaluate(t) if self.bm is not None else 0.0
        return f_cm, f_bm

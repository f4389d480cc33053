"""
Domain Models

Immutable value types shared by the Hamiltonian builders, the closed-form
solutions, the numerical propagators and the runner.

Units: hbar = 1 and omega_B is the energy unit. Times are in 1/omega_B;
g*t and omega_B*t are exposed as derived views.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import StrEnum
from typing import Any

import numpy as np
import numpy.typing as npt

from qbtransfer.errors import (
    ConfigurationError,
    DimensionMismatchError,
    GridMismatchError,
    StateNormError,
)

ComplexArray = npt.NDArray[np.complex128]
FloatArray = npt.NDArray[np.float64]

NORM_TOLERANCE = 1e-10
HERMITIAN_TOLERANCE = 1e-14

# Coupling above this fraction of omega_B leaves the RWA validity range
RWA_VALIDITY_RATIO = 0.1

SITE_CHARGER = "C"
SITE_MEDIATOR = "M"
SITE_BATTERY = "B"


class Scenario(StrEnum):
    """Transfer protocol."""

    DIRECT = "direct"
    TWO_STEP = "two_step"
    COHERENT = "coherent"

    @property
    def is_mediated(self) -> bool:
        return self is not Scenario.DIRECT


class ModelVariant(StrEnum):
    """Hamiltonian representation used for numerical evolution."""

    REDUCED = "reduced"
    FULL_RWA = "full_rwa"
    FULL_COUNTER_ROTATING = "full_counter_rotating"

    @property
    def is_full(self) -> bool:
        return self is not ModelVariant.REDUCED


class TraceSource(StrEnum):
    ANALYTIC = "analytic"
    NUMERIC = "numeric"


class Method(StrEnum):
    """Evaluation method selectable from the runner."""

    ANALYTIC = "analytic"
    PIECEWISE = "piecewise"
    RK4 = "rk4"

    @property
    def source(self) -> TraceSource:
        if self is Method.ANALYTIC:
            return TraceSource.ANALYTIC
        return TraceSource.NUMERIC


def _readonly(values: Any, dtype: Any) -> np.ndarray:
    array = np.array(values, dtype=dtype, copy=True)
    array.setflags(write=False)
    return array


@dataclass(frozen=True)
class SystemSpec:
    """Level spacings, coupling and model selection for one transfer setup."""

    g: float
    scenario: Scenario = Scenario.DIRECT
    omega_c: float = 1.0
    omega_m: float | None = None
    omega_b: float = 1.0
    model_variant: ModelVariant = ModelVariant.REDUCED

    def __post_init__(self) -> None:
        try:
            object.__setattr__(self, "scenario", Scenario(self.scenario))
            object.__setattr__(
                self, "model_variant", ModelVariant(self.model_variant)
            )
        except ValueError as exc:
            raise ConfigurationError(str(exc)) from exc

        if not self.g > 0:
            raise ConfigurationError(f"coupling g must be > 0, got {self.g}")
        spacings = [self.omega_c, self.omega_b]
        if self.omega_m is not None:
            spacings.append(self.omega_m)
        if any(not value > 0 for value in spacings):
            raise ConfigurationError(f"level spacings must be > 0, got {spacings}")
        if self.scenario is Scenario.DIRECT and self.omega_m is not None:
            raise ConfigurationError("direct scenario has no mediator; omega_m must be absent")

    @classmethod
    def resonant(
        cls,
        scenario: Scenario | str,
        g: float,
        model_variant: ModelVariant | str = ModelVariant.REDUCED,
    ) -> SystemSpec:
        """Identical TLSs at omega_B = 1."""
        scenario = Scenario(scenario)
        return cls(
            g=g,
            scenario=scenario,
            omega_c=1.0,
            omega_m=1.0 if scenario.is_mediated else None,
            omega_b=1.0,
            model_variant=ModelVariant(model_variant),
        )

    @property
    def is_resonant(self) -> bool:
        present = [self.omega_c, self.omega_b]
        if self.omega_m is not None:
            present.append(self.omega_m)
        return all(math.isclose(value, self.omega_b, rel_tol=1e-12) for value in present)

    @property
    def rwa_warning(self) -> bool:
        return self.g > RWA_VALIDITY_RATIO * self.omega_b

    @property
    def n_sites(self) -> int:
        return 3 if self.scenario.is_mediated else 2

    @property
    def site_labels(self) -> tuple[str, ...]:
        if self.scenario.is_mediated:
            return (SITE_CHARGER, SITE_MEDIATOR, SITE_BATTERY)
        return (SITE_CHARGER, SITE_BATTERY)

    @property
    def dimension(self) -> int:
        """State-space dimension of the selected model variant."""
        if self.model_variant.is_full:
            return 2**self.n_sites
        return self.n_sites

    def spacing(self, site: str) -> float:
        if site == SITE_CHARGER:
            return self.omega_c
        if site == SITE_BATTERY:
            return self.omega_b
        if site == SITE_MEDIATOR and self.omega_m is not None:
            return self.omega_m
        raise ConfigurationError(f"site '{site}' is not part of a {self.scenario} system")

    def with_variant(self, model_variant: ModelVariant | str) -> SystemSpec:
        return SystemSpec(
            g=self.g,
            scenario=self.scenario,
            omega_c=self.omega_c,
            omega_m=self.omega_m,
            omega_b=self.omega_b,
            model_variant=ModelVariant(model_variant),
        )


def _check_norm(amplitudes: np.ndarray) -> None:
    norm = float(np.linalg.norm(amplitudes))
    if abs(norm - 1.0) > NORM_TOLERANCE:
        raise StateNormError(f"state norm {norm!r} deviates from 1 by more than {NORM_TOLERANCE}")


@dataclass(frozen=True, eq=False)
class ReducedState:
    """
    Amplitudes over the single-excitation basis.

    Dimension 2: (|1_C 0_B>, |0_C 1_B>).
    Dimension 3: (|1_C 0_M 0_B>, |0_C 1_M 0_B>, |0_C 0_M 1_B>).
    """

    amplitudes: ComplexArray
    time: float = 0.0

    def __post_init__(self) -> None:
        amplitudes = _readonly(self.amplitudes, np.complex128)
        if amplitudes.shape not in ((2,), (3,)):
            raise DimensionMismatchError(
                f"reduced state must have dimension 2 or 3, got shape {amplitudes.shape}"
            )
        _check_norm(amplitudes)
        object.__setattr__(self, "amplitudes", amplitudes)
        object.__setattr__(self, "time", float(self.time))

    @property
    def dimension(self) -> int:
        return int(self.amplitudes.shape[0])

    @property
    def populations(self) -> FloatArray:
        return np.abs(self.amplitudes) ** 2


@dataclass(frozen=True, eq=False)
class FullState:
    """Amplitudes over the tensor-product basis C (x) [M (x)] B, |0> before |1> locally."""

    amplitudes: ComplexArray
    time: float = 0.0

    def __post_init__(self) -> None:
        amplitudes = _readonly(self.amplitudes, np.complex128)
        if amplitudes.shape not in ((4,), (8,)):
            raise DimensionMismatchError(
                f"full state must have dimension 4 or 8, got shape {amplitudes.shape}"
            )
        _check_norm(amplitudes)
        object.__setattr__(self, "amplitudes", amplitudes)
        object.__setattr__(self, "time", float(self.time))

    @property
    def dimension(self) -> int:
        return int(self.amplitudes.shape[0])

    @property
    def n_sites(self) -> int:
        return int(round(math.log2(self.dimension)))

    @property
    def populations(self) -> FloatArray:
        return np.abs(self.amplitudes) ** 2


@dataclass(frozen=True, eq=False)
class HamiltonianMatrix:
    """Dense Hamiltonian evaluated at ``time_tag``."""

    entries: ComplexArray
    time_tag: float = 0.0

    def __post_init__(self) -> None:
        entries = _readonly(self.entries, np.complex128)
        if entries.ndim != 2 or entries.shape[0] != entries.shape[1]:
            raise DimensionMismatchError(f"Hamiltonian must be square, got shape {entries.shape}")
        if entries.shape[0] not in (2, 3, 4, 8):
            raise DimensionMismatchError(f"unsupported Hamiltonian dimension {entries.shape[0]}")
        object.__setattr__(self, "entries", entries)
        object.__setattr__(self, "time_tag", float(self.time_tag))

    @property
    def dimension(self) -> int:
        return int(self.entries.shape[0])

    def is_hermitian(self, atol: float = HERMITIAN_TOLERANCE) -> bool:
        return bool(np.allclose(self.entries, self.entries.conj().T, rtol=0.0, atol=atol))


@dataclass(frozen=True)
class TransferReport:
    """First (or k-th) maximum of the battery energy and the time it is reached."""

    e_b_max: float
    t_b_max: float
    scenario: Scenario
    g: float
    k_index: int = 1
    omega_b: float = 1.0
    method: str = Method.ANALYTIC.value
    interior: bool = True
    note: str | None = None
    e_c_at_max: float | None = None
    e_m_at_max: float | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "scenario", Scenario(self.scenario))
        # Numeric maxima may overshoot omega_B by rounding only
        if not -1e-9 <= self.e_b_max <= self.omega_b + 1e-9:
            raise ConfigurationError(f"e_b_max {self.e_b_max} outside [0, omega_B]")
        if not self.t_b_max > 0:
            raise ConfigurationError(f"t_b_max must be > 0, got {self.t_b_max}")

    @property
    def g_t_max(self) -> float:
        return self.g * self.t_b_max

    @property
    def omega_b_t_max(self) -> float:
        return self.omega_b * self.t_b_max

    def to_dict(self) -> dict[str, Any]:
        return {
            "scenario": self.scenario.value,
            "method": self.method,
            "k_index": self.k_index,
            "g_over_omega_b": float(self.g / self.omega_b),
            "e_b_max": float(self.e_b_max / self.omega_b),
            "t_b_max": float(self.t_b_max),
            "g_t_max": float(self.g_t_max),
            "omega_b_t_max": float(self.omega_b_t_max),
            "interior": self.interior,
            "note": self.note,
            "e_c_at_max": None if self.e_c_at_max is None else float(self.e_c_at_max / self.omega_b),
            "e_m_at_max": None if self.e_m_at_max is None else float(self.e_m_at_max / self.omega_b),
        }


@dataclass(frozen=True, eq=False)
class TimeGrid:
    """Strictly increasing sample times containing every switching discontinuity."""

    times: FloatArray
    n_samples: int = 0
    breakpoints: tuple[float, ...] = field(default_factory=tuple)

    def __post_init__(self) -> None:
        times = _readonly(self.times, np.float64)
        if times.ndim != 1 or times.shape[0] < 2:
            raise ConfigurationError("time grid needs at least 2 samples")
        if np.any(np.diff(times) <= 0):
            raise ConfigurationError("time grid must be strictly increasing")
        object.__setattr__(self, "times", times)
        if not self.n_samples:
            object.__setattr__(self, "n_samples", int(times.shape[0]))

    @classmethod
    def build(
        cls,
        t_start: float,
        t_end: float,
        n_samples: int,
        breakpoints: tuple[float, ...] | list[float] = (),
    ) -> TimeGrid:
        """Uniform samples augmented with the breakpoints that fall inside the window."""
        if n_samples < 2:
            raise ConfigurationError(f"n_samples must be >= 2, got {n_samples}")
        if not t_end > t_start:
            raise ConfigurationError(f"t_end ({t_end}) must exceed t_start ({t_start})")

        uniform = np.linspace(t_start, t_end, n_samples)
        inside = sorted({float(b) for b in breakpoints if t_start <= b <= t_end})
        merge_tol = 1e-9 * (t_end - t_start)
        for point in inside:
            nearest = int(np.argmin(np.abs(uniform - point)))
            if abs(uniform[nearest] - point) <= merge_tol:
                uniform[nearest] = point
        times = np.unique(np.concatenate([uniform, np.array(inside, dtype=np.float64)]))
        return cls(times=times, n_samples=n_samples, breakpoints=tuple(inside))

    @property
    def t_start(self) -> float:
        return float(self.times[0])

    @property
    def t_end(self) -> float:
        return float(self.times[-1])

    def __len__(self) -> int:
        return int(self.times.shape[0])


@dataclass(frozen=True, eq=False)
class EnergyTrace:
    """Stored energies on a time grid, as ratios to omega_B."""

    times: FloatArray
    e_b: FloatArray
    e_c: FloatArray
    scenario: Scenario
    g: float
    e_m: FloatArray | None = None
    source: TraceSource = TraceSource.ANALYTIC
    method: str = Method.ANALYTIC.value
    omega_b: float = 1.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "scenario", Scenario(self.scenario))
        object.__setattr__(self, "source", TraceSource(self.source))
        for name in ("times", "e_b", "e_c"):
            object.__setattr__(self, name, _readonly(getattr(self, name), np.float64))
        if self.e_m is not None:
            object.__setattr__(self, "e_m", _readonly(self.e_m, np.float64))

        length = self.times.shape[0]
        channels = self.channels()
        if any(values.shape != (length,) for values in channels.values()):
            raise GridMismatchError("all energy channels must match the time grid length")
        if self.scenario.is_mediated and self.e_m is None:
            raise ConfigurationError("mediated traces require an E_M channel")
        if not self.scenario.is_mediated and self.e_m is not None:
            raise ConfigurationError("direct traces carry no E_M channel")

    def channels(self) -> dict[str, FloatArray]:
        result = {"E_B": self.e_b, "E_C": self.e_c}
        if self.e_m is not None:
            result["E_M"] = self.e_m
        return result

    @property
    def g_t(self) -> FloatArray:
        return self.g * self.times

    @property
    def omega_b_t(self) -> FloatArray:
        return self.omega_b * self.times

    def energy_sum(self) -> FloatArray:
        total = self.e_b + self.e_c
        if self.e_m is not None:
            total = total + self.e_m
        return total

    def __len__(self) -> int:
        return int(self.times.shape[0])

"""
Hamiltonian Builders

Reduced single-excitation matrices and full tensor-product matrices for
the direct (C-B) and mediated (C-M-B) configurations.

Full-space ordering is big-endian C (x) [M (x)] B with |0> before |1>
on every site, so |1_C 0_B> is index 2 and |1_C 0_M 0_B> is index 4.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from functools import reduce

import numpy as np

from qbtransfer.errors import ConfigurationError, DimensionMismatchError
from qbtransfer.models import (
    ComplexArray,
    HamiltonianMatrix,
    ModelVariant,
    Scenario,
    SystemSpec,
)
from qbtransfer.services.switching import ProtocolSchedule

logger = logging.getLogger(__name__)

IDENTITY = np.eye(2, dtype=np.complex128)
SIGMA_Z = np.diag([-1.0, 1.0]).astype(np.complex128)
# sigma_+ = |1><0| and sigma_- = |0><1| in the (|0>, |1>) basis
SIGMA_PLUS = np.array([[0.0, 0.0], [1.0, 0.0]], dtype=np.complex128)
SIGMA_MINUS = np.array([[0.0, 1.0], [0.0, 0.0]], dtype=np.complex128)


def embed(operator: ComplexArray, site: int, n_sites: int) -> ComplexArray:
    """Place a single-site operator on ``site`` of an ``n_sites`` register."""
    factors = [operator if index == site else IDENTITY for index in range(n_sites)]
    return reduce(np.kron, factors)


def _bonds(spec: SystemSpec, f_cm: float, f_bm: float) -> list[tuple[int, int, float]]:
    if spec.scenario is Scenario.DIRECT:
        return [(0, 1, f_cm)]
    return [(0, 1, f_cm), (1, 2, f_bm)]


def build_reduced_direct(spec: SystemSpec, f_value: float, *, time_tag: float = 0.0) -> HamiltonianMatrix:
    """2x2 charger-battery Hamiltonian in the (|1_C 0_B>, |0_C 1_B>) basis."""
    if spec.scenario is not Scenario.DIRECT:
        raise ConfigurationError(f"reduced direct Hamiltonian needs the direct scenario, got {spec.scenario}")

    detuning = (spec.omega_c - spec.omega_b) / 2.0
    coupling = spec.g * f_value
    entries = np.array(
        [[detuning, coupling], [coupling, -detuning]],
        dtype=np.complex128,
    )
    return HamiltonianMatrix(entries=entries, time_tag=time_tag)


def build_reduced_mediated(
    spec: SystemSpec,
    f_cm: float,
    f_bm: float,
    *,
    time_tag: float = 0.0,
) -> HamiltonianMatrix:
    """
    3x3 tridiagonal Hamiltonian in the (|100>, |010>, |001>) basis.

    On resonance the constant -omega_B/2 diagonal is dropped; detuned
    systems keep the diagonal exactly as the C-M-B sector presents it.
    """
    if not spec.scenario.is_mediated:
        raise ConfigurationError(f"reduced mediated Hamiltonian needs a mediated scenario, got {spec.scenario}")
    if spec.omega_m is None:
        raise ConfigurationError("mediated scenario requires omega_m")

    omega_c, omega_m, omega_b = spec.omega_c, spec.omega_m, spec.omega_b
    if spec.is_resonant:
        diagonal = [0.0, 0.0, 0.0]
    else:
        diagonal = [
            (omega_c - omega_m - omega_b) / 2.0,
            (-omega_c + omega_m - omega_b) / 2.0,
            (-omega_c - omega_m + omega_b) / 2.0,
        ]

    g_cm = spec.g * f_cm
    g_bm = spec.g * f_bm
    entries = np.array(
        [
            [diagonal[0], g_cm, 0.0],
            [g_cm, diagonal[1], g_bm],
            [0.0, g_bm, diagonal[2]],
        ],
        dtype=np.complex128,
    )
    return HamiltonianMatrix(entries=entries, time_tag=time_tag)


def build_full(
    spec: SystemSpec,
    f_cm: float,
    f_bm: float = 0.0,
    *,
    time_tag: float = 0.0,
) -> HamiltonianMatrix:
    """
    Tensor-product Hamiltonian: free terms plus exchange on each coupled bond.

    The counter-rotating variant adds sigma_- sigma_- + sigma_+ sigma_+ on
    every bond with the same g*f amplitude. For the direct scenario
    ``f_cm`` is the single switching value f(t).
    """
    if not spec.model_variant.is_full:
        raise ConfigurationError(f"full Hamiltonian needs a full model variant, got {spec.model_variant}")

    n_sites = spec.n_sites
    dimension = 2**n_sites
    entries = np.zeros((dimension, dimension), dtype=np.complex128)
    for site, label in enumerate(spec.site_labels):
        entries += 0.5 * spec.spacing(label) * embed(SIGMA_Z, site, n_sites)

    counter_rotating = spec.model_variant is ModelVariant.FULL_COUNTER_ROTATING
    for left, right, f_value in _bonds(spec, f_cm, f_bm):
        if f_value == 0.0:
            continue
        amplitude = spec.g * f_value
        lower_left = embed(SIGMA_MINUS, left, n_sites)
        raise_left = embed(SIGMA_PLUS, left, n_sites)
        lower_right = embed(SIGMA_MINUS, right, n_sites)
        raise_right = embed(SIGMA_PLUS, right, n_sites)
        entries += amplitude * (lower_left @ raise_right + raise_left @ lower_right)
        if counter_rotating:
            entries += amplitude * (lower_left @ lower_right + raise_left @ raise_right)

    return HamiltonianMatrix(entries=entries, time_tag=time_tag)


def build_hamiltonian(spec: SystemSpec, schedule: ProtocolSchedule, t: float) -> HamiltonianMatrix:
    """Hamiltonian of ``spec``'s model variant at time ``t``."""
    f_cm, f_bm = schedule.coupling_values(t)
    if spec.model_variant.is_full:
        return build_full(spec, f_cm, f_bm, time_tag=t)
    if spec.scenario is Scenario.DIRECT:
        return build_reduced_direct(spec, f_cm, time_tag=t)
    return build_reduced_mediated(spec, f_cm, f_bm, time_tag=t)


@dataclass(frozen=True, eq=False)
class HamiltonianTerms:
    """H(t) = drift + f_cm(t) * cm + f_bm(t) * bm."""

    drift: ComplexArray
    cm: ComplexArray
    bm: ComplexArray

    def at(self, f_cm: float, f_bm: float = 0.0) -> ComplexArray:
        return self.drift + f_cm * self.cm + f_bm * self.bm


def hamiltonian_terms(spec: SystemSpec) -> HamiltonianTerms:
    """Split the model Hamiltonian into its drift and per-coupling parts."""
    if spec.model_variant.is_full:

        def builder(f_cm: float, f_bm: float) -> ComplexArray:
            return build_full(spec, f_cm, f_bm).entries

    elif spec.scenario is Scenario.DIRECT:

        def builder(f_cm: float, f_bm: float) -> ComplexArray:
            return build_reduced_direct(spec, f_cm).entries

    else:

        def builder(f_cm: float, f_bm: float) -> ComplexArray:
            return build_reduced_mediated(spec, f_cm, f_bm).entries

    drift = builder(0.0, 0.0)
    return HamiltonianTerms(
        drift=drift,
        cm=builder(1.0, 0.0) - drift,
        bm=builder(0.0, 1.0) - drift,
    )


def excitation_number_operator(n_sites: int) -> ComplexArray:
    """Total number of excited sites, diagonal in the product basis."""
    counts = [bin(index).count("1") for index in range(2**n_sites)]
    return np.diag(np.array(counts, dtype=np.complex128))


def single_excitation_indices(n_sites: int) -> tuple[int, ...]:
    """Full-space indices of |1_C 0 ...>, ..., |... 0 1_B>, charger first."""
    return tuple(1 << (n_sites - 1 - site) for site in range(n_sites))


def sector_offset(spec: SystemSpec) -> float:
    """Constant dropped from the single-excitation block when forming the reduced matrix."""
    if spec.scenario.is_mediated and spec.is_resonant:
        return -spec.omega_b / 2.0
    return 0.0


def single_excitation_block(full: HamiltonianMatrix, spec: SystemSpec) -> HamiltonianMatrix:
    """Restrict a full Hamiltonian to the single-excitation sector, offset removed."""
    expected = 2**spec.n_sites
    if full.dimension != expected:
        raise DimensionMismatchError(f"expected a {expected}x{expected} Hamiltonian, got {full.dimension}")
    indices = single_excitation_indices(spec.n_sites)
    block = full.entries[np.ix_(indices, indices)] - sector_offset(spec) * np.eye(len(indices))
    return HamiltonianMatrix(entries=block, time_tag=full.time_tag)


def designated_initial_amplitudes(spec: SystemSpec) -> ComplexArray:
    """Charger excited, everything else in the ground state."""
    amplitudes = np.zeros(spec.dimension, dtype=np.complex128)
    if spec.model_variant.is_full:
        amplitudes[single_excitation_indices(spec.n_sites)[0]] = 1.0
    else:
        amplitudes[0] = 1.0
    return amplitudes


def embed_reduced(amplitudes: ComplexArray, n_sites: int) -> ComplexArray:
    """Lift single-excitation amplitudes into the full product space."""
    if amplitudes.shape[-1] != n_sites:
        raise DimensionMismatchError(f"expected {n_sites} reduced amplitudes, got {amplitudes.shape[-1]}")
    full = np.zeros((*amplitudes.shape[:-1], 2**n_sites), dtype=np.complex128)
    full[..., list(single_excitation_indices(n_sites))] = amplitudes
    return full

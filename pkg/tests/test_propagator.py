"""Tests for exact segment propagation and the fixed-step integrator."""

import math

import numpy as np
import pytest
from scipy.integrate import quad
from scipy.linalg import expm

from qbtransfer.errors import (
    AccuracyError,
    DimensionMismatchError,
    NotPiecewiseConstantError,
    PreconditionError,
)
from qbtransfer.models import FullState, ModelVariant, ReducedState, Scenario, SystemSpec, TimeGrid
from qbtransfer.services.analytic import analytic_state
from qbtransfer.services.hamiltonians import build_reduced_mediated
from qbtransfer.services.propagator import propagate_piecewise, propagate_rk4
from qbtransfer.services.switching import (
    FunctionProfile,
    ProfileSchedule,
    ProtocolSchedule,
    SwitchingSchedule,
    TauChoice,
    make_protocol_schedule,
)

G = 0.05


class TestPiecewise:
    """Exact unitary on every constant segment."""

    def test_reduced_direct_rotation(self, direct_spec):
        schedule = make_protocol_schedule(Scenario.DIRECT, G, TauChoice.explicit(100.0))
        grid = TimeGrid.build(0.0, 30.0, 31)
        history = propagate_piecewise(direct_spec, schedule, grid)
        expected = np.stack([np.cos(G * grid.times), -1j * np.sin(G * grid.times)], axis=1)
        np.testing.assert_allclose(history.amplitudes, expected, atol=1e-13)

    def test_switched_off_coupling_leaves_state_constant(self, direct_spec):
        schedule = ProtocolSchedule(Scenario.DIRECT, cm=SwitchingSchedule())
        history = propagate_piecewise(direct_spec, schedule, TimeGrid.build(0.0, 50.0, 11))
        np.testing.assert_allclose(history.amplitudes, np.tile([1.0, 0.0], (11, 1)), atol=1e-15)

    @pytest.mark.parametrize("fixture", ["direct", "two_step", "coherent"])
    def test_matches_closed_form_states(self, request, grid_for, fixture):
        spec = request.getfixturevalue(f"{fixture}_spec")
        schedule = request.getfixturevalue(f"{fixture}_schedule")
        grid = grid_for(schedule, n_samples=120)
        history = propagate_piecewise(spec, schedule, grid)
        expected = np.stack([analytic_state(spec, schedule, float(t)).amplitudes for t in grid.times])
        np.testing.assert_allclose(history.amplitudes, expected, atol=1e-10)

    def test_norm_preserved_across_many_segments(self, two_step_spec):
        times = np.linspace(0.0, 200.0, 401)
        amplitudes = np.abs(np.sin(times[:-1])) + 0.1
        cm = SwitchingSchedule.from_samples(times, amplitudes)
        schedule = ProtocolSchedule(Scenario.TWO_STEP, cm=cm, bm=cm.shifted(0.25), sigma=0.25)
        history = propagate_piecewise(two_step_spec, schedule, TimeGrid.build(0.0, 200.0, 57))
        assert history.norm_drift <= 1e-12

    def test_detuned_constant_hamiltonian_matches_expm(self):
        spec = SystemSpec(g=0.08, scenario=Scenario.COHERENT, omega_c=1.3, omega_m=0.9, omega_b=1.0)
        schedule = make_protocol_schedule(Scenario.COHERENT, 0.08, TauChoice.explicit(100.0))
        grid = TimeGrid.build(0.0, 40.0, 9)
        history = propagate_piecewise(spec, schedule, grid)
        matrix = build_reduced_mediated(spec, 1.0, 1.0).entries
        expected = np.stack([expm(-1j * matrix * t) @ np.array([1.0, 0.0, 0.0]) for t in grid.times])
        np.testing.assert_allclose(history.amplitudes, expected, atol=1e-11)

    def test_custom_initial_state(self, direct_spec):
        schedule = ProtocolSchedule(Scenario.DIRECT, cm=SwitchingSchedule())
        initial = ReducedState(np.array([0.6, 0.8]))
        history = propagate_piecewise(direct_spec, schedule, TimeGrid.build(0.0, 1.0, 3), initial)
        np.testing.assert_allclose(history.final.amplitudes, [0.6, 0.8])

    def test_initial_state_dimension_checked(self, direct_spec, direct_schedule):
        full_state = FullState(np.array([0.0, 0.0, 1.0, 0.0]))
        with pytest.raises(DimensionMismatchError):
            propagate_piecewise(direct_spec, direct_schedule, TimeGrid.build(0.0, 1.0, 3), full_state)

    def test_edge_just_before_grid_time_keeps_every_sample(self, direct_spec):
        grid = TimeGrid.build(0.0, 10.0, 11)
        near = ProtocolSchedule(Scenario.DIRECT, cm=SwitchingSchedule.single(5.0 - 1e-12, 50.0))
        on_grid = ProtocolSchedule(Scenario.DIRECT, cm=SwitchingSchedule.single(5.0, 50.0))

        history = propagate_piecewise(direct_spec, near, grid)

        np.testing.assert_allclose(history.norms(), 1.0, atol=1e-12)
        assert history.norm_drift <= 1e-12
        reference = propagate_piecewise(direct_spec, on_grid, grid)
        np.testing.assert_allclose(history.amplitudes, reference.amplitudes, atol=1e-10)

    def test_smooth_profile_rejected(self, direct_spec):
        schedule = ProfileSchedule(Scenario.DIRECT, FunctionProfile(lambda t: math.sin(t) ** 2))
        with pytest.raises(NotPiecewiseConstantError):
            propagate_piecewise(direct_spec, schedule, TimeGrid.build(0.0, 1.0, 3))

    def test_window_profiles_accepted(self, direct_spec):
        schedule = ProfileSchedule(Scenario.DIRECT, SwitchingSchedule.single(0.0, 10.0))
        history = propagate_piecewise(direct_spec, schedule, TimeGrid.build(0.0, 10.0, 3))
        assert abs(history.final.amplitudes[1]) ** 2 == pytest.approx(math.sin(0.5) ** 2)


class TestBeyondRwa:
    """Counter-rotating terms in the full tensor-product model."""

    @pytest.mark.parametrize("fixture", ["direct", "two_step"])
    def test_single_excitation_sector_is_invariant(self, request, grid_for, fixture):
        reduced_spec = request.getfixturevalue(f"{fixture}_spec")
        schedule = request.getfixturevalue(f"{fixture}_schedule")
        full_spec = reduced_spec.with_variant(ModelVariant.FULL_COUNTER_ROTATING)
        grid = grid_for(schedule, n_samples=200)

        reduced = propagate_piecewise(reduced_spec, schedule, grid)
        full = propagate_piecewise(full_spec, schedule, grid)

        assert full_spec.dimension == 2**reduced_spec.n_sites
        assert full.sector_leakage().max() <= 1e-10
        np.testing.assert_allclose(full.reduced_amplitudes(), reduced.amplitudes, atol=1e-10)

    def test_direct_transfer_complete_at_first_maximum(self):
        spec = SystemSpec.resonant(Scenario.DIRECT, G, ModelVariant.FULL_COUNTER_ROTATING)
        schedule = make_protocol_schedule(Scenario.DIRECT, G)
        history = propagate_piecewise(spec, schedule, TimeGrid.build(0.0, schedule.tau, 5))
        populations = np.abs(history.final.amplitudes) ** 2
        # |0_C 1_B> is index 1
        assert populations[1] == pytest.approx(1.0, abs=1e-10)

    def test_coherent_protocol_leaks_out_of_sector(self, coherent_spec, coherent_schedule, grid_for):
        full_spec = coherent_spec.with_variant(ModelVariant.FULL_COUNTER_ROTATING)
        history = propagate_piecewise(full_spec, coherent_schedule, grid_for(coherent_schedule, n_samples=200))
        assert history.sector_leakage().max() > 1e-6

    def test_rwa_full_model_matches_reduced(self, coherent_spec, coherent_schedule, grid_for):
        full_spec = coherent_spec.with_variant(ModelVariant.FULL_RWA)
        grid = grid_for(coherent_schedule, n_samples=100)
        full = propagate_piecewise(full_spec, coherent_schedule, grid)
        reduced = propagate_piecewise(coherent_spec, coherent_schedule, grid)
        np.testing.assert_allclose(full.reduced_amplitudes(), reduced.amplitudes, atol=1e-10)


class TestRk4:
    """Fixed-step fourth-order integration."""

    def test_agrees_with_exact_propagation(self, direct_spec, direct_schedule, grid_for):
        grid = grid_for(direct_schedule, n_samples=100)
        exact = propagate_piecewise(direct_spec, direct_schedule, grid)
        approx = propagate_rk4(direct_spec, direct_schedule, grid, 1e-3)
        assert np.abs(approx.amplitudes - exact.amplitudes).max() <= 1e-8

    def test_zero_hamiltonian_is_identity(self, direct_spec):
        schedule = ProtocolSchedule(Scenario.DIRECT, cm=SwitchingSchedule())
        history = propagate_rk4(direct_spec, schedule, TimeGrid.build(0.0, 10.0, 5), 0.01)
        np.testing.assert_array_equal(history.amplitudes, np.tile([1.0, 0.0], (5, 1)))
        assert history.norm_drift == 0.0

    def test_fourth_order_convergence(self):
        from qbtransfer.services.verification import rk4_convergence_ratio

        assert rk4_convergence_ratio(G, 0.3) == pytest.approx(16.0, rel=0.25)

    def test_last_stage_before_switch_off_keeps_coupling(self, direct_spec, direct_schedule):
        # 105 steps of 0.3 over the window; t0 + h rounds one ulp past the switch-off edge
        grid = TimeGrid.build(0.0, direct_schedule.end_time, 2, direct_schedule.breakpoints())

        history = propagate_rk4(direct_spec, direct_schedule, grid, 0.3)

        assert history.norm_drift <= 1e-10
        np.testing.assert_allclose(history.final.amplitudes, [0.0, -1j], atol=1e-7)

    def test_edge_just_before_grid_time_matches_exact(self, direct_spec):
        grid = TimeGrid.build(0.0, 10.0, 11)
        schedule = ProtocolSchedule(Scenario.DIRECT, cm=SwitchingSchedule.single(5.0 - 1e-12, 50.0))

        approx = propagate_rk4(direct_spec, schedule, grid, 0.01)

        assert not np.isnan(approx.amplitudes).any()
        exact = propagate_piecewise(direct_spec, schedule, grid)
        assert np.abs(approx.amplitudes - exact.amplitudes).max() <= 1e-9

    def test_switch_edges_inside_intervals(self, two_step_spec, two_step_schedule):
        # A coarse grid whose samples miss every switching edge
        grid = TimeGrid(times=np.linspace(0.0, 130.0, 4))
        exact = propagate_piecewise(two_step_spec, two_step_schedule, grid)
        approx = propagate_rk4(two_step_spec, two_step_schedule, grid, 1e-2)
        assert np.abs(approx.amplitudes - exact.amplitudes).max() <= 1e-8

    def test_smooth_profile_matches_quadrature_angle(self, direct_spec):
        period = 2.0 * math.pi / (2.0 * G)

        def ramp(t):
            return math.sin(math.pi * t / period) ** 2 if 0.0 <= t < period else 0.0

        schedule = ProfileSchedule(Scenario.DIRECT, FunctionProfile(ramp, edges=(0.0, period)))
        history = propagate_rk4(direct_spec, schedule, TimeGrid.build(0.0, period, 5), 1e-2)
        accumulated, _ = quad(ramp, 0.0, period)
        phi = G * accumulated
        np.testing.assert_allclose(history.final.amplitudes, [math.cos(phi), -1j * math.sin(phi)], atol=1e-9)
        assert phi == pytest.approx(math.pi / 2.0)

    @pytest.mark.parametrize("step", [0.0, -1e-3, 1.0])
    def test_step_bounds(self, direct_spec, direct_schedule, step):
        with pytest.raises(PreconditionError):
            propagate_rk4(direct_spec, direct_schedule, TimeGrid.build(0.0, 10.0, 3), step)

    def test_norm_drift_raises_accuracy_error(self):
        spec = SystemSpec(g=G, omega_c=50.0, omega_b=50.0, model_variant=ModelVariant.FULL_RWA)
        schedule = ProtocolSchedule(Scenario.DIRECT, cm=SwitchingSchedule())
        # |1_C 1_B> has energy 50, far outside the rk4 stability region at step 1
        doubly_excited = FullState(np.array([0.0, 0.0, 0.0, 1.0]))
        with pytest.raises(AccuracyError):
            propagate_rk4(spec, schedule, TimeGrid.build(0.0, 100.0, 2), 1.0, doubly_excited)

    def test_overflowing_state_raises_accuracy_error(self):
        spec = SystemSpec(g=G, omega_c=50.0, omega_b=50.0, model_variant=ModelVariant.FULL_RWA)
        schedule = ProtocolSchedule(Scenario.DIRECT, cm=SwitchingSchedule())
        doubly_excited = FullState(np.array([0.0, 0.0, 0.0, 1.0]))
        # growth of ~2.6e5 per step overflows to inf and then NaN well before t = 1000
        with pytest.raises(AccuracyError, match="nan|inf"):
            propagate_rk4(spec, schedule, TimeGrid.build(0.0, 1000.0, 2), 1.0, doubly_excited)


class TestStateHistory:
    def test_iterates_states(self, direct_spec, direct_schedule):
        history = propagate_piecewise(direct_spec, direct_schedule, TimeGrid.build(0.0, 10.0, 4))
        states = list(history)
        assert len(states) == len(history) == 4
        assert all(isinstance(state, ReducedState) for state in states)
        assert states[-1].time == pytest.approx(10.0)

    def test_reduced_history_has_no_leakage(self, direct_spec, direct_schedule):
        history = propagate_piecewise(direct_spec, direct_schedule, TimeGrid.build(0.0, 10.0, 4))
        assert not history.sector_leakage().any()
        np.testing.assert_allclose(history.norms(), 1.0)

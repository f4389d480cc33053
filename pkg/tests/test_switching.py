"""Tests for switching functions, rotation angles and protocol schedules."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from qbtransfer.errors import ConfigurationError, PreconditionError
from qbtransfer.models import Scenario
from qbtransfer.services.switching import (
    COHERENT_SCALE,
    FunctionProfile,
    ProfileSchedule,
    SwitchingSchedule,
    TauChoice,
    Window,
    angle,
    evaluate,
    first_maximum_tau,
    make_protocol_schedule,
)


class TestSwitchingSchedule:
    """Window semantics."""

    def test_switch_is_on_at_t_on_and_off_at_t_off(self):
        schedule = SwitchingSchedule.single(2.0, 3.0)
        assert evaluate(schedule, 1.999) == 0.0
        assert evaluate(schedule, 2.0) == 1.0
        assert evaluate(schedule, 4.999) == 1.0
        assert evaluate(schedule, 5.0) == 0.0

    def test_array_evaluation_matches_scalar(self):
        schedule = SwitchingSchedule((Window(0.0, 1.0), Window(2.0, 3.0, 0.5)))
        times = [0.0, 0.5, 1.0, 2.0, 2.5, 3.0]
        assert schedule.evaluate(np.array(times)).tolist() == [
            schedule.evaluate(t) for t in times
        ]

    def test_overlapping_windows_rejected(self):
        with pytest.raises(ConfigurationError):
            SwitchingSchedule((Window(0.0, 2.0), Window(1.0, 3.0)))

    def test_touching_windows_allowed(self):
        schedule = SwitchingSchedule((Window(0.0, 1.0), Window(1.0, 2.0)))
        assert schedule.breakpoints() == (0.0, 1.0, 2.0)
        assert schedule.integral(2.0) == pytest.approx(2.0)

    def test_empty_window_rejected(self):
        with pytest.raises(ConfigurationError):
            Window(1.0, 1.0)

    def test_integral_is_clipped_to_window(self):
        schedule = SwitchingSchedule.single(0.0, 4.0)
        assert schedule.integral(-1.0) == 0.0
        assert schedule.integral(2.5) == pytest.approx(2.5)
        assert schedule.integral(10.0) == pytest.approx(4.0)

    def test_from_samples_skips_zero_amplitudes(self):
        schedule = SwitchingSchedule.from_samples([0.0, 1.0, 2.0, 3.0], [0.5, 0.0, 1.0])
        assert len(schedule.windows) == 2
        assert not schedule.is_step
        assert schedule.integral(3.0) == pytest.approx(1.5)

    def test_from_samples_needs_matching_lengths(self):
        with pytest.raises(ConfigurationError):
            SwitchingSchedule.from_samples([0.0, 1.0], [1.0, 1.0])

    def test_shifted_moves_breakpoints(self):
        schedule = SwitchingSchedule.single(0.0, 2.0).shifted(5.0)
        assert schedule.breakpoints() == (5.0, 7.0)
        assert schedule.end_time == 7.0

    def test_integral_matches_quadrature(self):
        schedule = SwitchingSchedule((Window(0.5, 1.5, 0.3), Window(2.0, 4.0, 1.0), Window(5.0, 5.5, 2.0)))
        numeric, _ = quad(schedule.evaluate, 0.0, 6.0, points=schedule.breakpoints(), limit=200)
        assert schedule.integral(6.0) == pytest.approx(numeric, abs=1e-10)

    @settings(max_examples=100, deadline=None)
    @given(
        t_on=st.floats(min_value=0.0, max_value=10.0),
        duration=st.floats(min_value=0.01, max_value=10.0),
        shift=st.floats(min_value=0.0, max_value=10.0),
        t=st.floats(min_value=0.0, max_value=30.0),
    )
    def test_shifted_integral_is_delayed_integral(self, t_on, duration, shift, t):
        schedule = SwitchingSchedule.single(t_on, duration)
        assert schedule.shifted(shift).integral(t + shift) == pytest.approx(schedule.integral(t), abs=1e-9)

    @settings(max_examples=100, deadline=None)
    @given(
        t_on=st.floats(min_value=0.0, max_value=10.0),
        duration=st.floats(min_value=0.01, max_value=10.0),
        t_a=st.floats(min_value=0.0, max_value=30.0),
        t_b=st.floats(min_value=0.0, max_value=30.0),
    )
    def test_integral_is_monotone_for_positive_amplitude(self, t_on, duration, t_a, t_b):
        schedule = SwitchingSchedule.single(t_on, duration)
        low, high = sorted((t_a, t_b))
        assert schedule.integral(low) <= schedule.integral(high) + 1e-12


class TestAngle:
    def test_direct_angle(self):
        schedule = SwitchingSchedule.single(0.0, 100.0)
        assert angle(schedule, 10.0, 0.05) == pytest.approx(0.5)

    def test_coherent_scale(self):
        schedule = SwitchingSchedule.single(0.0, 100.0)
        assert angle(schedule, 10.0, 0.05, COHERENT_SCALE) == pytest.approx(0.5 * math.sqrt(2.0))

    def test_angle_freezes_after_window(self):
        schedule = SwitchingSchedule.single(0.0, 10.0)
        assert angle(schedule, 10.0, 0.1) == angle(schedule, 50.0, 0.1)

    def test_rejects_other_scales(self):
        with pytest.raises(PreconditionError):
            angle(SwitchingSchedule.single(0.0, 1.0), 0.5, 0.05, 2.0)

    def test_rejects_non_positive_g(self):
        with pytest.raises(PreconditionError):
            angle(SwitchingSchedule.single(0.0, 1.0), 0.5, 0.0)


class TestProtocolSchedule:
    """Step protocols built from a tau choice."""

    def test_first_maximum_tau(self):
        assert first_maximum_tau(Scenario.DIRECT, 0.05) == pytest.approx(10.0 * math.pi)
        assert first_maximum_tau(Scenario.COHERENT, 0.05) == pytest.approx(math.pi / (math.sqrt(2.0) * 0.05))

    def test_direct_schedule_has_single_switch(self):
        schedule = make_protocol_schedule(Scenario.DIRECT, 0.05)
        assert schedule.bm is None
        assert schedule.breakpoints() == (0.0, schedule.tau)
        assert schedule.coupling_values(1.0) == (1.0, 0.0)

    def test_coherent_schedule_switches_both_bonds_together(self):
        schedule = make_protocol_schedule(Scenario.COHERENT, 0.05)
        assert schedule.bm == schedule.cm
        assert schedule.coupling_values(1.0) == (1.0, 1.0)

    def test_two_step_legs_are_delayed_by_sigma(self):
        schedule = make_protocol_schedule(Scenario.TWO_STEP, 0.05, sigma=200.0)
        assert schedule.breakpoints() == (0.0, schedule.tau, 200.0, 200.0 + schedule.tau)
        assert schedule.coupling_values(100.0) == (0.0, 0.0)
        assert schedule.coupling_values(201.0) == (0.0, 1.0)
        assert schedule.warning is None
        assert not schedule.legs_overlap()

    def test_two_step_requires_sigma_at_least_tau(self):
        with pytest.raises(PreconditionError):
            make_protocol_schedule(Scenario.TWO_STEP, 0.05, sigma=10.0)

    def test_two_step_close_legs_warn(self, caplog):
        schedule = make_protocol_schedule(Scenario.TWO_STEP, 0.05, sigma=50.0)
        assert schedule.warning is not None
        assert "not well separated" in schedule.warning
        assert "not well separated" in caplog.text

    def test_two_step_without_sigma_rejected(self):
        with pytest.raises(ConfigurationError):
            make_protocol_schedule(Scenario.TWO_STEP, 0.05)

    def test_sigma_rejected_outside_two_step(self):
        with pytest.raises(ConfigurationError):
            make_protocol_schedule(Scenario.DIRECT, 0.05, sigma=100.0)

    def test_explicit_tau(self):
        schedule = make_protocol_schedule(Scenario.DIRECT, 0.05, TauChoice.explicit(5.0))
        assert schedule.tau == 5.0
        assert schedule.end_time == 5.0

    def test_explicit_tau_must_be_positive(self):
        with pytest.raises(ConfigurationError):
            TauChoice.explicit(0.0)

    def test_non_positive_g_rejected(self):
        with pytest.raises(PreconditionError):
            make_protocol_schedule(Scenario.DIRECT, -0.1)


class TestProfileSchedule:
    def test_function_profile_samples_callable(self):
        profile = FunctionProfile(lambda t: math.sin(t) ** 2, edges=(3.0, 1.0))
        schedule = ProfileSchedule(Scenario.DIRECT, profile)
        assert schedule.coupling_values(math.pi / 2.0) == (pytest.approx(1.0), 0.0)
        assert schedule.breakpoints() == (1.0, 3.0)

    def test_mediated_profile_needs_bm(self):
        with pytest.raises(ConfigurationError):
            ProfileSchedule(Scenario.COHERENT, FunctionProfile(lambda t: 1.0))

"""Pytest configuration and shared fixtures."""

import math

import pytest

from qbtransfer.models import Scenario, SystemSpec, TimeGrid

G = 0.05


@pytest.fixture
def app_config():
    """Small grids and serial sweeps."""
    from qbtransfer.config import TestingConfig

    return TestingConfig


@pytest.fixture
def direct_spec():
    return SystemSpec.resonant(Scenario.DIRECT, G)


@pytest.fixture
def two_step_spec():
    return SystemSpec.resonant(Scenario.TWO_STEP, G)


@pytest.fixture
def coherent_spec():
    return SystemSpec.resonant(Scenario.COHERENT, G)


@pytest.fixture
def direct_schedule():
    from qbtransfer.services.switching import make_protocol_schedule

    return make_protocol_schedule(Scenario.DIRECT, G)


@pytest.fixture
def two_step_schedule():
    """Legs separated by g*sigma = 2.5."""
    from qbtransfer.services.switching import make_protocol_schedule

    return make_protocol_schedule(Scenario.TWO_STEP, G, sigma=2.5 / G)


@pytest.fixture
def coherent_schedule():
    from qbtransfer.services.switching import make_protocol_schedule

    return make_protocol_schedule(Scenario.COHERENT, G)


@pytest.fixture
def grid_for():
    """Grid from 0 to a quarter period past the end of the protocol."""

    def build(schedule, n_samples=400, g=G):
        t_end = schedule.end_time + math.pi / (2.0 * g)
        return TimeGrid.build(0.0, t_end, n_samples, schedule.breakpoints())

    return build

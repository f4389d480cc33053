"""Tests for run configuration files and overrides."""

import math

import pytest

from qbtransfer.errors import ConfigurationError
from qbtransfer.models import Method, ModelVariant, Scenario
from qbtransfer.services.run_config import RunConfig, load_run_config, read_run_config_file
from qbtransfer.services.switching import TauMode


def _write(tmp_path, text):
    path = tmp_path / "run.env"
    path.write_text(text, encoding="utf-8")
    return path


class TestLoadRunConfig:
    """File, override and default resolution."""

    def test_reads_flat_file(self, tmp_path, app_config):
        path = _write(
            tmp_path,
            "# two-step run\nscenario=two_step\ng_over_omega_b=0.05\nsigma_g=2.5\nmethods=analytic, piecewise\n",
        )
        resolution = load_run_config(path, app_config=app_config)
        config = resolution.config
        assert config.scenario is Scenario.TWO_STEP
        assert config.sigma == pytest.approx(50.0)
        assert config.methods == (Method.ANALYTIC, Method.PIECEWISE)
        assert config.n_samples == app_config.DEFAULT_N_SAMPLES
        assert resolution.warnings == []

    def test_overrides_win_over_file(self, tmp_path, app_config):
        path = _write(tmp_path, "scenario=direct\ng_over_omega_b=0.05\n")
        overrides = {"g_over_omega_b": 0.02, "n_samples": None, "methods": "rk4"}
        config = load_run_config(path, overrides, app_config).config
        assert config.g == 0.02
        assert config.n_samples == app_config.DEFAULT_N_SAMPLES
        assert config.methods == (Method.RK4,)

    def test_short_aliases(self, app_config):
        overrides = {"scenario": "two-step", "g": "0.05", "sigma": "7.5", "variant": "full_rwa"}
        config = load_run_config(overrides=overrides, app_config=app_config).config
        assert config.scenario is Scenario.TWO_STEP
        assert config.sigma_g == 7.5
        assert config.model_variant is ModelVariant.FULL_RWA

    def test_missing_scenario(self, app_config):
        with pytest.raises(ConfigurationError, match="scenario is required"):
            load_run_config(overrides={"g": 0.05}, app_config=app_config)

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigurationError):
            read_run_config_file(tmp_path / "absent.env")

    def test_two_step_needs_sigma(self, app_config):
        with pytest.raises(ConfigurationError, match="sigma_g"):
            load_run_config(overrides={"scenario": "two_step", "g": 0.05}, app_config=app_config)

    def test_unknown_keys_warn(self, tmp_path, app_config):
        path = _write(tmp_path, "scenario=direct\ng=0.05\ncolour=blue\n")
        resolution = load_run_config(path, app_config=app_config)
        assert resolution.warnings == ["ignoring unknown run config keys: colour"]

    def test_strong_coupling_warns(self, app_config):
        resolution = load_run_config(overrides={"scenario": "direct", "g": 0.2}, app_config=app_config)
        assert any("rotating wave approximation" in warning for warning in resolution.warnings)

    @pytest.mark.parametrize("value", ["abc", "nan", "inf"])
    def test_invalid_number(self, app_config, value):
        with pytest.raises(ConfigurationError, match="g_over_omega_b"):
            load_run_config(overrides={"scenario": "direct", "g": value}, app_config=app_config)

    def test_unknown_method(self, app_config):
        with pytest.raises(ConfigurationError, match="methods"):
            load_run_config(overrides={"scenario": "direct", "g": 0.05, "methods": "euler"}, app_config=app_config)

    def test_tau_g_implies_explicit_mode(self, app_config):
        overrides = {"scenario": "direct", "g": 0.05, "tau_g": 1.0}
        config = load_run_config(overrides=overrides, app_config=app_config).config
        assert config.tau_mode is TauMode.EXPLICIT
        assert config.schedule().tau == pytest.approx(20.0)

    def test_tau_g_ignored_with_first_maximum(self, app_config):
        overrides = {"scenario": "direct", "g": 0.05, "tau_g": 1.0, "tau_mode": "first_maximum"}
        resolution = load_run_config(overrides=overrides, app_config=app_config)
        assert resolution.config.tau_g is None
        assert "tau_g is ignored with tau_mode=first_maximum" in resolution.warnings

    def test_zero_omega_c_is_kept(self, app_config):
        overrides = {"scenario": "direct", "g": 0.05, "omega_c": 0}
        config = load_run_config(overrides=overrides, app_config=app_config).config
        assert config.omega_c == 0.0
        with pytest.raises(ConfigurationError, match="level spacings"):
            config.spec()


class TestRunConfig:
    def test_default_window_adds_quarter_period(self):
        config = RunConfig(scenario=Scenario.DIRECT, g_over_omega_b=0.05)
        schedule = config.schedule()
        assert config.t_end(schedule) == pytest.approx(20.0 * math.pi)
        assert schedule.tau in config.grid(schedule).times.tolist()

    def test_explicit_window_end(self):
        config = RunConfig(scenario=Scenario.COHERENT, g_over_omega_b=0.05, t_end_g=4.0)
        assert config.t_end(config.schedule()) == pytest.approx(80.0)

    def test_mediated_spec_defaults_to_resonant_mediator(self):
        spec = RunConfig(scenario=Scenario.COHERENT, g_over_omega_b=0.05).spec()
        assert spec.omega_m == 1.0
        assert spec.is_resonant

    @pytest.mark.parametrize(
        "kwargs",
        [
            {"scenario": Scenario.DIRECT, "g_over_omega_b": 0.0},
            {"scenario": Scenario.DIRECT, "g_over_omega_b": 0.05, "methods": ()},
            {"scenario": Scenario.DIRECT, "g_over_omega_b": 0.05, "sigma_g": 2.5},
            {"scenario": Scenario.DIRECT, "g_over_omega_b": 0.05, "omega_m": 1.0},
            {"scenario": Scenario.DIRECT, "g_over_omega_b": 0.05, "tau_mode": TauMode.EXPLICIT},
            {"scenario": Scenario.DIRECT, "g_over_omega_b": 0.05, "n_samples": 1},
            {"scenario": Scenario.DIRECT, "g_over_omega_b": 0.05, "rk4_step": 0.0},
            {"scenario": Scenario.DIRECT, "g_over_omega_b": 0.05, "tolerance": -1.0},
        ],
    )
    def test_invalid_combinations(self, kwargs):
        with pytest.raises(ConfigurationError):
            RunConfig(**kwargs)

"""Application configuration."""

import os

from dotenv import load_dotenv

load_dotenv()


class Config:
    """Base configuration."""

    DEBUG = False
    TESTING = False

    LOG_LEVEL = os.environ.get("QBT_LOG_LEVEL", "INFO").upper()

    # Output
    OUTPUT_DIR = os.environ.get("QBT_OUTPUT_DIR", "output")

    # Time grid
    DEFAULT_N_SAMPLES = int(os.environ.get("QBT_DEFAULT_N_SAMPLES", "2000"))

    # Fixed-step integrator (units of 1/omega_B)
    RK4_STEP = float(os.environ.get("QBT_RK4_STEP", "1e-3"))

    # Trace comparison tolerances (max abs deviation, units of omega_B)
    COMPARE_TOLERANCE = float(os.environ.get("QBT_COMPARE_TOLERANCE", "1e-8"))
    PIECEWISE_TOLERANCE = float(os.environ.get("QBT_PIECEWISE_TOLERANCE", "1e-10"))
    RK4_TOLERANCE = float(os.environ.get("QBT_RK4_TOLERANCE", "1e-8"))

    # Soft validity bounds
    RWA_WARN_RATIO = float(os.environ.get("QBT_RWA_WARN_RATIO", "0.1"))
    SEPARATION_WARN_FACTOR = float(
        os.environ.get("QBT_SEPARATION_WARN_FACTOR", "5.0")
    )

    # Sweeps
    SWEEP_MAX_WORKERS = int(os.environ.get("QBT_SWEEP_MAX_WORKERS", "4"))
    SWEEP_N_SAMPLES = int(os.environ.get("QBT_SWEEP_N_SAMPLES", "2000"))
    SWEEP_CROSS_CHECK = (
        os.environ.get("QBT_SWEEP_CROSS_CHECK", "false").lower() == "true"
    )


class DevelopmentConfig(Config):
    """Development configuration."""

    DEBUG = True
    LOG_LEVEL = "DEBUG"


class ProductionConfig(Config):
    """Production configuration."""

    DEBUG = False


class TestingConfig(Config):
    """Testing configuration."""

    TESTING = True
    DEFAULT_N_SAMPLES = 400
    SWEEP_N_SAMPLES = 400
    # Serial sweeps keep test output ordering simple
    SWEEP_MAX_WORKERS = 1


_CONFIGS: dict[str, type[Config]] = {
    "development": DevelopmentConfig,
    "production": ProductionConfig,
    "testing": TestingConfig,
}


def get_config(name: str | None = None) -> type[Config]:
    """Return the config class for ``name`` (defaults to ``QBT_ENV``)."""
    key = (name or os.environ.get("QBT_ENV", "production")).strip().lower()
    return _CONFIGS.get(key, Config)

"""Settings and configuration for drift-lab.

Every field reads a ``DRIFT_LAB_*`` environment variable; ``main()`` loads a
``.env`` file first, so either source works.
"""

import logging
import os
from dataclasses import dataclass, field, fields
from typing import Tuple

_settings_logger = logging.getLogger(__name__)


def _safe_int(env_var: str, default: str) -> int:
    """Safely parse an integer from an environment variable.

    Args:
        env_var: Name of the environment variable.
        default: Default value as a string.

    Returns:
        Parsed integer value, or default if parsing fails.
    """
    value = os.getenv(env_var, default)
    try:
        return int(value)
    except ValueError:
        _settings_logger.warning("Invalid value '%s' for %s, using default %s", value, env_var, default)
        return int(default)


def _safe_float(env_var: str, default: str) -> float:
    """Float counterpart of :func:`_safe_int`."""
    value = os.getenv(env_var, default)
    try:
        return float(value)
    except ValueError:
        _settings_logger.warning("Invalid value '%s' for %s, using default %s", value, env_var, default)
        return float(default)


def _safe_pair(env_var: str, default: str) -> Tuple[float, float]:
    """Parse ``"lo,hi"`` into an ordered pair of floats."""
    value = os.getenv(env_var, default)
    try:
        lo, hi = (float(part) for part in value.split(","))
        if not lo < hi:
            raise ValueError
        return lo, hi
    except ValueError:
        _settings_logger.warning("Invalid range '%s' for %s, using default %s", value, env_var, default)
        lo, hi = (float(part) for part in default.split(","))
        return lo, hi


@dataclass
class Settings:
    """Configuration settings for drift-lab runs and sweeps."""

    # Logging and output
    log_level: str = field(default_factory=lambda: os.getenv("DRIFT_LAB_LOG_LEVEL", "INFO"))
    output_dir: str = field(default_factory=lambda: os.getenv("DRIFT_LAB_OUTPUT_DIR", "runs"))
    run_log_path: str = field(default_factory=lambda: os.getenv("DRIFT_LAB_RUN_LOG", "logs/drift-lab-runs.log"))
    metrics_enabled: bool = field(
        default_factory=lambda: os.getenv("DRIFT_LAB_METRICS_ENABLED", "true").lower() == "true"
    )
    # 0 keeps the Prometheus exporter off
    metrics_port: int = field(default_factory=lambda: _safe_int("DRIFT_LAB_METRICS_PORT", "0"))

    # Sweep execution
    jobs: int = field(default_factory=lambda: _safe_int("DRIFT_LAB_JOBS", "1"))
    seed: int = field(default_factory=lambda: _safe_int("DRIFT_LAB_SEED", "0"))

    # Grid defaults
    grid_n: int = field(default_factory=lambda: _safe_int("DRIFT_LAB_GRID_N", "4096"))
    domain_half_width: float = field(default_factory=lambda: _safe_float("DRIFT_LAB_DOMAIN_L", "30.0"))

    # Solver events
    blowup_factor: float = field(default_factory=lambda: _safe_float("DRIFT_LAB_BLOWUP_FACTOR", "1e3"))
    dt_floor: float = field(default_factory=lambda: _safe_float("DRIFT_LAB_DT_FLOOR", "1e-10"))
    cfl: float = field(default_factory=lambda: _safe_float("DRIFT_LAB_CFL", "0.9"))
    boundary_flux_tolerance: float = field(default_factory=lambda: _safe_float("DRIFT_LAB_BOUNDARY_FLUX_TOL", "0.01"))

    # Classification
    decay_window: Tuple[float, float] = field(default_factory=lambda: _safe_pair("DRIFT_LAB_DECAY_WINDOW", "1.0,100.0"))
    decay_band: Tuple[float, float] = field(default_factory=lambda: _safe_pair("DRIFT_LAB_DECAY_BAND", "-0.65,-0.35"))
    nondecay_band: Tuple[float, float] = field(
        default_factory=lambda: _safe_pair("DRIFT_LAB_NONDECAY_BAND", "-0.1,0.1")
    )
    # supercritical cells at or below this mass are not expected to blow up
    small_mass: float = field(default_factory=lambda: _safe_float("DRIFT_LAB_SMALL_MASS", "0.05"))


# Global settings instance
settings = Settings()


def reload_settings() -> Settings:
    """Re-read the environment into the shared ``settings`` instance, e.g. after loading ``.env``."""
    fresh = Settings()
    for item in fields(Settings):
        setattr(settings, item.name, getattr(fresh, item.name))
    return settings

"""Exception hierarchy for drift-lab."""

from typing import Any, Dict, Optional


class DriftLabError(Exception):
    """Base class for all drift-lab errors."""


class ConfigError(DriftLabError, ValueError):
    """Invalid configuration, exponent index or parameter window."""


class AdmissibilityError(ConfigError):
    """A drift family parameter window is violated.

    The message names the failed inequality.
    """


class NumericalError(DriftLabError):
    """Solver breakdown (NaN, failed linear solve).

    Carries a snapshot of the offending state so the run directory can keep it.
    """

    def __init__(self, message: str, snapshot: Optional[Dict[str, Any]] = None):
        super().__init__(message)
        self.snapshot = snapshot or {}


class ContractionError(NumericalError):
    """The Duhamel map did not contract on the requested window."""


class RescalingError(DriftLabError, ValueError):
    """Self-similar grid maps outside the physical domain."""


class ArtifactError(DriftLabError):
    """Missing or unreadable run artifact."""

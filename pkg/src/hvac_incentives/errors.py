"""Exception hierarchy shared by every module."""

from __future__ import annotations


class HvacIncentiveError(Exception):
    """Base class for errors raised by this package."""


class ModelError(HvacIncentiveError, ValueError):
    """Inconsistent model, configuration or disturbance dimensions/values."""


class SchemaError(ModelError):
    """A serialized document is missing fields or has the wrong schema_version."""


class SimulationDiverged(HvacIncentiveError):
    def __init__(self, step: int, message: str | None = None):
        self.step = step
        super().__init__(message or f"simulation diverged at step {step}: non-finite zone temperature")


class SamplingFailed(HvacIncentiveError):
    """More than half of the Monte Carlo simulations diverged."""


class EmptyDensity(HvacIncentiveError):
    """No sample falls inside the density grid."""


class ModelShapeError(HvacIncentiveError):
    """A static model lacks the structural features the analysis relies on."""


class DegenerateSurface(ModelShapeError):
    """The work surface cannot be rescaled because the density is constant."""


class DomainError(HvacIncentiveError, ValueError):
    """An operating point lies outside the feasible region."""


class CalibrationError(HvacIncentiveError, ValueError):
    """Calibration inputs make a formula undefined or violate its premises."""


class PreconditionError(HvacIncentiveError, ValueError):
    """The monotonicity hypothesis of the ordering check does not hold for the given objective."""

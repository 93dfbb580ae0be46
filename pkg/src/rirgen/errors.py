"""Exception types shared across the toolkit."""


class RirgenError(Exception):
    """Base class for all toolkit errors."""


class ValidationError(RirgenError, ValueError):
    """An input failed a range or consistency check; the message names the field."""


class InfeasibleT60Error(RirgenError, ValueError):
    """The requested reverberation time cannot be reached in the given room.

    Carries ``min_feasible_t60`` so callers can clamp or resample.
    """

    def __init__(self, message: str, min_feasible_t60: float):
        super().__init__(message)
        self.min_feasible_t60 = min_feasible_t60


class ConfigurationError(RirgenError, ValueError):
    """A configuration object is internally inconsistent."""


class DegenerateSignalError(RirgenError, ValueError):
    """A signal carries no energy where energy is required."""


class DecayRangeError(RirgenError, ValueError):
    """The energy decay curve does not span the range needed for a fit."""


class TrainingDivergedError(RirgenError, RuntimeError):
    """A loss component became non-finite during training."""

    def __init__(self, message: str, component: str):
        super().__init__(message)
        self.component = component


class CheckpointError(RirgenError, ValueError):
    """A checkpoint file is malformed or reports an incompatible version."""

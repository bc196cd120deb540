"""Exception types shared across the package."""


class DimensionError(ValueError):
    """Vector/matrix shapes do not match the session dimensions."""


class NotPositiveDefiniteError(ValueError):
    """A covariance that must be positive definite is not."""


class RolloutError(RuntimeError):
    """Environment rollout failed; carries the failing timestep."""

    def __init__(self, message, timestep=None, rollout_index=None):
        super().__init__(message)
        self.timestep = timestep
        self.rollout_index = rollout_index


class FitError(RuntimeError):
    """Regression failed; carries the timestep of the failing fit."""

    def __init__(self, message, timestep=None):
        super().__init__(message)
        self.timestep = timestep


class QuuNotPositiveDefinite(Exception):
    """Backward-pass signal: Q_uu lost positive definiteness at a timestep.

    Callers respond by raising the penalty multiplier, not by regularizing.
    """

    def __init__(self, timestep):
        super().__init__(f"Q_uu not positive definite at t={timestep}")
        self.timestep = timestep


class EtaLadderExhausted(RuntimeError):
    """No penalty multiplier up to the ladder cap restored definiteness."""


class ConfigError(ValueError):
    """Invalid configuration; message lists every problem found."""

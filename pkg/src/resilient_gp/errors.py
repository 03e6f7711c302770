"""Exception types raised across the package."""


class ConfigError(ValueError):
    """Invalid scenario or attack configuration."""


class StateError(RuntimeError):
    """Operation requested on an agent state that cannot serve it (e.g. empty)."""


class IntegrityError(RuntimeError):
    """A value that must have been filtered out reached an aggregation step."""


class NumericError(ArithmeticError):
    """Linear solve failed even after jitter."""


class VerificationError(AssertionError):
    """A deterministic bound was violated."""

    def __init__(self, message, round_index=None, point_index=None):
        super().__init__(message)
        self.round_index = round_index
        self.point_index = point_index

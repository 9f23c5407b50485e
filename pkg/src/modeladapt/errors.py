"""Exception types raised across the package."""


class ModelAdaptError(Exception):
    """Base class for all package errors."""


class InvalidMeshError(ModelAdaptError, ValueError):
    pass


class InvalidParameterError(ModelAdaptError, ValueError):
    pass


class InvalidConfigurationError(ModelAdaptError, ValueError):
    pass


class StateSpaceError(ModelAdaptError, ArithmeticError):
    """A state left the declared compact state set."""

    def __init__(self, message, values=None):
        super().__init__(message)
        self.values = values


class SingularOperatorError(ModelAdaptError, ArithmeticError):
    pass

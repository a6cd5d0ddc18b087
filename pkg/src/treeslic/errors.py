"""Exception hierarchy.

Each family carries the process exit code the CLI maps it to.
"""


class SlicError(Exception):
    exit_code = 1


class ConfigError(SlicError):
    exit_code = 2


class TreeError(ConfigError):
    """Invalid topology: cycle, disconnected bus, dangling reference."""


class UnknownBusError(TreeError, KeyError):
    def __init__(self, bus):
        super().__init__(f"bus not in tree: {bus!r}")
        self.bus = bus

    def __str__(self):
        return self.args[0]


class DataError(SlicError):
    exit_code = 3


class NumericalError(SlicError):
    exit_code = 4


class SingularLineError(NumericalError):
    pass


class NonGenericTlsError(NumericalError):
    pass


class DegenerateTlsError(NumericalError):
    def __init__(self, message, singular_values=None):
        super().__init__(message)
        self.singular_values = singular_values


class SqrtAmbiguityError(NumericalError):
    pass


class MissingFactorError(NumericalError):
    """A rho or ratio needed by a propagation chain is unavailable."""

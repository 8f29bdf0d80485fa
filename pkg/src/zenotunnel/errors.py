"""Exception hierarchy shared by all modules."""


class ZenoTunnelError(Exception):
    """Base class for errors raised by this package."""


class InvalidParameterError(ZenoTunnelError, ValueError):
    pass


class DimensionError(ZenoTunnelError, ValueError):
    """Ladder states or band solutions with incompatible basis sizes."""


class ScheduleError(ZenoTunnelError, ValueError):
    pass


class NumericalError(ZenoTunnelError, ArithmeticError):
    """Eigensolver failure, step underflow or loss of unitarity."""


class FitError(ZenoTunnelError, ValueError):
    pass


class ConfigError(ZenoTunnelError, ValueError):
    pass

"""Exception hierarchy shared by all modules."""


class InertiaToolError(Exception):
    """Base class for every error raised by this package."""


class NetworkValidationError(InertiaToolError, ValueError):
    pass


class PowerFlowError(InertiaToolError):
    def __init__(self, message, iterations=None, mismatch=None):
        super().__init__(message)
        self.iterations = iterations
        self.mismatch = mismatch


class ReductionError(InertiaToolError):
    def __init__(self, message, bus=None):
        super().__init__(message)
        self.bus = bus


class DimensionError(InertiaToolError, ValueError):
    pass


class SimulationDivergenceError(InertiaToolError):
    def __init__(self, message, time=None):
        super().__init__(message)
        self.time = time


class AlignmentError(InertiaToolError, ValueError):
    pass


class InsufficientDataError(InertiaToolError, ValueError):
    pass


class DegenerateSpectrumError(InertiaToolError):
    pass


class EmptySelectionError(InertiaToolError, ValueError):
    pass


class NoInformationError(InertiaToolError):
    pass


class ChannelError(InertiaToolError, ValueError):
    pass


class TimeSeriesFormatError(InertiaToolError, ValueError):
    pass


class ConfigError(InertiaToolError, ValueError):
    pass


class WindowError(InertiaToolError):
    """Wraps a failure of one window in a sweep, keeping the window length."""

    def __init__(self, window, cause):
        super().__init__(f"window {window:g} s: {cause}")
        self.window = window
        self.cause = cause

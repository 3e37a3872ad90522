"""Exception types raised across the package."""


class VidsalError(Exception):
    """Base class for all package errors."""


class NoFrames(VidsalError):
    pass


class DimensionMismatch(VidsalError):
    def __init__(self, index: int, expected=None, got=None):
        self.index = index
        msg = f"frame {index} has dimensions {got}, expected {expected}"
        super().__init__(msg)


class InvalidSaliency(VidsalError):
    pass


class InvalidK(VidsalError):
    pass


class EmptyRegion(VidsalError):
    pass


class BinMismatch(VidsalError):
    pass


class MapMismatch(VidsalError):
    pass


class ConfigError(VidsalError):
    pass

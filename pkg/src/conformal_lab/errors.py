"""Exception hierarchy shared by all modules."""


class ConformalLabError(Exception):
    """Base class for every error raised by the library."""


class BoundsError(ConformalLabError, ValueError):
    pass


class DomainError(ConformalLabError, ValueError):
    pass


class GeometryError(ConformalLabError):
    pass


class InadmissibleMapError(ConformalLabError):
    """A map with a non-positive Jacobian was passed where J > 0 (or J >= 0) is required."""

    def __init__(self, message, worst_triangle=None, worst_J=None):
        super().__init__(message)
        self.worst_triangle = worst_triangle
        self.worst_J = worst_J


class CoverageError(ConformalLabError):
    pass


class NotHomeomorphismError(ConformalLabError, ValueError):
    pass


class InitError(ConformalLabError):
    pass


class StallError(ConformalLabError):
    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class CompositionError(ConformalLabError):
    pass


class UnsupportedProfileError(ConformalLabError, ValueError):
    pass


class SingularArgumentError(ConformalLabError, ValueError):
    pass


class MeshMismatchError(ConformalLabError, ValueError):
    pass


class FormatError(ConformalLabError, ValueError):
    pass

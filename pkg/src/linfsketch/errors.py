"""Exception hierarchy shared by every module."""


class SketchError(Exception):
    """Base class for all library errors."""


class DimensionMismatch(SketchError, ValueError):
    pass


class TooLarge(SketchError, ValueError):
    pass


class NotPowerOfTwo(SketchError, ValueError):
    pass


class BadDimension(SketchError, ValueError):
    pass


class BadParameters(SketchError, ValueError):
    pass


class WrongKind(SketchError, ValueError):
    pass


class ZeroVector(SketchError, ValueError):
    pass


class NonFinite(SketchError, ValueError):
    pass


class NumericalError(SketchError, ArithmeticError):
    """Failures that come from the numbers rather than the call shape."""


class ZeroColumn(NumericalError):
    pass


class RankDeficient(NumericalError):
    pass


class NoConvergence(NumericalError):
    pass

"""Exception hierarchy shared across the toolkit."""


class HsadError(Exception):
    """Base class for all toolkit errors."""


class HeaderError(HsadError):
    pass


class MissingKey(HeaderError):
    def __init__(self, key):
        super().__init__(f"missing required header key: {key!r}")
        self.key = key


class InvalidValue(HeaderError):
    pass


class SizeMismatch(HsadError):
    def __init__(self, actual, expected):
        super().__init__(f"raw data has {actual} bytes, header implies {expected}")
        self.actual = actual
        self.expected = expected


class NonFiniteValue(HsadError):
    def __init__(self, position):
        super().__init__(f"non-finite value at (row, col, band) = {position}")
        self.position = position


class OutOfBounds(HsadError, IndexError):
    pass


class WaveletError(HsadError, ValueError):
    pass


class UnsupportedOrder(WaveletError):
    pass


class OddLength(WaveletError):
    pass


class TooShort(WaveletError):
    pass


class LengthMismatch(HsadError, ValueError):
    pass


class TargetTooLarge(WaveletError):
    pass


class EmptySampleSet(HsadError, ValueError):
    pass


class TooFewSamples(HsadError, ValueError):
    pass


class NotSymmetric(HsadError, ValueError):
    pass


class NumericalError(HsadError):
    """Numerical failure, optionally tied to a pixel location."""

    def __init__(self, message, pixel=None):
        if pixel is not None:
            message = f"{message} at pixel (row={pixel[0]}, col={pixel[1]})"
        super().__init__(message)
        self.pixel = pixel


class SingularAfterRidge(NumericalError):
    pass


class NoConvergence(NumericalError):
    pass


class ConfigMismatch(HsadError, ValueError):
    pass


class FractionOutOfRange(HsadError, ValueError):
    pass


class OutOfBoundsImplant(HsadError, ValueError):
    pass


class DimensionMismatch(HsadError, ValueError):
    pass


class DegenerateTruth(HsadError, ValueError):
    pass

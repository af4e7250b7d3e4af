"""Exception hierarchy.

Every error raised by the package derives from :class:`StPoolError`.  The three
intermediate classes carry the CLI exit code so command handlers can map any
failure without a lookup table.
"""


class StPoolError(Exception):
    exit_code = 1


class InputError(StPoolError, ValueError):
    """Malformed input data, files or arguments."""

    exit_code = 2


class NumericError(StPoolError, ArithmeticError):
    """A numerical procedure failed to converge or diverged."""

    exit_code = 3


class IoFailure(StPoolError, OSError):
    exit_code = 4


# edf ingestion
class TruncatedHeaderError(InputError):
    pass


class NonNumericFieldError(InputError):
    def __init__(self, field, offset, raw):
        self.field = field
        self.offset = offset
        self.raw = raw
        super().__init__(f"non-numeric value {raw!r} in field {field!r} at byte offset {offset}")


class InvalidHeaderError(InputError):
    pass


class TruncatedRecordsError(InputError):
    pass


class DegenerateCalibrationError(InputError):
    pass


class MalformedTalError(InputError):
    pass


class NegativeOnsetError(InputError):
    pass


class DuplicateLabelError(InputError):
    pass


class BadArityError(InputError):
    pass


class NonFiniteCoordinateError(InputError):
    pass


class InvalidMontageError(InputError):
    pass


class ChannelMismatchError(InputError):
    pass


class WindowOutOfBoundsError(InputError):
    pass


class UnknownRunTypeError(InputError):
    pass


# coordinate transforms
class AntipodalPointError(InputError):
    pass


class DegenerateRankBelow2Error(InputError):
    pass


class PerplexityOutOfRangeError(InputError):
    pass


class NonConvergedBandwidthError(NumericError):
    pass


class KOutOfRangeError(InputError):
    pass


# topomaps
class NotDivisibleError(InputError):
    pass


class DegenerateAxisError(InputError):
    pass


class PixelCollisionError(InputError):
    def __init__(self, first, second, pixel):
        self.pair = (first, second)
        self.pixel = pixel
        super().__init__(
            f"electrodes {first} and {second} both map to pixel {pixel}; raise the grid resolution"
        )


class ArityMismatchError(InputError):
    pass


class BadMagicError(InputError):
    pass


class VersionMismatchError(InputError):
    pass


# augmentation / model
class ShapeMismatchError(InputError):
    pass


class RectOutOfBoundsError(InputError):
    pass


class ConfigInvalidError(InputError):
    pass


class OddDimensionError(InputError):
    pass


class EmptyBatchError(InputError):
    pass


# harness
class TooFewSubjectsError(InputError):
    pass


class MissingCacheError(IoFailure):
    pass


class DivergedLossError(NumericError):
    pass


class EmptySetError(InputError):
    pass

"""Exception hierarchy shared by every module of the package."""


class ForgeryBenchError(Exception):
    """Base class for all errors raised by forgerybench."""


# image_io
class ImageNotFound(ForgeryBenchError, FileNotFoundError):
    pass


class UnsupportedFormat(ForgeryBenchError, ValueError):
    pass


class CorruptImage(ForgeryBenchError, ValueError):
    pass


class NotAJpeg(ForgeryBenchError, ValueError):
    pass


class UnsupportedJpeg(ForgeryBenchError, ValueError):
    pass


class CorruptStream(ForgeryBenchError, ValueError):
    pass


class IoError(ForgeryBenchError, OSError):
    pass


# datasets
class RootNotFound(ForgeryBenchError, FileNotFoundError):
    pass


class LayoutMismatch(ForgeryBenchError, ValueError):
    pass


class CountMismatch(ForgeryBenchError, ValueError):
    pass


class IndexOutOfRange(ForgeryBenchError, IndexError):
    pass


class DctRequestedForNonJpeg(ForgeryBenchError, ValueError):
    pass


class ShapeMismatch(ForgeryBenchError, ValueError):
    pass


# preprocessing
class MissingKey(ForgeryBenchError, KeyError):
    def __str__(self) -> str:
        # KeyError quotes its argument; keep messages readable
        return str(self.args[0]) if self.args else ""


class MissingInputKey(MissingKey):
    pass


class MissingOutputKey(MissingKey):
    pass


class WrongChannelCount(ForgeryBenchError, ValueError):
    pass


class ZeroStd(ForgeryBenchError, ValueError):
    pass


class UnknownTransform(ForgeryBenchError, ValueError):
    pass


# methods
class UnknownMethod(ForgeryBenchError, ValueError):
    pass


class InvalidConfig(ForgeryBenchError, ValueError):
    pass


class ImageTooSmall(ForgeryBenchError, ValueError):
    pass


# postprocessing
class NonFiniteInput(ForgeryBenchError, ValueError):
    pass


class DownscaleNotSupported(ForgeryBenchError, ValueError):
    pass


# metrics
class RangeError(ForgeryBenchError, ValueError):
    pass


class EmptyAccumulator(ForgeryBenchError, ValueError):
    pass


class SingleClass(ForgeryBenchError, ValueError):
    pass


class AllSkipped(ForgeryBenchError, ValueError):
    pass


class UnknownMetric(ForgeryBenchError, ValueError):
    pass


# benchmark
class CorruptOutput(ForgeryBenchError, ValueError):
    pass

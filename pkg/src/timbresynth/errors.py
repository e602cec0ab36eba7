"""Exception types shared across the package."""


class TimbreSynthError(Exception):
    """Base class for all package errors."""


class InvalidAudio(TimbreSynthError):
    pass


class ShapeError(TimbreSynthError):
    pass


class InvalidArgument(TimbreSynthError):
    pass


class PitchOutOfRange(TimbreSynthError):
    pass


class InvalidCorpus(TimbreSynthError):
    pass


class SplitError(TimbreSynthError):
    pass


class LabelError(TimbreSynthError):
    pass


class InvalidConditioning(TimbreSynthError):
    pass


class IncompatibleCheckpoint(TimbreSynthError):
    pass


class ChecksumError(TimbreSynthError):
    pass


class UnsupportedMode(TimbreSynthError):
    pass


class RefuseToScore(TimbreSynthError):
    pass

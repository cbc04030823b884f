"""Typed error hierarchy shared by every stage of the pipeline."""


class StallwatchError(Exception):
    """Base class for all pipeline errors."""


# --- file formats / parsing ---

class ParseError(StallwatchError):
    pass


class UnsupportedFormat(StallwatchError):
    pass


class MissingMetadata(StallwatchError):
    pass


class SequenceGap(StallwatchError):
    pass


class DimensionMismatch(StallwatchError):
    pass


class InvalidBBox(StallwatchError):
    pass


class InvalidInterval(StallwatchError):
    pass


# --- algorithm preconditions ---

class EmptyInput(StallwatchError):
    pass


class InsufficientData(StallwatchError):
    pass


class VideoTooShort(StallwatchError):
    pass


class InvalidParam(StallwatchError):
    pass


# --- detector bridge ---

class DetectorTimeout(StallwatchError):
    pass


class ProtocolError(StallwatchError):
    pass


class MissingDetections(StallwatchError):
    pass


# --- scoring ---

class DuplicateGroundTruth(StallwatchError):
    pass


class UndefinedScore(StallwatchError):
    pass


# --- synthesis / configuration ---

class InvalidSpec(StallwatchError):
    pass


class ConfigError(StallwatchError):
    pass

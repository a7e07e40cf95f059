"""Exception hierarchy shared by every acciturn module."""


class AcciturnError(Exception):
    """Base class for all library errors."""


class InputError(AcciturnError, ValueError):
    """Malformed or unusable input data (CLI exit code 2)."""


class DegenerateSixD(InputError):
    pass


class ZeroQuaternion(InputError):
    pass


class NonUnitQuaternion(InputError):
    pass


class Truncated(InputError):
    def __init__(self, offset, what="record"):
        self.offset = offset
        super().__init__(f"data truncated at byte offset {offset} while reading {what}")


class BadCount(InputError):
    pass


class BadLine(InputError):
    def __init__(self, line, reason):
        self.line = line
        super().__init__(f"line {line}: {reason}")


class UnknownCameraModel(InputError):
    def __init__(self, model_id):
        self.model_id = model_id
        super().__init__(f"unknown camera model id {model_id}")


class TooFewFrames(InputError):
    pass


class SingularMass(AcciturnError):
    pass


class OutOfRange(InputError):
    def __init__(self, angle, value):
        self.angle = angle
        super().__init__(f"{angle} = {value!r} is outside its declared range")


class LengthMismatch(InputError):
    pass


class EmptyInput(InputError):
    pass


class IndexOutOfRange(InputError):
    pass


class CrossVideoPair(InputError):
    pass


class BadConfig(InputError):
    pass


class NonFiniteLoss(AcciturnError):
    def __init__(self, step):
        self.step = step
        super().__init__(f"loss became non-finite at step {step}")


class PipelineFailure(AcciturnError):
    """A pipeline stage could not meet its contract (CLI exit code 1)."""

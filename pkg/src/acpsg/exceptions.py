"""Exception hierarchy shared by every stage of the pipeline."""


class ZslError(Exception):
    """Base class for all errors raised by this package."""


class ShapeError(ZslError, ValueError):
    pass


class FormatError(ZslError):
    """ZMAT stream does not start with the expected magic."""


class UnsupportedVersion(ZslError):
    pass


class CorruptFile(ZslError):
    """ZMAT payload length does not match its header."""


class InvalidValue(ZslError, ValueError):
    """A matrix entry is NaN/Inf, or a label is not an integral value."""


class ManifestError(ZslError):
    pass


class SplitError(ZslError, ValueError):
    pass


class LabelError(ZslError, ValueError):
    pass


class DegenerateSynthesis(ZslError):
    pass


class NegativeDegreeError(ZslError, ValueError):
    pass


class SingularDiffusion(ZslError):
    pass


class DivergenceError(ZslError, ArithmeticError):
    pass


class InsufficientData(ZslError, ValueError):
    pass


class EmptySearchSpace(ZslError, ValueError):
    pass


class RangeError(ZslError, ValueError):
    pass


class MissingSeenTestSplit(ZslError):
    pass

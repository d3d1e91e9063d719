"""Exception hierarchy shared across the package."""


class CSLabError(Exception):
    """Base class for all errors raised by cslab."""


class ConfigError(CSLabError):
    pass


class DimensionMismatch(CSLabError, ValueError):
    pass


class GroupTooLarge(CSLabError):
    pass


class SingularFrame(CSLabError):
    pass


class BasisMismatch(CSLabError, ValueError):
    pass


class DegreeOverflow(CSLabError):
    pass


class TailTooLarge(CSLabError):
    pass


class QuadratureDiverged(CSLabError):
    pass


class NotDifferentiable(CSLabError):
    pass


class StepUnstable(CSLabError):
    pass


class PairingDiverged(CSLabError):
    pass


class FileFormatError(CSLabError):
    pass


class CheckFailed(CSLabError):
    pass


class RangeWarning(UserWarning):
    """Evaluation point lies outside the range where truncated expansions are trustworthy."""

"""Exception hierarchy shared across the toolkit."""


class PhasekitError(Exception):
    """Base class for all toolkit errors."""


class ZeroVariance(PhasekitError):
    """A series is constant where variation is required."""


class UnknownSeverityLevel(PhasekitError):
    pass


class SchemaMismatch(PhasekitError):
    pass


class EmptyAfterFilter(PhasekitError):
    pass


class UnknownGroup(PhasekitError):
    pass


class InsufficientData(PhasekitError):
    pass


class NonPositiveLag(PhasekitError):
    pass


class ConstantIndex(PhasekitError):
    pass


class NoOverlap(PhasekitError):
    pass


class MissingExposure(PhasekitError):
    pass


class SingularDesign(PhasekitError):
    pass


class AllZeroResponse(PhasekitError):
    pass


class SeriesTooShort(PhasekitError):
    pass


class EmptySweep(PhasekitError):
    pass


class TooManyStates(PhasekitError):
    pass


class KExceedsPoints(PhasekitError):
    pass


class WindowTooShort(PhasekitError):
    pass


class Unclassifiable(PhasekitError):
    """Phase rules left a gap. Must be unreachable; kept for the totality proof."""


class InsufficientWindow(PhasekitError):
    pass


class ConstantInput(PhasekitError):
    pass


class ConfigError(PhasekitError):
    pass


class StageError(PhasekitError):
    """A pipeline stage failed; carries the stage name for diagnostics."""

    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"pipeline stage '{stage}' failed: {cause}")
        self.stage = stage
        self.cause = cause

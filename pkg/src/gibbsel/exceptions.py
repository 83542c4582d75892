class GibbselError(Exception):
    """Base class for errors raised by gibbsel."""


class CapacityError(GibbselError, ValueError):
    """Exact enumeration would exceed the configuration cap."""


class DegenerateInputError(GibbselError, ValueError):
    """Input has too little variation for the requested operation."""


class DegenerateScaleError(DegenerateInputError):
    """A coordinate is constant, so its scale is zero."""


class DegenerateTraitError(DegenerateInputError):
    """Fewer than two trait classes were observed."""


class UnsupportedChannelError(GibbselError, ValueError):
    """The noise channel is not supported by the requested operation."""


class StageError(GibbselError):
    """A pipeline stage failed; ``stage`` names it and ``__cause__`` holds the error."""

    def __init__(self, stage: str, cause: BaseException):
        self.stage = stage
        super().__init__(f"[{stage}] {type(cause).__name__}: {cause}")

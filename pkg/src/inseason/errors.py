"""Exception types shared across the pipeline stages."""


class InSeasonError(Exception):
    """Base class for all pipeline errors."""


class EmptyStream(InSeasonError):
    """A satellite stream has no observations where at least one is required."""

    def __init__(self, satellite: str, detail: str = ""):
        self.satellite = satellite
        msg = f"no observations for satellite {satellite!r}"
        if detail:
            msg += f" ({detail})"
        super().__init__(msg)


class EmptyField(InSeasonError):
    """A field-level composite was requested over zero point series."""


class AlignmentError(InSeasonError):
    """Series that must share timestamps or band layout do not."""


class StatsMismatch(InSeasonError):
    """Normalization stats do not cover every (satellite, band) of a series."""


class LengthOverflow(InSeasonError):
    """A series is longer than the padded length it must fit into."""


class EmptyTrace(InSeasonError):
    """An NDVI trace is empty (e.g. cloud masking removed every sample)."""


class UnknownCrop(InSeasonError):
    """A crop label is outside the supported vocabulary."""


class EmptyInterior(InSeasonError):
    """A field contains no grid point at the required inset from its boundary."""


class EmptySlice(InSeasonError):
    """A temporal slice of a series contains no observations."""


class ConfigError(InSeasonError):
    """A configuration value is missing, malformed, or out of domain."""


class EmptyInput(InSeasonError):
    """Model input contains zero valid tokens."""


class ZeroMaskLoss(InSeasonError):
    """A masked-reconstruction loss was requested with zero masked steps."""


class NonFiniteGradient(InSeasonError):
    """An optimizer step received a NaN or infinite gradient."""


class BucketError(InSeasonError):
    """A days-after-start value does not fall on the 30-day bucket grid."""


class DependencyError(InSeasonError):
    """A pipeline stage was invoked before the stages it depends on."""

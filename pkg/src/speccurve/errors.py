"""Exception types raised across the package.

Every error a caller is expected to handle derives from :class:`SpecCurveError`
so batch tools can catch one base class and keep going.
"""


class SpecCurveError(Exception):
    """Base class for all package errors."""


# numerics
class SingularSystem(SpecCurveError):
    """A normal-equation matrix was numerically singular."""


class RankDeficient(SingularSystem):
    """A stacked least-squares system has rank below the number of unknowns."""


class ZeroMatrix(SpecCurveError):
    """An angle was requested against a matrix of zero norm."""


class ZeroVector(ZeroMatrix):
    """An angle was requested against a zero vector."""


class ShapeMismatch(SpecCurveError, ValueError):
    """Operand shapes do not conform."""


# spectra
class FormatError(SpecCurveError, ValueError):
    """A data file has a bad header or row."""


class CoverageError(SpecCurveError, ValueError):
    """Tabulated data does not span the wavelength grid."""


class OutOfRange(SpecCurveError, ValueError):
    """A parameter lies outside its admissible interval."""


# colorsystem / estimator
class NoUsableRecords(SpecCurveError):
    """No color matrix with a supported calibration illuminant was found."""


class DivergedToZero(SpecCurveError):
    """The sensitivity iterate collapsed onto the zero matrix."""


# metrics / prior
class ZeroChannel(SpecCurveError, ValueError):
    """A reference channel has zero norm or zero maximum."""


class ZeroSum(SpecCurveError, ValueError):
    """Chromaticity of an RGB triple with non-positive sum."""


class EmptyDatabase(SpecCurveError):
    """Nothing left to train or validate on."""


class EmptyResults(SpecCurveError):
    """Summary requested for an empty result list."""


class NonConvergence(SpecCurveError):
    """An iterative solver stopped before meeting its tolerance.

    The best iterate found so far is kept on ``best``.
    """

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


# nn
class StaleCache(SpecCurveError, ValueError):
    """A backward pass was handed a cache that does not match its inputs."""


class CheckpointError(SpecCurveError):
    """Base class for checkpoint decoding failures."""


class BadMagic(CheckpointError):
    pass


class VersionMismatch(CheckpointError):
    pass


class Truncated(SpecCurveError):
    """A binary buffer ended (or pointed) past its end."""


# dng
class DngError(SpecCurveError):
    """Base class for DNG/TIFF parsing failures."""


class NotTiff(DngError):
    pass


class TruncatedTiff(DngError, Truncated):
    pass


class MissingColorMatrix(DngError):
    pass


class ZeroDenominator(DngError):
    pass


class MalformedTag(DngError):
    """A tag is present but has an unexpected type or count."""

"""Exception hierarchy shared across the package.

Everything raised deliberately by this package derives from FewscaleError,
so callers (and the CLI) can separate our validation failures (exit code 1)
from genuine I/O problems, which surface as plain OSError (exit code 2).
"""


class FewscaleError(Exception):
    """Base class for all errors raised by fewscale."""


class FormatError(FewscaleError):
    """Embedding file has a bad magic or an unsupported format version."""


class CorruptionError(FewscaleError):
    """Embedding file payload does not match its declared length."""


class ValidationError(FewscaleError):
    """A value violates a documented invariant."""


class ArgumentError(FewscaleError, ValueError):
    """An argument is outside its documented domain."""


class InsufficientClassesError(FewscaleError):
    """Operation needs more classes than the dataset provides."""


class EpisodeInfeasibleError(FewscaleError):
    """The dataset cannot support an episode of the requested shape."""


class DegenerateInputError(FewscaleError):
    """Input vector is degenerate for the requested metric (zero norm)."""


class DegenerateLawError(FewscaleError):
    """Power law cannot be converted (alpha is zero or conversion overflows)."""


class InsufficientDataError(FewscaleError):
    """Curve has too few points to fit."""


class ParseError(FewscaleError):
    """A text input (CSV, table cell) could not be parsed."""


class ComparisonUnavailableError(FewscaleError):
    """Convergence comparison requested on unconverged or mismatched fits."""


class PipelineCellError(FewscaleError):
    """A pipeline cell failed; message carries the (ratio, checkpoint, method)."""

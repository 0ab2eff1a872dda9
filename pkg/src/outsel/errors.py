"""Exception types shared across the package.

Everything raised on purpose derives from OutselError so callers (and the
command line tool) can distinguish bad input or a failed run from a bug.
"""

from __future__ import annotations


class OutselError(Exception):
    """Base class for all errors raised deliberately by this package."""


class ValidationError(OutselError):
    """A value passed to a constructor or function violates its contract."""


class DimensionError(ValidationError):
    """Arrays that must agree in shape do not."""


class SchemaError(OutselError):
    """A file being read does not match the expected layout."""


class ConstantColumnError(ValidationError):
    """An outcome column cannot be standardized because it has no spread."""


class SliceStepError(OutselError):
    """The slice sampler exhausted its step-out budget for some parameter."""


class NonFiniteStateError(OutselError):
    """A sampler update produced a non-finite parameter value."""


class TooFewDrawsError(OutselError):
    """Not enough retained draws to compute the requested diagnostic."""


class MissingCellError(OutselError):
    """A table layout needs replication cells that the results do not contain."""

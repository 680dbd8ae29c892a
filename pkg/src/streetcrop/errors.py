"""Shared exception bases.

Every error a pipeline stage can raise on bad data or violated
preconditions derives from :class:`DataValidationError`, so callers
(notably the CLI) can distinguish "your inputs are wrong" from genuine
bugs.
"""


class StreetCropError(Exception):
    """Base class for all package-specific errors."""


class DataValidationError(StreetCropError):
    """Invalid input data or a violated operation precondition."""


class UsageError(StreetCropError):
    """Malformed invocation: unknown command, bad flag, unparsable config."""

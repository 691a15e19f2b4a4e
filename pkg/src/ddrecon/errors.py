"""Typed errors shared across the package.

Every error carries a short machine-parsable code; the CLI prints
``error[CODE]: message`` on a single line and exits nonzero.
"""


class DdreconError(Exception):
    """Base class for all package errors."""

    code = "error"

    def __init__(self, message):
        super().__init__(message)
        self.message = message

    def oneline(self):
        return f"error[{self.code}]: {self.message}"


class ShapeMismatchError(DdreconError):
    code = "shape-mismatch"


class DomainTagError(DdreconError):
    """An operation received a complex image tagged with the wrong domain."""

    code = "domain-tag"


class NonScalarLossError(DdreconError):
    code = "non-scalar-loss"


class MissingGradientError(DdreconError):
    code = "missing-gradient"


class NonFiniteValueError(DdreconError):
    code = "non-finite"


class InfeasibleMaskError(DdreconError):
    """Mask parameters cannot satisfy both the center block and the budget."""

    code = "infeasible-mask"


class BadMagicError(DdreconError):
    code = "bad-magic"


class TruncatedFileError(DdreconError):
    code = "truncated-file"


class VersionMismatchError(DdreconError):
    code = "version-mismatch"


class ConfigError(DdreconError):
    code = "config"


class EmptySplitError(DdreconError):
    code = "empty-split"


class ZeroReferenceError(DdreconError):
    code = "zero-reference"


class MissingFileError(DdreconError):
    code = "missing-file"

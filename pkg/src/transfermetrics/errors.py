"""Error taxonomy shared by all modules.

Every documented failure mode raises one of these typed exceptions (or a
plain ValueError for bad call arguments); nothing in the toolkit should
surface a raw numpy error or crash.
"""


class ToolkitError(Exception):
    """Base class for all toolkit errors."""


class FormatError(ToolkitError):
    """File does not carry the expected magic/version/schema."""


class CorruptionError(FormatError):
    """File header and payload disagree (truncation, size mismatch)."""


class ValidationError(ToolkitError):
    """Well-formed input violates a documented invariant."""


class NumericalError(ToolkitError):
    """A computation produced a non-finite or non-factorizable intermediate."""

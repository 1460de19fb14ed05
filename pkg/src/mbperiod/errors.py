"""Exception types shared across the package."""


class ValidationError(ValueError):
    """Raised when user-supplied data or configuration is malformed."""


class EstimationError(RuntimeError):
    """Raised when a fit cannot produce a usable estimate (e.g. every
    candidate frequency is degenerate for the given data)."""

"""Exception types shared across the package."""


class DimensionMismatch(ValueError):
    """Two operands live over different ambient dimensions or orders."""


class CapExceeded(ValueError):
    """A chaos order or support size went past the configured guard."""


class ConsistencyError(RuntimeError):
    """An identity that must hold mathematically was violated numerically."""

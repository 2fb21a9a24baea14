"""Exception types shared across the package."""


class ValidationError(ValueError):
    """An input violates a documented invariant or precondition."""


class FormatError(ValueError):
    """A file does not conform to its binary or text format."""

"""Exception types shared across the package."""


class DataFormatError(ValueError):
    """An input file or matrix violates the expected format."""


class NumericError(RuntimeError):
    """A numerical routine failed to produce a trustworthy result."""

"""Exception types shared across the package."""


class NumericError(RuntimeError):
    """A numerical routine cannot make progress (step collapse, SVD failure)."""


class SchemaError(ValueError):
    """An input file does not match its declared schema."""

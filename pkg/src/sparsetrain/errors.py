"""Exception types shared across the package."""


class ShapeError(ValueError):
    """Operands have incompatible shapes."""


class StructureError(ValueError):
    """A tensor cannot carry (or a mask violates) a structured-sparsity pattern."""


class ConfigError(ValueError):
    """A run configuration is malformed (unknown key, bad value, bad combination)."""


class ZeroVarianceError(ValueError):
    """A correlation is undefined because one series has zero variance."""


class SequenceError(ValueError):
    """Snapshots were recorded out of order."""

class DimensionError(ValueError):
    """Operand shapes are incompatible."""


class ContractError(ValueError):
    """A precondition of an operation was violated."""


class NonFiniteError(FloatingPointError):
    """NaN or Inf appeared where finite values are required."""


class ConfigError(ValueError):
    pass


class DataError(ValueError):
    pass

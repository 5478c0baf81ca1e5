"""Exception types raised across the package."""


class KronInferError(Exception):
    """Base class for every error raised on purpose by kroninfer."""


class ShapeError(KronInferError, ValueError):
    """Operand dimensions do not conform."""


class SingularTensorError(KronInferError, ArithmeticError):
    """Flattening is singular or too badly conditioned to invert."""


class ParameterError(KronInferError, ValueError):
    """Model or solver parameters violate their invariants."""


class CapacityError(KronInferError, MemoryError):
    """A dense allocation would exceed the configured memory budget."""


class DivergenceError(KronInferError, ArithmeticError):
    """An iterative solver produced a non-finite iterate."""


class MalformedInputError(KronInferError, ValueError):
    """An input file or config could not be parsed."""

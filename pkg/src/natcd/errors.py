"""Exception types raised by the solver and its I/O layer."""


class NumericalError(FloatingPointError):
    """A quantity needed by the solver overflowed or became non-finite."""


class DivergenceError(NumericalError):
    """A coordinate root could not be bracketed.

    For the binomial family this usually means the data are separable along
    that coordinate and the unpenalised coefficient runs off to infinity.
    """


class DataError(ValueError):
    """Input data violates the tabular or family contract."""


class PathError(ValueError):
    """A regularisation path cannot be built for the given data."""


class GenerationError(RuntimeError):
    """Synthetic data could not satisfy its constraints."""

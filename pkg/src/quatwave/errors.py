"""Exception types shared across the package."""


class DomainError(ValueError):
    """An argument lies outside the domain of the operation."""


class ShapeError(ValueError):
    """Fields or arrays live on incompatible boxes or shapes."""


class UnsupportedSizeError(ValueError):
    """Sample counts the FFT layer does not handle (non powers of two)."""


class InadmissibleError(ValueError):
    """A mother wavelet fails the admissibility test."""


class StagnationError(RuntimeError):
    """An iterative solver stopped making progress."""


class VerdictError(RuntimeError):
    """A numerical verdict does not permit the requested operation."""


class DivergenceError(InadmissibleError):
    """A weighted spectral integral does not settle under grid refinement."""

"""Exception types shared across the package."""


class QhlabError(Exception):
    """Base class for all package errors."""


class ConfigurationError(QhlabError, ValueError):
    """Invalid grid, scenario, or parameter configuration."""


class InvalidStateError(QhlabError, ValueError):
    """A field or wavefunction violates a structural invariant."""


class DegenerateStateError(QhlabError):
    """Too much of the state sits under the node mask to proceed."""


class NumericalError(QhlabError):
    """A numerical guarantee (norm conservation, realness, ...) was violated."""

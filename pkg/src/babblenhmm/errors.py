"""Exception hierarchy for babblenhmm."""


class BabbleNhmmError(Exception):
    """Base class for all babblenhmm errors."""


class InputError(BabbleNhmmError, ValueError):
    """Bad user input: signals, shapes, files, manifests."""


class GigDomainError(InputError):
    """Argument outside the domain of the Bessel/GIG functions."""


class ModelFormatError(InputError):
    """A model file is malformed, violates an invariant, or does not match its partner model."""


class NumericalError(BabbleNhmmError, ArithmeticError):
    """A computation produced non-finite values or a solver failed."""

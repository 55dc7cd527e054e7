"""Exception hierarchy shared by the library and the command line."""


class PostedPriceError(Exception):
    """Base class for all library errors."""

    exit_code = 1


class InputError(PostedPriceError, ValueError):
    """Malformed or out-of-contract input."""

    exit_code = 1


class CapabilityError(PostedPriceError):
    """The request exceeds a documented size or family limit."""

    exit_code = 2


class NumericError(PostedPriceError):
    """A solver failed or a numerical certificate did not hold."""

    exit_code = 3

"""Exception hierarchy shared by all mmconc modules."""


class MMConcError(Exception):
    """Base class for every error raised by mmconc."""


class ValidationError(MMConcError, ValueError):
    """Bad input: malformed parameters, configs or objects."""


class CapExceededError(MMConcError):
    """A requested enumeration is larger than the configured cap."""


class InvariantError(MMConcError, AssertionError):
    """A mathematical invariant that must hold was found violated."""

"""Exception types shared across the package."""


class SpamRankError(Exception):
    """Base class for every error raised by this package."""


class InvalidAddressError(SpamRankError):
    """An address could not be normalized into an identity."""


class FormatError(SpamRankError):
    """A stream does not look like the declared wire format."""


class ConfigError(SpamRankError):
    """A parameter is outside its allowed range or inconsistent."""


class DomainError(SpamRankError):
    """A numeric input lies outside the function's domain."""


class UnknownUserError(SpamRankError):
    """An operation referenced a user id with no registered vector."""


class NotAMemberError(SpamRankError):
    """A membership operation referenced a user outside the cluster."""


class InternalStateError(SpamRankError):
    """An internal invariant was violated; state is corrupt."""


class NotComputableError(SpamRankError):
    """A metric is undefined on the given input."""

"""Exception types shared across the package."""


class ConfigError(Exception):
    """A configuration is inconsistent, incomplete, or refers to unknown options."""


class InvariantViolation(Exception):
    """A data invariant that should hold by construction was found broken."""

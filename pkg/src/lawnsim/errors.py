"""Exception types shared across the simulator."""


class ConfigError(ValueError):
    """Raised for malformed or inconsistent configuration documents."""


class ContractError(ValueError):
    """Raised when an engine is called outside its documented preconditions."""


class DomainError(ValueError):
    """Raised when a geometric or numeric input lies outside a function's domain."""

"""Exception types shared across the benchmark."""


class BenchError(Exception):
    """Base class for all benchmark errors."""


class DomainError(BenchError, ValueError):
    """An input lies outside the domain of an operation."""


class MalformedTraceError(BenchError, ValueError):
    """A frame trace violates its structural invariants."""


class MissingConfigError(BenchError, KeyError):
    """A dataset lacks records for a requested configuration."""


class ContractViolation(BenchError, RuntimeError):
    """A caller broke an operation's precondition."""


class ConfigError(BenchError, ValueError):
    """A run configuration cannot be resolved."""


class CheckpointError(BenchError, RuntimeError):
    """A checkpoint is missing, corrupted or does not fit the run."""

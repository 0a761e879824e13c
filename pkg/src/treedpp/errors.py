"""Exception hierarchy.

Every error carries the process exit code the CLI maps it to:
2 for configuration problems, 3 for numeric failures.
"""


class TreeDPPError(Exception):
    exit_code = 3


class ConfigError(TreeDPPError):
    exit_code = 2


class NumericError(TreeDPPError, ArithmeticError):
    """A numerical routine produced an unusable value."""


class DomainError(NumericError, ValueError):
    """Argument outside the mathematical domain of a kernel or measure."""


class KernelRangeError(NumericError):
    """Kernel evaluated outside its documented safe window."""


class PartitionError(NumericError):
    """A cell of a partition has zero reference mass."""


class QuadratureError(NumericError):
    def __init__(self, message, worst_pair=None, estimate=None):
        super().__init__(message)
        self.worst_pair = worst_pair
        self.estimate = estimate


class SpectrumError(NumericError):
    """Eigenvalues of a projected kernel left [-eps, 1 + eps]."""


class IndexSetError(ValueError, TreeDPPError):
    """Malformed, duplicated or out-of-range tree index."""

    exit_code = 3

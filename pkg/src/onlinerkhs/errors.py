"""Exception hierarchy.

Every error carries a short ``category`` string; the CLI prints it as the
first token of its one-line failure message.
"""


class OnlineRKHSError(Exception):
    category = "error"


class DomainError(OnlineRKHSError, ValueError):
    """A point lies outside the kernel domain."""

    category = "domain"


class ParameterError(OnlineRKHSError, ValueError):
    category = "parameter"


class ScheduleError(OnlineRKHSError, ValueError):
    """Gain/regularization values violate the admissible region."""

    category = "schedule"


class IncompatibleError(OnlineRKHSError, ValueError):
    """Two RKHS elements built on different kernels were combined."""

    category = "incompatible"


class UnsupportedStreamError(OnlineRKHSError, NotImplementedError):
    category = "unsupported"


class ContractError(OnlineRKHSError, RuntimeError):
    category = "contract"


class NumericalError(OnlineRKHSError, ArithmeticError):
    category = "numerical"


class ConfigError(OnlineRKHSError, ValueError):
    category = "config"

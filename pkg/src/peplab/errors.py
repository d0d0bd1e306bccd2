"""Exception types shared across the package.

The CLI maps these onto process exit codes: ConfigError -> 2,
BudgetExceededError -> 3, InvariantViolationError -> 4.
"""


class PepLabError(Exception):
    """Base class for all package errors."""


class RateSpecError(PepLabError, ValueError):
    """Invalid rate family (zero interior rates, length mismatch, ...)."""


class ConfigError(PepLabError, ValueError):
    """Experiment configuration rejected during validation.

    Carries the offending key path so diagnostics point at the exact field.
    """

    def __init__(self, path, message):
        self.path = path
        self.message = message
        super().__init__(f"{path}: {message}" if path else message)


class BudgetExceededError(PepLabError):
    """State-space or support enumeration larger than the configured budget."""


class NonGradientError(PepLabError):
    """Operation requested on a rate family that is not of gradient type."""


class FrozenStateError(PepLabError):
    """All jump rates vanished; the configuration can never move again."""


class InvariantViolationError(PepLabError):
    """A cross-checked invariant failed (e.g. the three gradient decision
    procedures disagree), which falsifies either the implementation or the
    theory it encodes."""

"""Exception types shared across the package."""


class HarnackLabError(Exception):
    """Base class for all package errors."""


class InvalidSpecError(HarnackLabError):
    """A family descriptor or config block is malformed or out of range."""


class NonMetricInputError(HarnackLabError):
    """A custom space file violates a metric axiom."""


class DisconnectedKernelError(HarnackLabError):
    """The jump graph induced by a kernel is not connected."""


class DegenerateBallError(HarnackLabError):
    """A ball used by a checker is degenerate (restricted energy vanishes
    on nonconstant functions, or a linear system is singular)."""


class InsufficientScalesError(HarnackLabError):
    """A regularity fit has fewer than three usable scales."""


class CapExceededError(HarnackLabError):
    """A configured runtime cap (size, jumps, iterations) was exceeded."""


class NonconvergentError(HarnackLabError):
    """Iterative time stepping failed to reach the requested tolerance."""

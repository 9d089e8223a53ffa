"""Exception hierarchy shared by all opfkit modules."""


class OpfkitError(Exception):
    """Base class for all errors raised by this package."""


class NetworkFormatError(OpfkitError):
    """Malformed network document (bad JSON, missing keys, unknown kinds)."""


class TopologyError(OpfkitError):
    """Network graph is not a tree rooted at the substation."""


class ValidationError(OpfkitError):
    """Network data violates a model invariant (bounds, impedances, costs)."""


class PowerFlowError(OpfkitError):
    """Power-flow sweep failed to converge to the near-nominal solution."""


class SolverError(OpfkitError):
    """Conic solver failed (numerical breakdown, unsupported problem)."""


class InfeasibleError(SolverError):
    """Relaxation is infeasible; carries the solver's dual certificate."""

    def __init__(self, message, certificate=None):
        super().__init__(message)
        self.certificate = certificate


class RecoveryError(OpfkitError):
    """Voltage recovery was attempted on a point that is not exact."""


class ImprovementError(OpfkitError):
    """Improvement construction called with an invalid line or step."""

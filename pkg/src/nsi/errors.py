"""Exception hierarchy shared by the library and the command line."""


class NSIError(Exception):
    """Base class for all errors raised by this package."""

    exit_code = 1


class InputError(NSIError, ValueError):
    """Malformed or infeasible user input."""

    exit_code = 2


class CapabilityError(InputError):
    """The request is well formed but exceeds what an operation supports."""


class EstimationInfeasible(NSIError):
    """The estimand cannot be computed from the data at hand."""

    exit_code = 3


class EmptyDonorSet(EstimationInfeasible):
    pass


class DegenerateRank(EstimationInfeasible):
    pass

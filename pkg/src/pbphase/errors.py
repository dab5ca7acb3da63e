"""Exception types shared by the solvers and the command line front end."""


class PBError(Exception):
    """Base class for all package errors."""


class DomainError(PBError, ValueError):
    """An argument lies outside the domain where the quantity is defined."""


class UsageError(PBError, ValueError):
    """A call combines arguments that are individually valid but not together."""


class RegimeError(PBError):
    """The requested quantity does not exist for this phase-portrait class."""


class NoSolutionError(PBError):
    """A boundary-value problem has no solution.

    ``constraint`` is a human readable statement of the violated condition and
    ``boundary_values`` carries whatever values the search saw at the edges of
    its domain.
    """

    def __init__(self, message, constraint=None, boundary_values=None):
        super().__init__(message)
        self.constraint = constraint
        self.boundary_values = boundary_values


class DivergenceError(PBError):
    """The integral diverges (log singularity at an equilibrium).

    ``lower_bound`` is a finite value the true integral is known to exceed.
    """

    def __init__(self, message, lower_bound=0.0):
        super().__init__(message)
        self.lower_bound = lower_bound


class NumericalError(PBError):
    """A numerical procedure failed to reach its tolerance."""

"""Exception types shared across the package.

Each class carries the process exit status the CLI maps it to.
"""


class MangledWorldsError(Exception):
    exit_code = 3


class UsageError(MangledWorldsError, ValueError):
    """Invalid parameters or configuration."""

    exit_code = 2


class DegenerateDistributionError(UsageError):
    """A spread of zero was requested (e.g. a symmetric binary split)."""


class NumericalError(MangledWorldsError):
    exit_code = 3


class QuadratureError(NumericalError):
    """Adaptive quadrature did not reach the requested resolution."""


class StabilityError(NumericalError, ValueError):
    """Integrator step is too large for the Hamiltonian's norm."""


class NoCrossingError(NumericalError):
    """Two frequency lines do not cross inside the physical range."""


class OnsetIndeterminateError(NumericalError):
    """The horizon ran out while coherence was still closing on the threshold."""


class EmptyResultError(MangledWorldsError):
    """Every world is mangled, so no share can be formed."""

    exit_code = 4


class IndeterminateRatioError(NumericalError):
    """An own-block drive vanished so an influence ratio is undefined."""

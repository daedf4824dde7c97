"""Exception hierarchy shared by the numerical modules and the CLI."""

from typing import Optional


class RadonBLError(Exception):
    """Base class for all radonbl errors."""


class ShapeError(RadonBLError, ValueError):
    """Matrix shape, squareness or finiteness violated."""


class NotSymmetricError(RadonBLError, ValueError):
    """Input expected to be symmetric is not."""


class NotPositiveDefiniteError(RadonBLError, ValueError):
    """Input expected to be positive-definite is not."""

    def __init__(self, message: str, smallest_eigenvalue: Optional[float] = None):
        super().__init__(message)
        self.smallest_eigenvalue = smallest_eigenvalue


class ScalingConditionError(RadonBLError, ValueError):
    """Exponents and dimensions violate sum p_j n_j = n."""


class DeterminantConstraintError(RadonBLError, ValueError):
    """A matrix required to have unit determinant does not."""


class PlacementError(RadonBLError, ValueError):
    """Block layout of an invariant polynomial is invalid."""


class BudgetExceededError(RadonBLError, ValueError):
    """Exact enumeration requested beyond its supported size."""


class EmptySpaceError(RadonBLError, ValueError):
    """Sample space or interval set carries no mass."""


class ManifestError(RadonBLError, ValueError):
    """Manifest or command-line parameters are unusable."""


class SchemaMismatchError(RadonBLError, ValueError):
    """Two artifacts cannot be compared column by column."""


class NumericalFailure(RadonBLError):
    """A computation ran but its numerical guarantees did not hold."""


class PreconditionError(NumericalFailure):
    """A quantitative hypothesis fails at the starting point."""


class ContractionBoundError(NumericalFailure):
    """Sampled contraction or transverse constant exceeds the declared bound."""


class DecayViolationError(NumericalFailure):
    """Newton residuals failed to decay at the declared rate."""

    def __init__(self, message: str, residuals: Optional[list[float]] = None):
        super().__init__(message)
        self.residuals = residuals or []


class NewtonNodeFailure(NumericalFailure):
    """A grid node of the fiber construction failed its Newton solve."""

    def __init__(self, message: str, node: Optional[tuple] = None):
        super().__init__(message)
        self.node = node


class BoundViolationError(NumericalFailure):
    """A computed quantity fell below its guaranteed lower bound."""

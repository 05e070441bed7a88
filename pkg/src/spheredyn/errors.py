"""Exception hierarchy shared by all spheredyn modules."""


class SpheredynError(Exception):
    """Base class for all errors raised by this package."""


class NonSymmetricError(SpheredynError):
    """A matrix required to be symmetric is not, beyond tolerance."""


class NonConvergentError(SpheredynError):
    """An iterative solver exhausted its iteration budget."""


class SingularError(SpheredynError):
    """A matrix required to be invertible is numerically singular."""


class NearZeroError(SpheredynError):
    """Retraction of a vector with vanishing norm was requested."""


class InPerpError(SpheredynError):
    """A point lies numerically in the orthogonal complement of the subspace.

    Carries ``token_index`` when raised for a specific ensemble member.
    """

    def __init__(self, message, token_index=None):
        super().__init__(message)
        self.token_index = token_index


class InSubspaceError(SpheredynError):
    """Gradient requested at a point inside the subspace where it degenerates."""


class SizeMismatchError(SpheredynError):
    """Two empirical measures with different token counts were compared."""


class GridMismatchError(SpheredynError):
    """Trial series do not share a common time grid."""


class UnknownPresetError(SpheredynError):
    """The requested experiment preset name is not registered."""


class ConfigParseError(SpheredynError):
    """The experiment config file could not be parsed."""


class ConfigValidationError(SpheredynError):
    """The experiment config parsed but violates invariants.

    ``violations`` lists every violated invariant, not just the first.
    """

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


class AssumptionViolationError(SpheredynError):
    """A run requested metrics whose standing assumptions do not hold."""

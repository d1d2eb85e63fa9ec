"""Exception types raised across the package."""


class MPODistillError(Exception):
    """Base class for all package-specific failures."""


class DimensionMismatchError(MPODistillError, ValueError):
    """Operands with incompatible dimensions."""


class NumericalInconsistencyError(MPODistillError):
    """A quantity violated a numerical sanity bound (e.g. complex residue)."""


class GaugeFailureError(MPODistillError):
    """Base class for failures that make a canonical gauge impossible."""


class DegenerateSpectrumError(GaugeFailureError):
    """Leading eigenvalue not separated from the rest of the spectrum."""


class SingularPerronError(GaugeFailureError):
    """Perron eigenvector not positive definite; gauge change undefined."""


class SingularFundamentalError(MPODistillError):
    """The fundamental-channel resolvent is numerically singular."""


class DegenerateStateError(MPODistillError):
    """Chain normalisation vanished; probabilities undefined."""


class ConstructionError(MPODistillError):
    """An internally derived object failed its consistency checks."""

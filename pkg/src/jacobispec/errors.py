"""Exception types shared across the package."""


class JacobiSpecError(Exception):
    """Base class for all package-specific failures."""


class RootFindingFailed(JacobiSpecError):
    """Simultaneous root iteration did not converge; input may be ill-conditioned."""


class InvalidNodes(JacobiSpecError):
    """Interpolation nodes are not pairwise distinct."""


class InconsistentSamples(JacobiSpecError):
    """Samples do not fit a monic polynomial of the requested degree."""


class DegenerateCurve(JacobiSpecError):
    """Operation requires a one-dimensional boundary curve, got the point case."""


class InsufficientSampling(JacobiSpecError):
    """A discrete geometric estimate needs a denser sample set to be trusted."""


class OnBoundaryAmbiguous(JacobiSpecError):
    """A point lies too close to a polyline to decide inside/outside."""


class TraceAmbiguous(JacobiSpecError):
    """Root continuation could not be disambiguated on some angle interval."""


class StructureMismatch(JacobiSpecError):
    """Traced connectivity disagrees with the closed-form counts."""

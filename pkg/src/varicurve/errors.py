"""Exception types shared across the library."""


class VaricurveError(Exception):
    """Base class for all library-specific failures."""


class DegenerateBasis(VaricurveError):
    """Spanning vectors are numerically rank deficient."""


class DimensionMismatch(VaricurveError):
    """Operands live in different ambient dimensions."""


class NotNKPEligible(VaricurveError):
    """Profile is not monotone nonincreasing or lacks the needed derivatives."""


class QuadratureFailure(VaricurveError):
    """Adaptive quadrature did not reach the requested tolerance."""


class EmptyCloud(VaricurveError):
    """An operation that needs at least one point received none."""


class BadShape(VaricurveError):
    """Shape parameters are invalid or unsupported for the request."""


class JunctionPoint(VaricurveError):
    """Exact curvature requested at a junction of a composite shape."""


class TooLarge(VaricurveError):
    """Problem size exceeds the desk-scale cap; subsample the inputs."""


class StepTooCoarse(VaricurveError):
    """Integration grid step must be finer than the kernel radius."""


class BoundaryVertex(VaricurveError):
    """Vertex star is not closed; the operation needs an interior vertex."""


class DegenerateFace(VaricurveError):
    """A face in the vertex star is too close to degenerate."""


class DegenerateStar(VaricurveError):
    """Vertex star has vanishing total area."""


class NoValidPoints(VaricurveError):
    """Every entry of a curvature field is flagged invalid."""


class BadData(VaricurveError):
    """Data fails the preconditions of a fit or summary."""


class ParseError(VaricurveError):
    """Malformed input file; carries the 1-based line number when known."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line

"""Exception and warning types shared across the package."""


class ViscoflowError(Exception):
    """Base class for all viscoflow errors."""


class ProjectionIllPosed(ViscoflowError):
    """Point lies at a focal locus of the projection (e.g. sphere center)."""


class PointOffManifold(ViscoflowError):
    """A point fails the on-manifold tolerance check."""


class BadRadii(ViscoflowError):
    """Cutoff radii must satisfy 0 < inner < outer."""


class DegenerateFace(ViscoflowError):
    """A triangle's induced-metric determinant is below the degeneracy floor.

    Carries ``face`` (index) and optionally ``state`` (the offending
    immersion) when raised mid-flow.
    """

    def __init__(self, face, state=None):
        self.face = face
        self.state = state
        super().__init__(f"degenerate face {face}")


class StencilRankDeficient(ViscoflowError):
    """The extended fitting stencil cannot determine a quadratic."""

    def __init__(self, vertex):
        self.vertex = vertex
        super().__init__(f"rank-deficient fitting stencil at vertex {vertex}")


class WrongTopology(ViscoflowError):
    """Mesh topology does not match what the operation requires."""


class NoBoundary(ViscoflowError):
    """Operation requires a mesh with boundary."""


class FieldNotTangent(ViscoflowError):
    """A test vector field fails the tangency-to-N check."""


class EmptyDictionary(ViscoflowError):
    """Criticality surrogate needs at least one test field."""


class NonCompactFamily(ViscoflowError):
    """A sweepout slice degenerated during deformation.

    Carries ``slice_index``.
    """

    def __init__(self, slice_index, message=""):
        self.slice_index = slice_index
        super().__init__(message or f"sweepout slice {slice_index} degenerated")


class MeshInvalid(ViscoflowError):
    """Mesh fails a structural invariant (manifoldness, orientation, Euler)."""


class ConfigInvalid(ViscoflowError):
    """Scenario config failed validation; ``problems`` lists the offending fields."""

    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("invalid config: " + "; ".join(self.problems))


class NumericalFailure(ViscoflowError):
    """A run aborted numerically; ``checkpoint`` points at the last good state."""

    def __init__(self, message, checkpoint=None):
        self.checkpoint = checkpoint
        super().__init__(message)


class UnsupportedFormat(ViscoflowError):
    """Mesh file format not recognized."""


class MeshParseError(ViscoflowError):
    """Mesh file is malformed; message names the line."""


class LineSearchStall(UserWarning):
    """Backtracking found no decrease at the minimum step size (reported, not fatal)."""


class NonMonotoneBeta(UserWarning):
    """Sampled min-max values decrease in sigma beyond tolerance."""

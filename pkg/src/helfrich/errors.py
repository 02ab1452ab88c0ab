"""Exception hierarchy shared by all modules."""


class HelfrichError(Exception):
    """Base class for every error raised by this package."""


class MeshError(HelfrichError):
    """Invalid mesh topology or geometry."""


class ParseError(MeshError):
    pass


class NonManifoldError(MeshError):
    """An edge with other than two incident faces, or inconsistent winding."""


class OpenBoundaryError(MeshError):
    """A directed edge without a reversed twin."""


class DegenerateTriangleError(MeshError):
    pass


class DisconnectedError(MeshError):
    pass


class PointOnSurfaceError(HelfrichError):
    """Winding number requested for a point lying on the surface."""


class DegenerateConstraintsError(HelfrichError):
    """Area and volume variations are (numerically) linearly dependent."""


class OutOfRadiusError(HelfrichError):
    """Targets lie outside the ball on which the correction is guaranteed."""


class NoConvergenceError(HelfrichError):
    pass


class NotAGraphError(HelfrichError):
    """The surface folds over the chosen plane inside the cylinder."""


class MultiSheetError(HelfrichError):
    """More than one sheet of the surface crosses the cylinder."""


class StitchFailureError(HelfrichError):
    pass


class SolverFailureError(HelfrichError):
    pass


class LineSearchStalledError(HelfrichError):
    pass

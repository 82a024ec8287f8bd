"""Exception hierarchy.

Every error the library raises intentionally derives from :class:`IPatchError`
and exposes a stable ``category`` string (its class name).  The CLI maps these
onto machine-readable error reports and nonzero exit codes.
"""

from __future__ import annotations


class IPatchError(Exception):
    """Base class for all errors raised by this package."""

    @property
    def category(self) -> str:
        return type(self).__name__


# --- implicit field construction / evaluation -------------------------------

class DegenerateNormal(IPatchError):
    """A plane normal is (numerically) zero, or two corner normals cancel."""


class DegenerateDenominator(IPatchError):
    """Normalized field evaluated where its denominator vanishes."""


class UnsupportedOffset(IPatchError):
    """Offsetting requested for a surface without an exact offset form."""


class SingularGradient(IPatchError):
    """Curvature or projection requested where the gradient vanishes."""


class CoincidentBoundings(IPatchError):
    """Two bounding surfaces of a patch coincide."""


# --- mesh engine -------------------------------------------------------------

class ParseError(IPatchError):
    """Malformed or truncated mesh file."""


class IoError(IPatchError):
    """File system level failure while reading or writing."""


class EmptyMesh(IPatchError):
    """Mesh with no vertices or no triangles."""


class IsolatedVertex(IPatchError):
    """A vertex without any incident triangle."""


class NoIntersection(IPatchError):
    """A surface does not cross the mesh anywhere."""


class AmbiguousChain(IPatchError):
    """Several traced intersection chains fit the requested endpoints."""


class EmptySelection(IPatchError):
    """Point filtering removed every vertex (mis-oriented bounding?)."""


class NotOnBoundary(IPatchError):
    """A point expected on the open mesh boundary is not."""


class ClosedMesh(IPatchError):
    """Boundary polyline requested on a mesh without boundary."""


class DegenerateSpan(IPatchError):
    """The two endpoints of a requested span coincide."""


# --- curve network -----------------------------------------------------------

class SchemaError(IPatchError):
    """Network (or patchwork) document violates the expected schema."""


class OpenLoop(IPatchError):
    """A face loop does not close."""


class NonManifoldEdge(IPatchError):
    """An edge referenced by more than two faces."""


class AlreadySplit(IPatchError):
    """Attempt to split an edge that already has children."""


class CenterOffMesh(IPatchError):
    """Proposed face-split center does not lie on the mesh."""


class InconsistentLoop(IPatchError):
    """Sub-face construction produced a loop that does not close."""


# --- ribbon construction -----------------------------------------------------

class CollinearThrough(IPatchError):
    """Prescribed bounding-plane point is collinear with the chord."""


class DegenerateTangent(IPatchError):
    """Boundary tangent parallel to the vertex normal."""


class InfeasibleLiming(IPatchError):
    """No fullness value yields an acceptable Liming fit."""


class FitDiverged(IPatchError):
    """Ribbon weight optimization produced a non-finite objective."""


# --- patch fitting -----------------------------------------------------------

class CenterOnBounding(IPatchError):
    """Face center lies on one of the bounding surfaces."""


class NonFiniteObjective(IPatchError):
    """Objective not finite at the optimization start point."""


class AllCandidatesInfeasible(IPatchError):
    """Even the default weights violate the contribution-ratio constraint."""


# --- refinement / tessellation ------------------------------------------------

class RefinementStalled(IPatchError):
    """A planned split did not change the network."""


class EmptyIsosurface(IPatchError):
    """Marching cubes found no zero crossing inside the grid."""


class PolishFailed(IPatchError):
    """Vertex polish did not converge (reported, never raised mid-pipeline)."""

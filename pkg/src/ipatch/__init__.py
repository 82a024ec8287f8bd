"""Approximate triangle meshes with networks of smoothly joined implicit patches.

The package fits an n-sided implicit patch to every face of a user-supplied
curve network drawn on a mesh, optimizes the patch weights, measures the
approximation error, and adaptively refines the network until a tolerance is
met.  Patchworks can be tessellated back into meshes, colored by deviation,
and offset exactly.
"""

from .errors import IPatchError
from .implicit import (
    ILoft,
    IPatch,
    ImplicitSurface,
    LimingSurface,
    Plane,
    eval_faithful,
    eval_field,
    gradient,
    mean_curvature,
    offset_patch,
)
from .mesh import (
    Polyline,
    TriMesh,
    boundary_polyline,
    closest_point,
    closest_points,
    estimate_vertex_normals,
    filter_points,
    load_mesh,
    trace_intersection,
)

__version__ = "0.1.0"

__all__ = [
    "IPatchError",
    "ImplicitSurface",
    "Plane",
    "LimingSurface",
    "ILoft",
    "IPatch",
    "eval_field",
    "gradient",
    "eval_faithful",
    "offset_patch",
    "mean_curvature",
    "TriMesh",
    "Polyline",
    "load_mesh",
    "estimate_vertex_normals",
    "closest_point",
    "closest_points",
    "trace_intersection",
    "filter_points",
    "boundary_polyline",
    "__version__",
]

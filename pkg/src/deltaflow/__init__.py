"""Direction-preserving dynamical energy analysis on polygonal and faceted-shell meshes.

Boundary densities live on a Dirac-delta basis in direction shared by all
cells and are tested against indicator intervals, so transport between cells
keeps every ray on a global direction.
"""

from .directions import GlobalDirectionSet, make_global_directions
from .geometry import MultiDomain, build_multidomain, build_polygon_domain, multidomain_from_mesh
from .interior import InteriorField, direct_field, evaluate_interior
from .solve import solve_stationary
from .sources import AcousticPointSource, LineSource, ShellPointSource, project_source
from .transfer import Discretization, UniformRule, assemble, discretize

__all__ = [
    "AcousticPointSource",
    "Discretization",
    "GlobalDirectionSet",
    "InteriorField",
    "LineSource",
    "MultiDomain",
    "ShellPointSource",
    "UniformRule",
    "assemble",
    "build_multidomain",
    "build_polygon_domain",
    "direct_field",
    "discretize",
    "evaluate_interior",
    "make_global_directions",
    "multidomain_from_mesh",
    "project_source",
    "solve_stationary",
]

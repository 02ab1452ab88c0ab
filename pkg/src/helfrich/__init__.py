"""Discrete Helfrich and Willmore energies on closed triangle meshes.

Modules
-------
mesh         triangle meshes, constraints and OFF/OBJ I/O
curvature    cotangent mean curvature, angle-defect Gauss curvature, energies
varifold     oriented sample clouds, winding-number currents, first variations
correction   two-bump area/volume correction with a guaranteed Newton radius
biharmonic   biharmonic replacement of graphical patches
minimize     constrained Sobolev gradient descent on the Helfrich energy
diagnostics  density ratios, tilt and height excess, good-point maps
cli          the ``helfrich`` batch command
"""

__version__ = "0.1.0"

from .errors import *  # noqa: F401,F403
from .mesh import Constraints, TriMesh, area, enclosed_volume, genus, load_mesh, save_mesh
from .curvature import compute_curvature, helfrich_energy, willmore_energy

__all__ = [
    "Constraints", "TriMesh", "area", "enclosed_volume", "genus", "load_mesh", "save_mesh",
    "compute_curvature", "helfrich_energy", "willmore_energy", "__version__",
]

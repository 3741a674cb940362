"""Dynamic brittle fracture in finite strain with a fourth-order phase field.

Plane-strain solver coupling a Newton/Newmark momentum balance on Q4
elements with a fourth-order phase-field equation solved by one of three
interchangeable spatial schemes: continuous/discontinuous Galerkin on Q9,
or mixed two-field FEM on Q9Q9 / Q4Q4.
"""

from .constitutive import MaterialParams
from .driver import (CoupledProblem, SchemeConfig, Simulation,
                     SimulationState, TimeControls)
from .mesh import Mesh, build_edge_topology, generate_notched_square, promote_q4_to_q9
from .pf_cdg import CdgScheme, PFCoefficients
from .pf_mixed import MixedScheme

__version__ = "0.1.0"

__all__ = [
    "MaterialParams", "Mesh", "PFCoefficients", "CdgScheme", "MixedScheme",
    "CoupledProblem", "SchemeConfig", "Simulation", "SimulationState",
    "TimeControls", "build_edge_topology", "generate_notched_square",
    "promote_q4_to_q9", "__version__",
]

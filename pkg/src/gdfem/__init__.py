"""Finite element discretizations of the grad-div / streamline-derivative
model problem  -grad(rho c_s^2 div u) + d_b(rho d_b u) - |b|_inf^2 rho u = f
with u.n = 0 on curved 2D domains.

Four discretizations of the same weak problem are provided:

* M1 -- H1-conforming vector Lagrange elements, normal trace imposed weakly.
* M2 -- H1-conforming velocity with an auxiliary continuous pseudo-pressure
  (a Taylor-Hood-type saddle system).
* M3 -- H(div)-conforming BDM elements with an interior-penalty treatment of
  the streamline-derivative term; normal trace imposed strongly.
* M4 -- fully discontinuous vector elements with interior penalties for both
  the streamline-derivative and the grad-div term.

Submodules: `quadrature`, `reference`, `mesh`, `fespace`, `forms`, `linalg`,
`problems`, `cli`.
"""

__version__ = "0.1.0"

from .mesh import make_unit_disc_mesh, make_unit_square_mesh, mesh_size, refine
from .fespace import build_space, DiscreteField, bdm_interpolate, l2_project
from .forms import (METHODS, CoefficientSet, assemble_method, error_norms,
                    method_spaces, paper_coefficients, rotational_flow)
from .linalg import LinearSystem, solve, estimate_control_constant
from .problems import (ManufacturedProblem, convergence_problem,
                       gradrob_problem, locking_problem)

__all__ = [
    "__version__",
    "make_unit_disc_mesh", "make_unit_square_mesh", "mesh_size", "refine",
    "build_space", "DiscreteField", "bdm_interpolate", "l2_project",
    "METHODS", "CoefficientSet", "assemble_method", "error_norms",
    "method_spaces", "paper_coefficients", "rotational_flow",
    "LinearSystem", "solve", "estimate_control_constant",
    "ManufacturedProblem", "convergence_problem", "gradrob_problem",
    "locking_problem",
]

"""Potential theory on rotationally symmetric model manifolds."""

__version__ = "0.1.0"

from .model import (DomainError, Field, ModelManifold, PolarGrid, RadialGrid, cylinder,
                    euclidean, hyperbolic, polynomial, radial_integral, sphere_area)
from .elliptic import (BoundaryCondition, Operator, SolverError, assemble, dirichlet_energy,
                       dirichlet_solve, harmonic_projection, harnack_constant, perron_solve)
from .capacity import (Condenser, ConsistencyError, classify, condenser_capacity,
                       exhaustion_capacity)
from .green import cap_green_sandwich, green_exhaustion, green_on_domain, green_symmetry_check
from .equilibrium import (DiscreteMeasure, KernelMatrix, chebyshev_constant, energy,
                          equilibrium_measure, harmonic_measure, kernel_matrix,
                          transfinite_diameter)
from .evans import evans_green_combination, evans_radial, truncated_energy_check

__all__ = [name for name in dir() if not name.startswith("_")]

"""One-dimensional Poisson-Boltzmann boundary-value problems solved through time maps."""

from .bvp import (Branch, DirichletBC, NeumannBC, Profile, Solution, boundary_map_G, critical_L0,
                  neumann_existence, neumann_time_map_M, reconstruct_profile, solve_dirichlet_equal,
                  solve_dirichlet_general, solve_neumann, time_map_T, time_map_T1, time_map_T2)
from .errors import (DivergenceError, DomainError, NoSolutionError, NumericalError, PBError,
                     RegimeError, UsageError)
from .model import (DimensionalContext, Electrolyte, IonSpecies, PhasePortrait, PortraitKind,
                    F_inverse, classify, debye_length, evaluate, hamiltonian, nondimensionalize,
                    reflect)

__version__ = "0.1.0"

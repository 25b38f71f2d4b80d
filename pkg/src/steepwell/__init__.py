"""Steep-well two-component NLS solver library."""
from .errors import *  # noqa: F401,F403
from .grid import Field, Grid, Norms, dump_field, integrate, laplacian, load_field, masked_integrate, norms
from .potentials import (CoercivityEstimate, PotentialSet, PotentialSpec, Well, WellGeometry, build_potentials,
                         coercivity, region_masks)
from .functionals import EnergyBreakdown, Params, diagnostics, energy, gradient, subdomain_energy
from .nehari import FiberingCoefficients, Projection, fibering_coeffs, project, project_coeffs, scalar_project, strict_gap
from .penalty import (PenaltyParams, certify, delta_beta, energy_star, f_cut, F_cut, G_cut, gradient_star, h_cut,
                      make_penalty)
from .solvers import (ReferenceGroundState, SolveConfig, SolveResult, solve_ground, solve_multibump, solve_scalar,
                      solve_scalar_box, sandwich_bounds)

__version__ = "0.1.0"

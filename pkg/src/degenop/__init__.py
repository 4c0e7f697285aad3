"""Numerical laboratory for degenerate elliptic and parabolic operator equations
with nonlocal boundary conditions.

The degenerate derivative ``D[1] = x**alpha d/dx`` becomes ``d/dtau`` under
``tau = x**(1-alpha)/(1-alpha)``; every discretization here works on a
tau-uniform grid.
"""

__version__ = "0.1.0"

from .boundary import AxisBC, BCReport, NonlocalBC, bc_rows, eta_determinant, validate_conditions
from .calculus import (DegenerateAxis, GridFunction, GridSpec, degen_derivative, inverse_map,
                       tau_map)
from .elliptic import (CoefficientField, DiscreteOperator, assemble, coercivity_scan,
                       manufactured_forcing, solve)
from .errors import *  # noqa: F401,F403
from .nonlinear import (IterationReport, NonlinearControls, NonlinearModel, base_solution,
                        picard_step, solve_nonlinear, toy_quadratic_model, trace_sup_norm)
from .norms import NormSpec, lp_norm, mixed_norm, sobolev_norm
from .parabolic import ParabolicProblem, ParabolicSolution, maximal_regularity_ratio, step_scheme
from .pollutant import PollutantModel, run_demo, to_abstract
from .sector import PositivityReport, SectorSpec, positivity_scan, resolvent_norm

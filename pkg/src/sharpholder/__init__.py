"""Sharp Hölder exponents for 2D elliptic equations with unit-determinant coefficients."""
from .alpha_bound import (ExponentReport, alpha_bar_estimate, alpha_estimate, average_table,
                          circle_average, exponent_report, ps_bounds)
from .coeff_field import (AngularField, AngularProfile, CoefficientField, DiskDomain,
                          EllipticityBounds, GridField, IdentityField, SymMatrix2, eval_matrix,
                          field_from_spec, field_to_spec, polar_conjugate, validate)
from .errors import *  # noqa: F401,F403
from .fem_solver import Mesh, SolutionField, build_mesh, l2_error, solve_dirichlet
from .holder_meter import (EnergyTrace, energy_profile, fit_exponent, monotonicity_check,
                           pointwise_holder)
from .sharp_example import SharpExample, build, eval_solution, weak_residual
from .wirtinger import (PeriodicFunction, WirtingerResult, check_inequality, minimizer,
                        rayleigh_minimize, wirtinger_constant)

__version__ = "0.1.0"
